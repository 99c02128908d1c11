//! Small dense complex matrices and the Hermitian eigen layer.
//!
//! Matrices here are tiny (n ≤ 4 in practice), so everything is a plain
//! row-major `Vec<Complex64>` and the eigensolver is cyclic Jacobi.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};

// Off-diagonal Frobenius mass, relative to ‖A‖_F, at which a sweep stops.
const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds from row-major entries; panics if the length is not a square.
    pub fn from_rows(n: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), n * n, "expected {} entries", n * n);
        Self { n, data }
    }

    pub fn from_real_rows(n: usize, data: &[f64]) -> Self {
        Self::from_rows(n, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let n = self.n;
        assert_eq!(n, rhs.n);
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Replaces the matrix by (M + M*)/2.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            self[(i, i)] = Complex64::new(self[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let avg = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    /// max |M_ij − conj(M_ji)|
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Re tr(self · rhs); for two Hermitian matrices this is the real
    /// Frobenius pairing Σ self_ab · rhs_ba.
    pub fn trace_product_re(&self, rhs: &Self) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += (self[(a, b)] * rhs[(b, a)]).re;
            }
        }
        acc
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Cholesky factor L (lower triangular, real positive diagonal) with
/// M = L L*. On failure returns the offending pivot value.
pub fn cholesky(m: &CMatrix) -> Result<CMatrix, f64> {
    let n = m.dim();
    let mut l = CMatrix::zeros(n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(d);
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn lower_triangular_inverse(l: &CMatrix) -> CMatrix {
    let n = l.dim();
    let mut inv = CMatrix::zeros(n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            for k in col..i {
                s -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    inv
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column j is the unit eigenvector for `values[j]`.
    pub vectors: CMatrix,
}

/// Cyclic Jacobi for a Hermitian matrix. Each rotation first removes the
/// phase of the pivot entry, then applies the real symmetric Jacobi
/// rotation to the resulting real 2×2 block.
pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let n = m.dim();
    let mut a = m.clone();
    a.symmetrize();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off.sqrt() <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-18 * scale {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U acts on columns p, q:
                //   U_pp = c, U_pq = s, U_qp = -s e^{-iφ}, U_qq = c e^{-iφ}
                let e = phase.conj();
                let u_pp = Complex64::new(c, 0.0);
                let u_pq = Complex64::new(s, 0.0);
                let u_qp = -e * s;
                let u_qq = e * c;

                // A <- A U
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                // A <- U* A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

                // V <- V U
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    HermitianEigen { values, vectors }
}

/// Generalized eigen-decomposition of the pencil (g, χ) with χ = L L*.
/// Returns eigenvalues of L⁻¹ g L⁻* (sorted descending) together with
/// eigenvectors of that reduced matrix and the inverse factor L⁻¹.
#[derive(Clone, Debug)]
pub struct PencilEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
    pub chol_inv: CMatrix,
}

pub fn pencil_eigen(g: &CMatrix, chi: &CMatrix) -> Result<PencilEigen, f64> {
    let l = cholesky(chi)?;
    let linv = lower_triangular_inverse(&l);
    let reduced = linv.matmul(g).matmul(&linv.adjoint());
    let eig = hermitian_eigen(&reduced);
    Ok(PencilEigen {
        values: eig.values,
        vectors: eig.vectors,
        chol_inv: linv,
    })
}

impl PencilEigen {
    /// The matrix P = L⁻* V diag(w) V* L⁻¹, so that for any Hermitian
    /// perturbation δg the first-order change of Σ wᵢ λᵢ equals Re tr(P δg).
    pub fn pullback_weights(&self, weights: &[f64]) -> CMatrix {
        let n = self.values.len();
        let mut vd = self.vectors.clone();
        for j in 0..n {
            for k in 0..n {
                vd[(k, j)] *= weights[j];
            }
        }
        let inner = vd.matmul(&self.vectors.adjoint());
        let mut p = self.chol_inv.adjoint().matmul(&inner).matmul(&self.chol_inv);
        p.symmetrize();
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_pencil_sorted_descending() {
        let g = CMatrix::from_real_diagonal(&[2.0, 3.0]);
        let e = pencil_eigen(&g, &CMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0]);
    }

    #[test]
    fn two_by_two_pencil_matches_quadratic() {
        let g = CMatrix::from_real_rows(2, &[2.0, 1.0, 1.0, 2.0]);
        let chi = CMatrix::from_real_diagonal(&[2.0, 1.0]);
        let e = pencil_eigen(&g, &chi).unwrap();
        let s3 = 3f64.sqrt();
        assert!((e.values[0] - (3.0 + s3) / 2.0).abs() < 1e-12);
        assert!((e.values[1] - (3.0 - s3) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_positive_metric_is_rejected() {
        let chi = CMatrix::from_real_diagonal(&[1.0, 0.0]);
        assert!(cholesky(&chi).is_err());
        let chi = CMatrix::from_real_rows(2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky(&chi).is_err());
    }

    #[test]
    fn complex_hermitian_reconstruction() {
        let m = CMatrix::from_rows(
            3,
            vec![
                c(2.0, 0.0),
                c(0.5, -0.3),
                c(0.1, 0.7),
                c(0.5, 0.3),
                c(-1.0, 0.0),
                c(0.2, 0.0),
                c(0.1, -0.7),
                c(0.2, 0.0),
                c(0.5, 0.0),
            ],
        );
        let e = hermitian_eigen(&m);
        let mut d = CMatrix::zeros(3);
        for i in 0..3 {
            d[(i, i)] = c(e.values[i], 0.0);
        }
        let recon = e.vectors.matmul(&d).matmul(&e.vectors.adjoint());
        for (a, b) in recon.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
        let vtv = e.vectors.adjoint().matmul(&e.vectors);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - c(expect, 0.0)).norm() < 1e-12);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pullback_weights_give_first_order_change() {
        let g = CMatrix::from_rows(2, vec![c(2.0, 0.0), c(0.3, 0.4), c(0.3, -0.4), c(1.0, 0.0)]);
        let chi = CMatrix::from_rows(2, vec![c(1.5, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(1.0, 0.0)]);
        let dg = CMatrix::from_rows(2, vec![c(0.3, 0.0), c(-0.1, 0.2), c(-0.1, -0.2), c(0.7, 0.0)]);
        let w = [0.25, 1.5];
        let e0 = pencil_eigen(&g, &chi).unwrap();
        let p = e0.pullback_weights(&w);
        let s = 1e-6;
        let plus = pencil_eigen(&g.add(&dg.scale(s)), &chi).unwrap();
        let minus = pencil_eigen(&g.add(&dg.scale(-s)), &chi).unwrap();
        let fd: f64 = (0..2)
            .map(|i| w[i] * (plus.values[i] - minus.values[i]) / (2.0 * s))
            .sum();
        assert!((fd - p.trace_product_re(&dg)).abs() < 1e-8);
    }
}
