//! The linearized operator L(ψ) = Σ F^{ij̄}[(∂∂̄ψ)_{ij̄} + Z(∂ψ)_{ij̄}] and
//! the bordered systems built from it.
//!
//! L is stored as per-point real coefficients of the central-difference
//! derivatives, so `apply` is matrix-free (differences first, which makes
//! constants map to exactly zero) and `apply_transpose` scatters the same
//! stencil weights.

use crate::equation::PointState;
use crate::error::{Error, Result};
use crate::grid::{GridGeometry, ScalarField};
use crate::linalg::CMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub const LINEAR_RTOL: f64 = 1e-12;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITERS: usize = 3000;

#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    geom: Arc<GridGeometry>,
    /// Active (c, d) pairs with c ≤ d.
    pairs: Vec<(usize, usize)>,
    active: Vec<usize>,
    /// second[p * pairs.len() + k]: coefficient of D_{cd} for pair k
    second: Vec<f64>,
    /// first[p * active.len() + k]: coefficient of D_c for active coordinate k
    first: Vec<f64>,
}

impl LinearizedOperator {
    /// Builds L at the states returned by `Equation::point_states`.
    pub fn new(op: &crate::symmetric::OperatorSpec, geom: &Arc<GridGeometry>, states: &[PointState]) -> Self {
        let active: Vec<usize> = geom.active_coords().collect();
        let m = geom.real_dims();
        let mut pairs = Vec::new();
        for (i, &c) in active.iter().enumerate() {
            for &d in &active[i..] {
                pairs.push((c, d));
            }
        }
        let second_basis: Vec<CMatrix> = pairs
            .iter()
            .map(|&(c, d)| {
                let mut e = vec![0.0; m * m];
                e[c * m + d] = 1.0;
                e[d * m + c] = 1.0;
                geom.hessian_form(&e)
            })
            .collect();
        let with_z = geom.has_z();
        let first_basis: Vec<CMatrix> = active
            .iter()
            .map(|&c| {
                let mut e = vec![0.0; m];
                e[c] = 1.0;
                geom.gradient_form(&e)
            })
            .collect();

        let per_point: Vec<(Vec<f64>, Vec<f64>)> = states
            .par_iter()
            .map(|s| {
                let grad = op.grad_unchecked(&s.lambda);
                let p = s.eigen.pullback_weights(&grad);
                let second = second_basis.iter().map(|b| p.trace_product_re(b)).collect();
                let first = if with_z {
                    first_basis.iter().map(|b| p.trace_product_re(b)).collect()
                } else {
                    vec![0.0; first_basis.len()]
                };
                (second, first)
            })
            .collect();
        let mut second = Vec::with_capacity(states.len() * pairs.len());
        let mut first = Vec::with_capacity(states.len() * active.len());
        for (s, f) in per_point {
            second.extend(s);
            first.extend(f);
        }
        Self {
            geom: geom.clone(),
            pairs,
            active,
            second,
            first,
        }
    }

    pub fn len(&self) -> usize {
        self.geom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geom.is_empty()
    }

    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geom
    }

    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let g = &self.geom;
        let (np, na) = (self.pairs.len(), self.active.len());
        (0..g.len())
            .into_par_iter()
            .map(|p| {
                let mut acc = 0.0;
                for (k, &(c, d)) in self.pairs.iter().enumerate() {
                    acc += self.second[p * np + k] * g.d2(psi, c, d, p);
                }
                for (k, &c) in self.active.iter().enumerate() {
                    let w = self.first[p * na + k];
                    if w != 0.0 {
                        acc += w * g.d1(psi, c, p);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn apply_field(&self, psi: &ScalarField) -> ScalarField {
        ScalarField::new(psi.geometry().clone(), self.apply(psi.values())).expect("finite")
    }

    /// Lᵀη with respect to the plain Euclidean pairing.
    pub fn apply_transpose(&self, eta: &[f64]) -> Vec<f64> {
        let g = &self.geom;
        let h = g.spacing();
        let (np, na) = (self.pairs.len(), self.active.len());
        let mut out = vec![0.0; g.len()];
        for p in 0..g.len() {
            let e = eta[p];
            if e == 0.0 {
                continue;
            }
            for (k, &(c, d)) in self.pairs.iter().enumerate() {
                let w = self.second[p * np + k] * e;
                if c == d {
                    let s = w / (h[c] * h[c]);
                    out[g.plus(c, p)] += s;
                    out[g.minus(c, p)] += s;
                    out[p] -= 2.0 * s;
                } else {
                    let s = w / (4.0 * h[c] * h[d]);
                    out[g.plus(c, g.plus(d, p))] += s;
                    out[g.plus(c, g.minus(d, p))] -= s;
                    out[g.minus(c, g.plus(d, p))] -= s;
                    out[g.minus(c, g.minus(d, p))] += s;
                }
            }
            for (k, &c) in self.active.iter().enumerate() {
                let w = self.first[p * na + k] * e;
                if w != 0.0 {
                    let s = w / (2.0 * h[c]);
                    out[g.plus(c, p)] += s;
                    out[g.minus(c, p)] -= s;
                }
            }
        }
        out
    }

    /// Fourier symbol of the operator with grid-averaged coefficients.
    fn averaged_symbol(&self) -> Vec<Complex64> {
        let g = &self.geom;
        let n = g.len() as f64;
        let (np, na) = (self.pairs.len(), self.active.len());
        let avg_second: Vec<f64> = (0..np)
            .map(|k| (0..g.len()).map(|p| self.second[p * np + k]).sum::<f64>() / n)
            .collect();
        let avg_first: Vec<f64> = (0..na)
            .map(|k| (0..g.len()).map(|p| self.first[p * na + k]).sum::<f64>() / n)
            .collect();
        let h = g.spacing();
        let shape = g.shape();
        (0..g.len())
            .map(|p| {
                // DFT index along each coordinate equals the grid index
                let idx = index_vector(g, p);
                let theta: Vec<f64> = (0..g.real_dims())
                    .map(|c| 2.0 * std::f64::consts::PI * idx[c] as f64 / shape[c] as f64)
                    .collect();
                let mut s = Complex64::new(0.0, 0.0);
                for (k, &(c, d)) in self.pairs.iter().enumerate() {
                    let sym = if c == d {
                        let half = (0.5 * theta[c]).sin();
                        -4.0 * half * half / (h[c] * h[c])
                    } else {
                        -theta[c].sin() * theta[d].sin() / (h[c] * h[d])
                    };
                    s += avg_second[k] * sym;
                }
                for (k, &c) in self.active.iter().enumerate() {
                    s += Complex64::new(0.0, avg_first[k] * theta[c].sin() / h[c]);
                }
                s
            })
            .collect()
    }
}

fn index_vector(g: &GridGeometry, mut p: usize) -> Vec<usize> {
    let shape = g.shape();
    let mut idx = vec![0; shape.len()];
    for c in (0..shape.len()).rev() {
        idx[c] = p % shape[c];
        p /= shape[c];
    }
    idx
}

/// Multi-dimensional FFT over the active axes of a grid.
struct GridFft {
    geom: Arc<GridGeometry>,
    forward: Vec<(usize, Arc<dyn Fft<f64>>)>,
    inverse: Vec<(usize, Arc<dyn Fft<f64>>)>,
}

impl GridFft {
    fn new(geom: &Arc<GridGeometry>) -> Self {
        let mut planner = FftPlanner::new();
        let active: Vec<usize> = geom.active_coords().collect();
        let forward = active
            .iter()
            .map(|&c| (c, planner.plan_fft_forward(geom.shape()[c])))
            .collect();
        let inverse = active
            .iter()
            .map(|&c| (c, planner.plan_fft_inverse(geom.shape()[c])))
            .collect();
        Self {
            geom: geom.clone(),
            forward,
            inverse,
        }
    }

    fn run(&self, data: &mut [Complex64], plans: &[(usize, Arc<dyn Fft<f64>>)]) {
        let shape = self.geom.shape();
        let len = data.len();
        for (c, plan) in plans {
            let m = shape[*c];
            let stride: usize = shape[c + 1..].iter().product();
            let mut line = vec![Complex64::new(0.0, 0.0); m];
            for start in 0..len {
                if !(start / stride).is_multiple_of(m) {
                    continue;
                }
                for (i, z) in line.iter_mut().enumerate() {
                    *z = data[start + i * stride];
                }
                plan.process(&mut line);
                for (i, z) in line.iter().enumerate() {
                    data[start + i * stride] = *z;
                }
            }
        }
    }
}

/// Whether the bordered system uses L or its transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Direct,
    Transposed,
}

/// The square system
///
/// ```text
/// [ K      a·1 ] [x]   [r]
/// [ b·1ᵀ   0   ] [μ] = [m]
/// ```
///
/// with K = L or Lᵀ. The Newton system uses (L, a = −1, b = 1/N); the
/// adjoint-kernel extraction uses (Lᵀ, a = 1, b = 1).
pub struct BorderedSystem<'a> {
    op: &'a LinearizedOperator,
    orientation: Orientation,
    a: f64,
    b: f64,
    fft: GridFft,
    symbol: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub x: Vec<f64>,
    pub mu: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl<'a> BorderedSystem<'a> {
    pub fn new(op: &'a LinearizedOperator, orientation: Orientation, a: f64, b: f64) -> Self {
        let mut symbol = op.averaged_symbol();
        if orientation == Orientation::Transposed {
            for s in symbol.iter_mut() {
                *s = s.conj();
            }
        }
        Self {
            op,
            orientation,
            a,
            b,
            fft: GridFft::new(op.geometry()),
            symbol,
        }
    }

    fn apply(&self, z: &[f64]) -> Vec<f64> {
        let n = self.op.len();
        let (x, mu) = (&z[..n], z[n]);
        let mut out = match self.orientation {
            Orientation::Direct => self.op.apply(x),
            Orientation::Transposed => self.op.apply_transpose(x),
        };
        for v in out.iter_mut() {
            *v += self.a * mu;
        }
        out.push(self.b * x.iter().sum::<f64>());
        out
    }

    /// Exact inverse of the bordered system with K replaced by its
    /// constant-coefficient average.
    fn precondition(&self, z: &[f64]) -> Vec<f64> {
        let n = self.op.len();
        let (r, m) = (&z[..n], z[n]);
        let mean_r = r.iter().sum::<f64>() / n as f64;
        let mu = mean_r / self.a;
        let mut data: Vec<Complex64> = r.iter().map(|&v| Complex64::new(v - mean_r, 0.0)).collect();
        self.fft.run(&mut data, &self.fft.forward);
        let floor = self
            .symbol
            .iter()
            .map(|s| s.norm())
            .fold(0.0, f64::max)
            * 1e-14;
        for (k, (d, s)) in data.iter_mut().zip(&self.symbol).enumerate() {
            if k == 0 {
                *d = Complex64::new(m / self.b, 0.0);
            } else if s.norm() > floor {
                *d /= s;
            } else {
                *d = Complex64::new(0.0, 0.0);
            }
        }
        self.fft.run(&mut data, &self.fft.inverse);
        // unnormalized inverse; the zero mode holds Σx = m / b
        let scale = 1.0 / n as f64;
        let mut out: Vec<f64> = data.iter().map(|d| d.re * scale).collect();
        out.push(mu);
        out
    }

    /// Right-preconditioned restarted GMRES to relative residual `rtol`.
    pub fn solve(&self, rhs: &[f64], rhs_border: f64, rtol: f64) -> Result<LinearSolution> {
        let mut b = rhs.to_vec();
        b.push(rhs_border);
        let (z, iterations, rel) = gmres(
            |v| self.apply(v),
            |v| self.precondition(v),
            &b,
            rtol,
            GMRES_RESTART,
            GMRES_MAX_ITERS,
        );
        if !(rel <= rtol) {
            return Err(Error::SingularLinearization {
                residual: rel,
                iterations,
            });
        }
        let n = self.op.len();
        Ok(LinearSolution {
            mu: z[n],
            x: z[..n].to_vec(),
            iterations,
            relative_residual: rel,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted GMRES with right preconditioning and modified Gram–Schmidt
/// (applied twice). Returns (solution, iterations, true relative residual).
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rtol: f64,
    restart: usize,
    max_iters: usize,
) -> (Vec<f64>, usize, f64) {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return (x, 0, 0.0);
    }
    let mut iters = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= rtol || iters >= max_iters {
            return (x, iters, rel);
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut preconditioned: Vec<Vec<f64>> = Vec::new();
        let mut converged = false;

        for j in 0..restart {
            iters += 1;
            let zj = precond(&basis[j]);
            let mut w = apply(&zj);
            preconditioned.push(zj);
            let mut col = vec![0.0; j + 2];
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    col[i] += hij;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= hij * vk;
                    }
                }
            }
            let wn = norm(&w);
            col[j + 1] = wn;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = (col[j] * col[j] + col[j + 1] * col[j + 1]).sqrt();
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[j] / denom, col[j + 1] / denom) };
            cs.push(c);
            sn.push(s);
            col[j] = denom;
            col[j + 1] = 0.0;
            g.push(-s * g[j]);
            g[j] *= c;
            hess.push(col);
            let est = g[j + 1].abs() / bnorm;
            if est <= rtol * 0.5 || wn == 0.0 || iters >= max_iters {
                converged = true;
            } else {
                basis.push(w.iter().map(|v| v / wn).collect());
            }
            if converged {
                break;
            }
        }

        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                s -= hess[jj][i] * yj;
            }
            y[i] = if hess[i][i] != 0.0 { s / hess[i][i] } else { 0.0 };
        }
        for (yi, zi) in y.iter().zip(&preconditioned) {
            for (xk, zk) in x.iter_mut().zip(zi) {
                *xk += yi * zk;
            }
        }
        if converged && iters >= max_iters {
            let ax = apply(&x);
            let rel = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>()) / bnorm;
            return (x, iters, rel);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmres_solves_small_nonsymmetric_system() {
        let a = [[4.0, 1.0, 0.5], [-1.0, 3.0, 0.2], [0.3, -0.7, 2.0]];
        let apply = |v: &[f64]| -> Vec<f64> { (0..3).map(|i| (0..3).map(|j| a[i][j] * v[j]).sum()).collect() };
        let b = [1.0, -2.0, 0.5];
        let (x, _, rel) = gmres(apply, |v| v.to_vec(), &b, 1e-13, 10, 100);
        assert!(rel <= 1e-13);
        let ax = apply(&x);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }
}
