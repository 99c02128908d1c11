//! Periodic grids on the flat torus and the discrete (1,1)-forms built on
//! them.
//!
//! Real coordinates are ordered `x¹, y¹, x², y², …, xⁿ, yⁿ`, so complex
//! direction `i` owns real coordinates `2i` and `2i + 1`. Grid values are
//! row-major over that ordering (the last coordinate varies fastest).

use crate::error::{Error, Result};
use crate::linalg::{pencil_eigen, CMatrix};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

/// Minimum sample count along an active coordinate.
pub const MIN_ACTIVE_COUNT: usize = 4;

/// Discretized flat torus `(ℝ/2πℤ)^{2n}` plus the gradient-correction tensor.
#[derive(Debug, Clone)]
pub struct GridGeometry {
    n: usize,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    z_tensor: Vec<Complex64>,
    strides: Vec<usize>,
    len: usize,
    // plus[c][p], minus[c][p]: periodic neighbours of p along coordinate c
    plus: Vec<Vec<usize>>,
    minus: Vec<Vec<usize>>,
}

impl PartialEq for GridGeometry {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.shape == other.shape && self.z_tensor == other.z_tensor
    }
}

impl GridGeometry {
    /// `shape` has one entry per real coordinate; 1 marks an inactive one.
    pub fn new(n: usize, shape: Vec<usize>) -> Result<Self> {
        Self::with_z_tensor(n, shape, vec![Complex64::new(0.0, 0.0); n * n * n])
    }

    /// `z_tensor[(i * n + j) * n + k]` holds A[i][j][k].
    pub fn with_z_tensor(n: usize, shape: Vec<usize>, z_tensor: Vec<Complex64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGeometry("complex dimension must be ≥ 1".into()));
        }
        if shape.len() != 2 * n {
            return Err(Error::InvalidGeometry(format!(
                "shape has {} entries, expected 2n = {}",
                shape.len(),
                2 * n
            )));
        }
        if let Some((c, &count)) = shape
            .iter()
            .enumerate()
            .find(|(_, &m)| m == 0 || (m > 1 && m < MIN_ACTIVE_COUNT))
        {
            return Err(Error::InvalidGeometry(format!(
                "coordinate {c} has {count} samples; active coordinates need at least {MIN_ACTIVE_COUNT}"
            )));
        }
        if z_tensor.len() != n * n * n {
            return Err(Error::InvalidGeometry(format!(
                "z tensor has {} entries, expected n³ = {}",
                z_tensor.len(),
                n * n * n
            )));
        }
        if z_tensor.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidGeometry("z tensor has non-finite entries".into()));
        }

        let dims = shape.len();
        let mut strides = vec![1usize; dims];
        for c in (0..dims.saturating_sub(1)).rev() {
            strides[c] = strides[c + 1] * shape[c + 1];
        }
        let len: usize = shape.iter().product();
        let spacing = shape.iter().map(|&m| 2.0 * PI / m as f64).collect();

        let mut plus = Vec::with_capacity(dims);
        let mut minus = Vec::with_capacity(dims);
        for c in 0..dims {
            let (m, s) = (shape[c], strides[c]);
            let mut pc = Vec::with_capacity(len);
            let mut mc = Vec::with_capacity(len);
            for p in 0..len {
                let i = (p / s) % m;
                let base = p - i * s;
                pc.push(base + ((i + 1) % m) * s);
                mc.push(base + ((i + m - 1) % m) * s);
            }
            plus.push(pc);
            minus.push(mc);
        }

        Ok(Self {
            n,
            shape,
            spacing,
            z_tensor,
            strides,
            len,
            plus,
            minus,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn z_tensor(&self) -> &[Complex64] {
        &self.z_tensor
    }

    pub fn z(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.z_tensor[(i * self.n + j) * self.n + k]
    }

    pub fn has_z(&self) -> bool {
        self.z_tensor.iter().any(|z| z.norm() != 0.0)
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn real_dims(&self) -> usize {
        2 * self.n
    }

    pub fn is_active(&self, c: usize) -> bool {
        self.shape[c] > 1
    }

    pub fn active_coords(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.real_dims()).filter(|&c| self.is_active(c))
    }

    /// Product of the spacings along active coordinates.
    pub fn cell_volume(&self) -> f64 {
        self.active_coords().map(|c| self.spacing[c]).product()
    }

    /// Coordinates of grid point `p`; inactive coordinates sit at 0.
    pub fn point(&self, p: usize) -> Vec<f64> {
        (0..self.real_dims())
            .map(|c| ((p / self.strides[c]) % self.shape[c]) as f64 * self.spacing[c])
            .collect()
    }

    pub fn plus(&self, c: usize, p: usize) -> usize {
        self.plus[c][p]
    }

    pub fn minus(&self, c: usize, p: usize) -> usize {
        self.minus[c][p]
    }

    /// Central first difference along `c` (zero on inactive coordinates).
    pub fn d1(&self, u: &[f64], c: usize, p: usize) -> f64 {
        if !self.is_active(c) {
            return 0.0;
        }
        (u[self.plus[c][p]] - u[self.minus[c][p]]) / (2.0 * self.spacing[c])
    }

    /// Central second difference along `c, d` (zero if either is inactive).
    pub fn d2(&self, u: &[f64], c: usize, d: usize, p: usize) -> f64 {
        if !self.is_active(c) || !self.is_active(d) {
            return 0.0;
        }
        if c == d {
            let h = self.spacing[c];
            (u[self.plus[c][p]] - 2.0 * u[p] + u[self.minus[c][p]]) / (h * h)
        } else {
            let (pc, mc) = (&self.plus[c], &self.minus[c]);
            let (pd, md) = (&self.plus[d], &self.minus[d]);
            let pp = u[pc[pd[p]]];
            let pm = u[pc[md[p]]];
            let mp = u[mc[pd[p]]];
            let mm = u[mc[md[p]]];
            ((pp - pm) - (mp - mm)) / (4.0 * self.spacing[c] * self.spacing[d])
        }
    }

    /// Real gradient of `u` at `p`, length 2n.
    pub fn real_gradient(&self, u: &[f64], p: usize) -> Vec<f64> {
        (0..self.real_dims()).map(|c| self.d1(u, c, p)).collect()
    }

    /// Real Hessian of `u` at `p`, row-major 2n × 2n, exactly symmetric.
    pub fn real_hessian(&self, u: &[f64], p: usize) -> Vec<f64> {
        let m = self.real_dims();
        let mut out = vec![0.0; m * m];
        for c in 0..m {
            for d in c..m {
                let v = self.d2(u, c, d, p);
                out[c * m + d] = v;
                out[d * m + c] = v;
            }
        }
        out
    }

    /// Maps a real Hessian (2n × 2n) to (∂∂̄u)_{ij̄} =
    /// ¼[(∂xᵢ∂xⱼ + ∂yᵢ∂yⱼ)u + i(∂xᵢ∂yⱼ − ∂yᵢ∂xⱼ)u].
    pub fn hessian_form(&self, hess: &[f64]) -> CMatrix {
        let n = self.n;
        let m = 2 * n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                let re = hess[xi * m + xj] + hess[yi * m + yj];
                let im = hess[xi * m + yj] - hess[yi * m + xj];
                out[(i, j)] = Complex64::new(0.25 * re, 0.25 * im);
            }
        }
        out.symmetrize();
        out
    }

    /// Complex gradient ∂_{zᵏ}u = ½(∂xᵏ − i∂yᵏ)u from a real gradient.
    pub fn complex_gradient(&self, grad: &[f64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|k| Complex64::new(0.5 * grad[2 * k], -0.5 * grad[2 * k + 1]))
            .collect()
    }

    /// Z_{ij̄} = Σₖ A[i][j][k]·∂ₖu + conj(A[j][i][k]·∂ₖu) from a real gradient.
    pub fn gradient_form(&self, grad: &[f64]) -> CMatrix {
        let n = self.n;
        let dz = self.complex_gradient(grad);
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, g) in dz.iter().enumerate() {
                    acc += self.z(i, j, k) * g + (self.z(j, i, k) * g).conj();
                }
                out[(i, j)] = acc;
            }
        }
        out.symmetrize();
        out
    }

    /// Hessian plus gradient-correction contribution of `u` at `p`.
    pub fn potential_form(&self, u: &[f64], p: usize) -> CMatrix {
        let hess = self.real_hessian(u, p);
        let mut form = self.hessian_form(&hess);
        if self.has_z() {
            form = form.add(&self.gradient_form(&self.real_gradient(u, p)));
        }
        form
    }
}

/// Real-valued function sampled on a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    geom: Arc<GridGeometry>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(geom: Arc<GridGeometry>, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(Error::InvalidField(format!(
                "{} values for a grid of {} points",
                values.len(),
                geom.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at grid point {p}")));
        }
        Ok(Self { geom, values })
    }

    pub fn constant(geom: Arc<GridGeometry>, value: f64) -> Self {
        let values = vec![value; geom.len()];
        Self { geom, values }
    }

    pub fn zeros(geom: Arc<GridGeometry>) -> Self {
        Self::constant(geom, 0.0)
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(geom: Arc<GridGeometry>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..geom.len()).map(|p| f(&geom.point(p))).collect();
        Self::new(geom, values)
    }

    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geom
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise combination; panics on mismatched lengths.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.len(), other.len());
        Self {
            geom: self.geom.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            geom: self.geom.clone(),
            values: self.values.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map(|a| a + c)
    }
}

/// Per-point n × n Hermitian matrices, stored flat.
#[derive(Debug, Clone)]
pub struct HermitianField {
    geom: Arc<GridGeometry>,
    data: Vec<Complex64>,
}

impl HermitianField {
    pub fn zeros(geom: Arc<GridGeometry>) -> Self {
        let size = geom.len() * geom.n() * geom.n();
        Self {
            geom,
            data: vec![Complex64::new(0.0, 0.0); size],
        }
    }

    /// The same matrix at every point.
    pub fn constant(geom: Arc<GridGeometry>, m: &CMatrix) -> Result<Self> {
        if m.dim() != geom.n() {
            return Err(Error::InvalidField(format!(
                "matrix is {0}×{0}, geometry has n = {1}",
                m.dim(),
                geom.n()
            )));
        }
        let data = m.as_slice().repeat(geom.len());
        Self::from_raw(geom, data)
    }

    pub fn identity(geom: Arc<GridGeometry>) -> Self {
        let id = CMatrix::identity(geom.n());
        Self::constant(geom, &id).expect("identity matches its own geometry")
    }

    /// Builds from per-point matrices; each is symmetrized.
    pub fn from_matrices(geom: Arc<GridGeometry>, mats: Vec<CMatrix>) -> Result<Self> {
        if mats.len() != geom.len() {
            return Err(Error::InvalidField(format!(
                "{} matrices for a grid of {} points",
                mats.len(),
                geom.len()
            )));
        }
        let mut data = Vec::with_capacity(geom.len() * geom.n() * geom.n());
        for mut m in mats {
            if m.dim() != geom.n() {
                return Err(Error::InvalidField("matrix dimension does not match n".into()));
            }
            m.symmetrize();
            data.extend_from_slice(m.as_slice());
        }
        Self::from_raw(geom, data)
    }

    /// Flat row-major entries, one n × n block per point; symmetrized.
    pub fn from_raw(geom: Arc<GridGeometry>, data: Vec<Complex64>) -> Result<Self> {
        let n = geom.n();
        if data.len() != geom.len() * n * n {
            return Err(Error::InvalidField(format!(
                "{} entries, expected {}",
                data.len(),
                geom.len() * n * n
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidField("non-finite matrix entry".into()));
        }
        let mut field = Self { geom, data };
        for p in 0..field.geom.len() {
            let mut m = field.matrix(p);
            m.symmetrize();
            field.set_matrix(p, &m);
        }
        Ok(field)
    }

    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geom
    }

    pub fn raw(&self) -> &[Complex64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.geom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geom.is_empty()
    }

    pub fn matrix(&self, p: usize) -> CMatrix {
        let nn = self.geom.n() * self.geom.n();
        CMatrix::from_rows(self.geom.n(), self.data[p * nn..(p + 1) * nn].to_vec())
    }

    fn set_matrix(&mut self, p: usize, m: &CMatrix) {
        let nn = self.geom.n() * self.geom.n();
        self.data[p * nn..(p + 1) * nn].copy_from_slice(m.as_slice());
    }

    /// max over points of ‖M − M*‖∞
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.len())
            .map(|p| self.matrix(p).hermitian_defect())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(&self.geom, &other.geom)?;
        Ok(Self {
            geom: self.geom.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }
}

pub(crate) fn check_same(a: &Arc<GridGeometry>, b: &Arc<GridGeometry>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GeometryMismatch)
    }
}

fn collect_field(geom: &Arc<GridGeometry>, f: impl Fn(usize) -> CMatrix + Sync + Send) -> HermitianField {
    let mats: Vec<CMatrix> = (0..geom.len()).into_par_iter().map(f).collect();
    let mut data = Vec::with_capacity(geom.len() * geom.n() * geom.n());
    for m in &mats {
        data.extend_from_slice(m.as_slice());
    }
    HermitianField {
        geom: geom.clone(),
        data,
    }
}

/// Second-order central-difference approximation of √−1 ∂∂̄u.
pub fn complex_hessian(u: &ScalarField, geom: &Arc<GridGeometry>) -> Result<HermitianField> {
    check_same(u.geometry(), geom)?;
    let vals = u.values();
    Ok(collect_field(geom, |p| geom.hessian_form(&geom.real_hessian(vals, p))))
}

/// The (1,1)-form Z(∂u), linear in the central-difference gradient of `u`.
pub fn gradient_correction(u: &ScalarField, geom: &Arc<GridGeometry>) -> Result<HermitianField> {
    check_same(u.geometry(), geom)?;
    let vals = u.values();
    Ok(collect_field(geom, |p| geom.gradient_form(&geom.real_gradient(vals, p))))
}

/// ω_u = ω + √−1 ∂∂̄u + Z(∂u), pointwise.
pub fn assemble_omega_u(
    omega: &HermitianField,
    u: &ScalarField,
    geom: &Arc<GridGeometry>,
) -> Result<HermitianField> {
    check_same(omega.geometry(), geom)?;
    check_same(u.geometry(), geom)?;
    let vals = u.values();
    Ok(collect_field(geom, |p| {
        let mut m = omega.matrix(p).add(&geom.potential_form(vals, p));
        m.symmetrize();
        m
    }))
}

/// Eigenvalues of `gt` with respect to `chi` at every point, each sorted
/// descending.
pub fn eigenvalues_wrt_chi(gt: &HermitianField, chi: &HermitianField) -> Result<Vec<Vec<f64>>> {
    check_same(gt.geometry(), chi.geometry())?;
    (0..gt.len())
        .into_par_iter()
        .map(|p| {
            pencil_eigen(&gt.matrix(p), &chi.matrix(p))
                .map(|e| e.values)
                .map_err(|pivot| Error::InvalidMetric { point: p, pivot })
        })
        .collect()
}

/// Checks χ is positive definite at every point.
pub fn check_metric(chi: &HermitianField) -> Result<()> {
    for p in 0..chi.len() {
        crate::linalg::cholesky(&chi.matrix(p))
            .map_err(|pivot| Error::InvalidMetric { point: p, pivot })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize, shape: Vec<usize>) -> Arc<GridGeometry> {
        Arc::new(GridGeometry::new(n, shape).unwrap())
    }

    #[test]
    fn rejects_short_active_axes() {
        assert!(GridGeometry::new(1, vec![3, 1]).is_err());
        assert!(GridGeometry::new(1, vec![8]).is_err());
        assert!(GridGeometry::new(0, vec![]).is_err());
        assert!(GridGeometry::new(1, vec![4, 1]).is_ok());
    }

    #[test]
    fn spacing_times_count_is_two_pi() {
        let g = geom(2, vec![8, 16, 1, 4]);
        for c in g.active_coords() {
            assert!((g.spacing()[c] * g.shape()[c] as f64 - 2.0 * PI).abs() < 1e-14);
        }
        assert_eq!(g.len(), 8 * 16 * 4);
    }

    #[test]
    fn neighbours_wrap() {
        let g = geom(1, vec![4, 5]);
        // last point of the first axis wraps to the first
        let p = 3 * 5 + 2;
        assert_eq!(g.plus(0, p), 2);
        assert_eq!(g.minus(1, 3 * 5), 3 * 5 + 4);
    }

    #[test]
    fn zero_potential_gives_zero_hessian() {
        let g = geom(2, vec![8, 8, 1, 1]);
        let h = complex_hessian(&ScalarField::zeros(g.clone()), &g).unwrap();
        assert!(h.raw().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn cosine_hessian_at_origin() {
        let g = geom(1, vec![256, 1]);
        let u = ScalarField::from_fn(g.clone(), |x| x[0].cos()).unwrap();
        let h = complex_hessian(&u, &g).unwrap();
        assert!((h.matrix(0)[(0, 0)].re + 0.25).abs() < 1e-4);
    }

    #[test]
    fn mismatched_geometry_is_rejected() {
        let g1 = geom(1, vec![8, 1]);
        let g2 = geom(1, vec![16, 1]);
        let u = ScalarField::zeros(g1);
        assert!(matches!(complex_hessian(&u, &g2), Err(Error::GeometryMismatch)));
    }

    #[test]
    fn non_positive_chi_is_invalid_metric() {
        let g = geom(1, vec![4, 1]);
        let chi = HermitianField::constant(g.clone(), &CMatrix::from_real_diagonal(&[-1.0])).unwrap();
        let gt = HermitianField::identity(g);
        assert!(matches!(
            eigenvalues_wrt_chi(&gt, &chi),
            Err(Error::InvalidMetric { point: 0, .. })
        ));
    }
}
