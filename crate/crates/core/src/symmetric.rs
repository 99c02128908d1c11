//! Elementary symmetric polynomials, Gårding cones and the operator
//! families f(λ) built on them: the normalized Hessian quotient
//! `log[(σ_k/C(n,k)) / (σ_l/C(n,l))]` and the Lagrangian phase Σ arctan λᵢ.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

/// Binomial coefficient as a float (exact for the small n used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All of σ_0, …, σ_n, read off as the coefficients of ∏(1 + λᵢ t).
/// Each coefficient update carries a compensation term so mixed-sign
/// inputs do not lose digits to cancellation.
pub fn sigma_all(lambda: &[f64]) -> Vec<f64> {
    let n = lambda.len();
    let mut e = vec![0.0; n + 1];
    let mut comp = vec![0.0; n + 1];
    e[0] = 1.0;
    for (i, &l) in lambda.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            let prod = l * (e[j - 1] + comp[j - 1]);
            let prod_err = l.mul_add(e[j - 1] + comp[j - 1], -prod);
            let (s, err) = two_sum(e[j], prod);
            e[j] = s;
            comp[j] += err + prod_err;
        }
    }
    e.iter().zip(&comp).map(|(a, b)| a + b).collect()
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// σ_k(λ); σ_0 = 1.
pub fn sigma(k: usize, lambda: &[f64]) -> Result<f64> {
    if k > lambda.len() {
        return Err(Error::IndexOutOfRange { k, n: lambda.len() });
    }
    Ok(sigma_all(lambda)[k])
}

/// σ_k of λ with entry `skip` removed; σ_0 = 1 and negative k gives 0.
fn sigma_without(k: isize, lambda: &[f64], skip: usize) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let rest: Vec<f64> = lambda
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &v)| v)
        .collect();
    let k = k as usize;
    if k > rest.len() {
        0.0
    } else {
        sigma_all(&rest)[k]
    }
}

/// Phase branches for Σ arctan λᵢ > level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DhymBranch {
    /// level (n−1)π/2
    Hypercritical,
    /// level (n−2)π/2
    Supercritical,
    /// level −nπ/2: no restriction, the cone is all of ℝⁿ.
    Full,
}

impl DhymBranch {
    pub fn level(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            DhymBranch::Hypercritical => (n - 1.0) * FRAC_PI_2,
            DhymBranch::Supercritical => (n - 2.0) * FRAC_PI_2,
            DhymBranch::Full => -n * FRAC_PI_2,
        }
    }
}

pub type ConePredicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum ConeKind {
    /// Γ_k = {σ₁ > 0, …, σ_k > 0}
    Garding(usize),
    DhymBranch(DhymBranch),
    Custom(ConePredicate),
}

impl fmt::Debug for ConeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConeKind::Garding(k) => write!(f, "Garding({k})"),
            ConeKind::DhymBranch(b) => write!(f, "DhymBranch({b:?})"),
            ConeKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub n: usize,
}

impl fmt::Display for ConeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ConeKind::Garding(k) => write!(f, "Γ_{k} (n = {})", self.n),
            ConeKind::DhymBranch(b) => write!(
                f,
                "{b:?} phase branch Σ arctan λ > {:.6} (n = {})",
                b.level(self.n),
                self.n
            ),
            ConeKind::Custom(_) => write!(f, "custom cone (n = {})", self.n),
        }
    }
}

impl ConeSpec {
    pub fn garding(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidOperator(format!(
                "Gårding cone needs 1 ≤ k ≤ n, got k = {k}, n = {n}"
            )));
        }
        Ok(Self {
            kind: ConeKind::Garding(k),
            n,
        })
    }

    pub fn dhym(n: usize, branch: DhymBranch) -> Self {
        Self {
            kind: ConeKind::DhymBranch(branch),
            n,
        }
    }

    pub fn custom(n: usize, pred: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Self {
            kind: ConeKind::Custom(Arc::new(pred)),
            n,
        }
    }

    /// Strict membership.
    pub fn contains(&self, lambda: &[f64]) -> bool {
        if lambda.len() != self.n || lambda.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            ConeKind::Garding(k) => sigma_all(lambda)[1..=*k].iter().all(|&s| s > 0.0),
            ConeKind::DhymBranch(b) => phase(lambda) > b.level(self.n),
            ConeKind::Custom(pred) => pred(lambda),
        }
    }

    /// A scalar that is positive exactly on the cone: the smallest
    /// normalized σᵢ/C(n,i) for Gårding cones, the phase excess over the
    /// branch level for dHYM. Custom cones report ±1.
    pub fn margin(&self, lambda: &[f64]) -> f64 {
        match &self.kind {
            ConeKind::Garding(k) => {
                let s = sigma_all(lambda);
                (1..=*k)
                    .map(|i| s[i] / binomial(self.n, i))
                    .fold(f64::INFINITY, f64::min)
            }
            ConeKind::DhymBranch(b) => phase(lambda) - b.level(self.n),
            ConeKind::Custom(pred) => {
                if pred(lambda) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Free-function form of [`ConeSpec::contains`].
pub fn cone_contains(cone: &ConeSpec, lambda: &[f64]) -> bool {
    cone.contains(lambda)
}

fn phase(lambda: &[f64]) -> f64 {
    lambda.iter().map(|l| l.atan()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// l = 0 means σ_l ≡ 1.
    Quotient { k: usize, l: usize },
    Dhym,
}

#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub cone: ConeSpec,
    pub n: usize,
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            OperatorKind::Quotient { k, l } => write!(f, "quotient({k},{l}) n={}", self.n),
            OperatorKind::Dhym => write!(f, "dhym n={} on {}", self.n, self.cone),
        }
    }
}

impl OperatorSpec {
    pub fn quotient(n: usize, k: usize, l: usize) -> Result<Self> {
        if !(l < k && k <= n) {
            return Err(Error::InvalidOperator(format!(
                "quotient needs 0 ≤ l < k ≤ n, got k = {k}, l = {l}, n = {n}"
            )));
        }
        Ok(Self {
            kind: OperatorKind::Quotient { k, l },
            cone: ConeSpec::garding(n, k)?,
            n,
        })
    }

    pub fn dhym(n: usize, branch: DhymBranch) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidOperator("dimension must be ≥ 1".into()));
        }
        Ok(Self {
            kind: OperatorKind::Dhym,
            cone: ConeSpec::dhym(n, branch),
            n,
        })
    }

    pub fn is_dhym(&self) -> bool {
        matches!(self.kind, OperatorKind::Dhym)
    }

    /// Domain check shared by every evaluation entry point.
    pub fn ensure_in_cone(&self, lambda: &[f64]) -> Result<()> {
        if self.cone.contains(lambda) {
            Ok(())
        } else {
            Err(Error::OutsideCone {
                lambda: lambda.to_vec(),
                cone: self.cone.to_string(),
            })
        }
    }

    /// f(λ) without the cone check; callers must have checked membership.
    pub(crate) fn eval_unchecked(&self, lambda: &[f64]) -> f64 {
        match self.kind {
            OperatorKind::Quotient { k, l } => {
                let s = sigma_all(lambda);
                (s[k] / binomial(self.n, k)).ln() - (s[l] / binomial(self.n, l)).ln()
            }
            OperatorKind::Dhym => phase(lambda),
        }
    }

    pub(crate) fn grad_unchecked(&self, lambda: &[f64]) -> Vec<f64> {
        match self.kind {
            OperatorKind::Quotient { k, l } => {
                let s = sigma_all(lambda);
                (0..self.n)
                    .map(|i| {
                        let upper = sigma_without(k as isize - 1, lambda, i) / s[k];
                        let lower = if l == 0 {
                            0.0
                        } else {
                            sigma_without(l as isize - 1, lambda, i) / s[l]
                        };
                        upper - lower
                    })
                    .collect()
            }
            OperatorKind::Dhym => lambda.iter().map(|x| 1.0 / (1.0 + x * x)).collect(),
        }
    }

    pub(crate) fn f_infinity_unchecked(&self, lambda: &[f64]) -> f64 {
        match self.kind {
            OperatorKind::Quotient { l: 0, .. } => f64::INFINITY,
            OperatorKind::Quotient { k, l } => (0..self.n)
                .map(|i| {
                    let upper = sigma_without(k as isize - 1, lambda, i) / binomial(self.n, k);
                    let lower = sigma_without(l as isize - 1, lambda, i) / binomial(self.n, l);
                    upper.ln() - lower.ln()
                })
                .fold(f64::INFINITY, f64::min),
            OperatorKind::Dhym => {
                let total = phase(lambda);
                lambda
                    .iter()
                    .map(|x| FRAC_PI_2 + total - x.atan())
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn f_eval(&self, lambda: &[f64]) -> Result<f64> {
        self.ensure_in_cone(lambda)?;
        Ok(self.eval_unchecked(lambda))
    }

    /// ∂f/∂λᵢ.
    pub fn f_grad(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.ensure_in_cone(lambda)?;
        Ok(self.grad_unchecked(lambda))
    }

    /// f_∞(λ) = minᵢ lim_{R→∞} f(λ₁, …, R, …, λₙ); may be +∞.
    pub fn f_infinity(&self, lambda: &[f64]) -> Result<f64> {
        self.ensure_in_cone(lambda)?;
        Ok(self.f_infinity_unchecked(lambda))
    }

    /// Whether f_∞ is identically +∞ on the cone.
    pub fn f_infinity_is_unbounded(&self) -> bool {
        matches!(self.kind, OperatorKind::Quotient { l: 0, .. })
    }

    /// True when concavity of f on the cone is a theorem we can assert.
    pub fn concavity_asserted(&self) -> bool {
        matches!(
            (&self.kind, &self.cone.kind),
            (OperatorKind::Quotient { .. }, _) | (OperatorKind::Dhym, ConeKind::DhymBranch(DhymBranch::Hypercritical))
        )
    }
}

/// Outcome of the growth check (f(tλ) → sup f as t → ∞).
#[derive(Debug, Clone, PartialEq)]
pub enum GrowthCondition {
    /// f(tλ) → ∞ along rays: quotients grow like (k − l) log t.
    Holds,
    /// The phase operator is bounded by nπ/2 and does not satisfy it.
    NotApplicable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCheck {
    pub lambda: Vec<f64>,
    pub gradient_positive: bool,
    /// Largest eigenvalue of the finite-difference Hessian of f.
    pub max_hessian_eigenvalue: f64,
    pub concave: bool,
    /// t ↦ f(tλ) non-decreasing over t ∈ {1, 2, 4, 8}.
    pub ray_monotone: bool,
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub samples: Vec<SampleCheck>,
    pub concavity_asserted: bool,
    pub growth: GrowthCondition,
    /// Samples skipped because they (or a finite-difference stencil
    /// around them) left the cone.
    pub skipped: usize,
}

impl ConditionReport {
    pub fn gradient_failures(&self) -> usize {
        self.samples.iter().filter(|s| !s.gradient_positive).count()
    }

    pub fn concavity_failures(&self) -> usize {
        self.samples.iter().filter(|s| !s.concave).count()
    }

    /// All asserted conditions hold (concavity only counts where asserted).
    pub fn passed(&self) -> bool {
        self.gradient_failures() == 0 && (!self.concavity_asserted || self.concavity_failures() == 0)
    }
}

pub const CONCAVITY_TOL: f64 = 1e-6;

/// Checks f_i > 0, concavity by a finite-difference Hessian (step
/// 1e-4·(1+|λ|)) and growth along rays at every sample.
pub fn check_conditions(op: &OperatorSpec, samples: &[Vec<f64>]) -> ConditionReport {
    let mut checks = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for lambda in samples {
        if !op.cone.contains(lambda) {
            skipped += 1;
            continue;
        }
        match fd_hessian_max_eigenvalue(op, lambda) {
            Some(max_eig) => {
                let grad = op.grad_unchecked(lambda);
                let ray: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
                    .iter()
                    .map(|t| {
                        let scaled: Vec<f64> = lambda.iter().map(|x| t * x).collect();
                        if op.cone.contains(&scaled) {
                            op.eval_unchecked(&scaled)
                        } else {
                            f64::NAN
                        }
                    })
                    .collect();
                checks.push(SampleCheck {
                    lambda: lambda.clone(),
                    gradient_positive: grad.iter().all(|&g| g > 0.0),
                    max_hessian_eigenvalue: max_eig,
                    concave: max_eig <= CONCAVITY_TOL,
                    ray_monotone: ray.windows(2).all(|w| w[1] >= w[0]),
                });
            }
            None => skipped += 1,
        }
    }
    let growth = match op.kind {
        OperatorKind::Quotient { .. } => GrowthCondition::Holds,
        OperatorKind::Dhym => GrowthCondition::NotApplicable(format!(
            "Σ arctan λ is bounded by nπ/2 = {:.6}; the growth condition fails for the phase operator",
            op.n as f64 * FRAC_PI_2
        )),
    };
    ConditionReport {
        samples: checks,
        concavity_asserted: op.concavity_asserted(),
        growth,
        skipped,
    }
}

/// Largest eigenvalue of the central finite-difference Hessian of f, or
/// None if the stencil leaves the cone.
pub fn fd_hessian_max_eigenvalue(op: &OperatorSpec, lambda: &[f64]) -> Option<f64> {
    let n = lambda.len();
    let scale = 1.0 + lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    let h = 1e-4 * scale;
    let eval = |di: usize, si: f64, dj: usize, sj: f64| -> Option<f64> {
        let mut x = lambda.to_vec();
        x[di] += si * h;
        x[dj] += sj * h;
        op.cone.contains(&x).then(|| op.eval_unchecked(&x))
    };
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = (eval(i, 1.0, j, 1.0)? - eval(i, 1.0, j, -1.0)? - eval(i, -1.0, j, 1.0)?
                + eval(i, -1.0, j, -1.0)?)
                / (4.0 * h * h);
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    let eig = hermitian_eigen(&CMatrix::from_real_rows(n, &hess));
    Some(eig.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(2, &[1.0, 1.0, 1.0]).unwrap(), 3.0);
        assert!((sigma(2, &[3.0, 1.0, -0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(sigma(0, &[4.0, -2.0]).unwrap(), 1.0);
        assert!(matches!(sigma(3, &[1.0, 2.0]), Err(Error::IndexOutOfRange { k: 3, n: 2 })));
    }

    #[test]
    fn cone_examples() {
        let lam = [3.0, 1.0, -0.5];
        assert!(ConeSpec::garding(3, 2).unwrap().contains(&lam));
        assert!(!ConeSpec::garding(3, 3).unwrap().contains(&lam));
        assert!(ConeSpec::garding(4, 4).unwrap().contains(&[1.0; 4]));
        assert!(ConeSpec::garding(2, 3).is_err());
    }

    #[test]
    fn f_eval_examples() {
        let q21 = OperatorSpec::quotient(2, 2, 1).unwrap();
        assert!(q21.f_eval(&[1.0, 1.0]).unwrap().abs() < 1e-15);
        let d = OperatorSpec::dhym(2, DhymBranch::Supercritical).unwrap();
        assert!((d.f_eval(&[1.0, 1.0]).unwrap() - PI / 2.0).abs() < 1e-15);
        let q20 = OperatorSpec::quotient(2, 2, 0).unwrap();
        assert!((q20.f_eval(&[2.0, 2.0]).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!(matches!(q20.f_eval(&[1.0, -1.0]), Err(Error::OutsideCone { .. })));
    }

    #[test]
    fn f_grad_examples() {
        let q21 = OperatorSpec::quotient(2, 2, 1).unwrap();
        let g = q21.f_grad(&[1.0, 1.0]).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[1] - 0.5).abs() < 1e-15);
        let d = OperatorSpec::dhym(2, DhymBranch::Full).unwrap();
        assert_eq!(d.f_grad(&[0.0, 0.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn f_infinity_examples() {
        let q31 = OperatorSpec::quotient(3, 3, 1).unwrap();
        assert!((q31.f_infinity(&[2.0, 2.0, 2.0]).unwrap() - 12f64.ln()).abs() < 1e-14);
        let q20 = OperatorSpec::quotient(2, 2, 0).unwrap();
        assert_eq!(q20.f_infinity(&[0.3, 5.0]).unwrap(), f64::INFINITY);
        let d = OperatorSpec::dhym(2, DhymBranch::Supercritical).unwrap();
        assert!((d.f_infinity(&[1.0, 1.0]).unwrap() - 0.75 * PI).abs() < 1e-15);
    }

    #[test]
    fn operator_invariants_validated() {
        assert!(OperatorSpec::quotient(2, 1, 1).is_err());
        assert!(OperatorSpec::quotient(2, 3, 1).is_err());
        assert!(OperatorSpec::quotient(3, 3, 0).is_ok());
    }

    #[test]
    fn dhym_growth_flagged() {
        let d = OperatorSpec::dhym(2, DhymBranch::Hypercritical).unwrap();
        let report = check_conditions(&d, &[vec![2.0, 3.0]]);
        assert!(matches!(report.growth, GrowthCondition::NotApplicable(_)));
        assert!(report.passed());
    }

    #[test]
    fn log_sigma_one_strictly_concave() {
        let op = OperatorSpec::quotient(1, 1, 0).unwrap();
        for lam in [0.2, 1.0, 3.5, 40.0] {
            let e = fd_hessian_max_eigenvalue(&op, &[lam]).unwrap();
            assert!(e < 0.0, "{lam}: {e}");
            assert!((e + 1.0 / (lam * lam)).abs() < 1e-4 / (lam * lam) + 1e-6);
        }
    }

    #[test]
    fn full_branch_accepts_everything_finite() {
        let c = ConeSpec::dhym(3, DhymBranch::Full);
        assert!(c.contains(&[-1e6, -3.0, 0.0]));
        assert!(!c.contains(&[f64::NAN, 0.0, 0.0]));
    }
}
