//! C-subsolution tests and the sub-slope bracket.
//!
//! The sub-slope is an infimum over all admissible potentials, so it is
//! reported as a bracket: a lower bound from F at the background form and
//! an upper bound from the best of a finite ensemble of trial potentials.

use crate::equation::Equation;
use crate::error::{Error, Result};
use crate::grid::{check_same, GridGeometry, ScalarField};
use crate::symmetric::OperatorSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct SubsolutionCheck {
    pub is_subsolution: bool,
    /// f_∞(λ(x)) − h(x) − shift at every point (may be +∞).
    pub margin: Vec<f64>,
    pub min_margin: f64,
    pub argmin: usize,
}

impl SubsolutionCheck {
    pub fn mean_margin(&self) -> f64 {
        self.margin.iter().sum::<f64>() / self.margin.len() as f64
    }
}

/// Tests min over the grid of f_∞(λ(x)) − h(x) − shift > 0 (strict).
pub fn is_c_subsolution(
    op: &OperatorSpec,
    lambda_field: &[Vec<f64>],
    h: &ScalarField,
    shift: f64,
) -> Result<SubsolutionCheck> {
    if lambda_field.len() != h.len() {
        return Err(Error::InvalidField(format!(
            "{} eigenvalue vectors for {} values of h",
            lambda_field.len(),
            h.len()
        )));
    }
    let mut margin = Vec::with_capacity(h.len());
    for (p, (lambda, hv)) in lambda_field.iter().zip(h.values()).enumerate() {
        if !op.cone.contains(lambda) {
            return Err(Error::ConeViolation {
                point: p,
                lambda: lambda.clone(),
                cone: op.cone.to_string(),
            });
        }
        margin.push(op.f_infinity_unchecked(lambda) - hv - shift);
    }
    let (argmin, min_margin) = margin
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
    Ok(SubsolutionCheck {
        is_subsolution: min_margin > 0.0,
        margin,
        min_margin,
        argmin,
    })
}

/// The explicit phase criterion: Σ_{i≠k} arctan λᵢ(x) > h(x) − π/2 for
/// every point x and every index k.
pub fn dhym_subsolution_criterion(lambda_field: &[Vec<f64>], h: &ScalarField) -> bool {
    lambda_field.iter().zip(h.values()).all(|(lambda, &hv)| {
        (0..lambda.len()).all(|k| {
            let partial: f64 = lambda
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, l)| l.atan())
                .sum();
            partial > hv - FRAC_PI_2
        })
    })
}

/// inf_M F(ω) − sup_M h.
pub fn subslope_lower_bound(eq: &Equation, h: &ScalarField) -> Result<f64> {
    check_same(h.geometry(), eq.geometry())?;
    let f_omega = eq.evaluate_background()?;
    Ok(f_omega.min() - h.max())
}

#[derive(Debug, Clone)]
pub struct SkippedTrial {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SubslopeEstimate {
    /// min over admissible trials of max_M (F(u) − h); an upper bound.
    pub value: f64,
    pub best_trial: usize,
    /// max_M (F(u) − h) per trial; NaN for skipped trials.
    pub per_trial: Vec<f64>,
    pub admissible: usize,
    pub skipped: Vec<SkippedTrial>,
}

/// max_M (F(u) − h) for one potential.
pub fn max_excess(eq: &Equation, u: &ScalarField, h: &ScalarField) -> Result<f64> {
    let f = eq.evaluate(u)?;
    Ok(f.zip_map(h, |a, b| a - b).max())
}

pub fn subslope_estimate(eq: &Equation, h: &ScalarField, trials: &[ScalarField]) -> Result<SubslopeEstimate> {
    check_same(h.geometry(), eq.geometry())?;
    let mut per_trial = Vec::with_capacity(trials.len());
    let mut skipped = Vec::new();
    for (index, u) in trials.iter().enumerate() {
        match max_excess(eq, u, h) {
            Ok(v) => per_trial.push(v),
            Err(e @ (Error::ConeViolation { .. } | Error::GeometryMismatch)) => {
                per_trial.push(f64::NAN);
                skipped.push(SkippedTrial {
                    index,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let (best_trial, value) = per_trial
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .fold((usize::MAX, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
    if best_trial == usize::MAX {
        return Err(Error::NoAdmissibleTrial { tried: trials.len() });
    }
    Ok(SubslopeEstimate {
        value,
        best_trial,
        admissible: trials.len() - skipped.len(),
        per_trial,
        skipped,
    })
}

/// The certified bracket [lower, upper] for the sub-slope.
#[derive(Debug, Clone)]
pub struct SubslopeBracket {
    pub lower: f64,
    pub upper: SubslopeEstimate,
}

pub fn subslope_bracket(eq: &Equation, h: &ScalarField, trials: &[ScalarField]) -> Result<SubslopeBracket> {
    Ok(SubslopeBracket {
        lower: subslope_lower_bound(eq, h)?,
        upper: subslope_estimate(eq, h, trials)?,
    })
}

/// Random band-limited trial ensembles.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub count: usize,
    pub seed: u64,
    /// Largest |k|∞ of the Fourier modes used along active coordinates.
    pub max_mode: i32,
    pub amplitude: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            count: 100,
            seed: 0,
            max_mode: 3,
            amplitude: 0.1,
        }
    }
}

/// One random field Σ_k (a_k cos(k·x) + b_k sin(k·x)) with Gaussian
/// coefficients over 0 < |k|∞ ≤ max_mode, scaled to unit sup norm.
pub fn random_band_limited(geom: &Arc<GridGeometry>, max_mode: i32, rng: &mut impl Rng) -> ScalarField {
    let active: Vec<usize> = geom.active_coords().collect();
    let mut modes: Vec<Vec<i32>> = vec![vec![]];
    for _ in &active {
        modes = modes
            .into_iter()
            .flat_map(|m| {
                (-max_mode..=max_mode).map(move |k| {
                    let mut m = m.clone();
                    m.push(k);
                    m
                })
            })
            .collect();
    }
    // keep one representative of each ±k pair, drop k = 0
    modes.retain(|m| m.iter().find(|&&k| k != 0).is_some_and(|&k| k > 0));

    let terms: Vec<(Vec<i32>, f64, f64)> = modes
        .into_iter()
        .map(|m| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            let decay = 1.0 / (1.0 + m.iter().map(|k| (k * k) as f64).sum::<f64>());
            (m, a * decay, b * decay)
        })
        .collect();
    let values: Vec<f64> = (0..geom.len())
        .map(|p| {
            let x = geom.point(p);
            terms
                .iter()
                .map(|(m, a, b)| {
                    let phase: f64 = m.iter().zip(&active).map(|(&k, &c)| k as f64 * x[c]).sum();
                    a * phase.cos() + b * phase.sin()
                })
                .sum()
        })
        .collect();
    let field = ScalarField::new(geom.clone(), values).expect("finite trig sum");
    let norm = field.norm_inf();
    if norm > 0.0 {
        field.map(|v| v / norm)
    } else {
        field
    }
}

/// Draws `cfg.count` admissible trials. Each draw starts at amplitude
/// `cfg.amplitude` and is halved until ω_u lies in the cone (up to 30
/// halvings; a draw that never becomes admissible is dropped).
pub fn random_trials(eq: &Equation, cfg: &TrialConfig) -> Vec<ScalarField> {
    let geom = eq.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        let shape = random_band_limited(geom, cfg.max_mode, &mut rng);
        let mut amp = cfg.amplitude;
        for _ in 0..30 {
            let trial = shape.map(|v| amp * v);
            if eq.is_admissible(&trial) {
                out.push(trial);
                break;
            }
            amp *= 0.5;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::HermitianField;
    use crate::symmetric::DhymBranch;
    use std::f64::consts::PI;

    fn geom() -> Arc<GridGeometry> {
        Arc::new(GridGeometry::new(2, vec![4, 1, 1, 1]).unwrap())
    }

    #[test]
    fn dhym_zero_eigenvalues_threshold() {
        let g = geom();
        let op = OperatorSpec::dhym(2, DhymBranch::Full).unwrap();
        let lam = vec![vec![0.0, 0.0]; g.len()];
        for (c, expect) in [(1.0, true), (PI / 2.0 - 1e-9, true), (PI / 2.0, false), (2.0, false)] {
            let h = ScalarField::constant(g.clone(), c);
            let check = is_c_subsolution(&op, &lam, &h, 0.0).unwrap();
            assert_eq!(check.is_subsolution, expect, "c = {c}");
            assert_eq!(dhym_subsolution_criterion(&lam, &h), expect);
        }
    }

    #[test]
    fn unbounded_f_infinity_always_subsolution() {
        let g = geom();
        let op = OperatorSpec::quotient(2, 2, 0).unwrap();
        let lam = vec![vec![0.5, 2.0]; g.len()];
        let h = ScalarField::constant(g, 1e6);
        let check = is_c_subsolution(&op, &lam, &h, 3.0).unwrap();
        assert!(check.is_subsolution);
        assert_eq!(check.min_margin, f64::INFINITY);
    }

    #[test]
    fn zero_margin_is_not_a_subsolution() {
        let g = Arc::new(GridGeometry::new(3, vec![4, 1, 1, 1, 1, 1]).unwrap());
        let op = OperatorSpec::quotient(3, 3, 1).unwrap();
        let lam = vec![vec![2.0, 2.0, 2.0]; g.len()];
        let h = ScalarField::constant(g, 12f64.ln());
        let check = is_c_subsolution(&op, &lam, &h, 0.0).unwrap();
        assert!(!check.is_subsolution);
        assert!(check.min_margin.abs() < 1e-14);
    }

    #[test]
    fn cone_violation_names_point() {
        let g = geom();
        let op = OperatorSpec::quotient(2, 2, 1).unwrap();
        let mut lam = vec![vec![1.0, 1.0]; g.len()];
        lam[2] = vec![1.0, -2.0];
        let h = ScalarField::zeros(g);
        assert!(matches!(
            is_c_subsolution(&op, &lam, &h, 0.0),
            Err(Error::ConeViolation { point: 2, .. })
        ));
    }

    #[test]
    fn dhym_criterion_examples() {
        let g = geom();
        let h = ScalarField::constant(g.clone(), PI / 2.0);
        assert!(dhym_subsolution_criterion(&vec![vec![1.0, 1.0]; g.len()], &h));
        assert!(!dhym_subsolution_criterion(&vec![vec![0.0, 0.0]; g.len()], &h));
        let h = ScalarField::constant(g.clone(), 3.0);
        assert!(dhym_subsolution_criterion(&vec![vec![1e9, 1e9]; g.len()], &h));
    }

    #[test]
    fn lower_bound_and_estimate_on_identity_background() {
        let g = geom();
        let op = OperatorSpec::quotient(2, 2, 1).unwrap();
        let eq = Equation::new(op, HermitianField::identity(g.clone()), HermitianField::identity(g.clone())).unwrap();
        let h = ScalarField::zeros(g.clone());
        assert!(subslope_lower_bound(&eq, &h).unwrap().abs() < 1e-15);
        let est = subslope_estimate(&eq, &h, &[ScalarField::zeros(g)]).unwrap();
        assert!(est.value.abs() < 1e-15);
    }

    #[test]
    fn empty_admissible_set_is_an_error() {
        let g = Arc::new(GridGeometry::new(1, vec![8, 1]).unwrap());
        let op = OperatorSpec::quotient(1, 1, 0).unwrap();
        let eq = Equation::new(op, HermitianField::identity(g.clone()), HermitianField::identity(g.clone())).unwrap();
        let h = ScalarField::zeros(g.clone());
        let bad = ScalarField::from_fn(g, |x| 100.0 * x[0].cos()).unwrap();
        let err = subslope_estimate(&eq, &h, &[bad]).unwrap_err();
        assert!(matches!(err, Error::NoAdmissibleTrial { tried: 1 }));
    }

    #[test]
    fn trials_are_admissible_and_deterministic() {
        let g = Arc::new(GridGeometry::new(1, vec![16, 1]).unwrap());
        let op = OperatorSpec::quotient(1, 1, 0).unwrap();
        let eq = Equation::new(op, HermitianField::identity(g.clone()), HermitianField::identity(g)).unwrap();
        let cfg = TrialConfig {
            count: 5,
            seed: 7,
            max_mode: 3,
            amplitude: 2.0,
        };
        let a = random_trials(&eq, &cfg);
        let b = random_trials(&eq, &cfg);
        assert_eq!(a.len(), 5);
        for (x, y) in a.iter().zip(&b) {
            assert!(eq.is_admissible(x));
            assert_eq!(x.values(), y.values());
        }
    }
}
