//! Named oracle and property checks behind `subslope verify`.
//!
//! Each check is self-contained and deterministic for a given seed. The
//! shipped problems are embedded so the suite runs from any directory.

use crate::config::ProblemConfig;
use crate::continuity::{adjoint_kernel, linearized_apply, run_path, verify_attained_slope, PathOutcome};
use crate::error::{Error, Result};
use crate::grid::{GridGeometry, HermitianField, ScalarField};
use crate::linalg::{pencil_eigen, CMatrix};
use crate::subsolution::{dhym_subsolution_criterion, is_c_subsolution, random_band_limited, random_trials, TrialConfig};
use crate::symmetric::{DhymBranch, OperatorSpec};
use crate::verification::{
    eigen_oracle_2x2, f_infinity_numeric, fd_directional_check, fd_gradient_error, ray_boundedness, sample_cone_point,
    sorted_desc, RayVerdict, DEFAULT_R_LIST,
};
use crate::Equation;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Problems shipped with the crate, as (name, config text).
pub const SHIPPED: [(&str, &str); 4] = [
    ("quotient_n1_manufactured", include_str!("../problems/quotient_n1_manufactured.toml")),
    ("dhym_n2_manufactured", include_str!("../problems/dhym_n2_manufactured.toml")),
    ("quotient_n2_shifted", include_str!("../problems/quotient_n2_shifted.toml")),
    ("stationary", include_str!("../problems/stationary.toml")),
];

pub fn shipped_problem(name: &str) -> Result<ProblemConfig> {
    let (_, text) = SHIPPED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::InvalidOperator(format!("no shipped problem named `{name}`")))?;
    ProblemConfig::parse(text, Path::new("."))
}

pub const CHECKS: [&str; 10] = [
    "eigen-oracle",
    "operators",
    "f-infinity",
    "routes",
    "linearization",
    "kernel",
    "stationary",
    "monitors",
    "manufactured",
    "attained-slope",
];

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Test hook: perturbs the analytic gradient so the operator check
    /// must fail.
    pub corrupt_gradient: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            corrupt_gradient: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

/// Resolves a selection; `None` means every check. An empty list or an
/// unknown name is a usage error.
pub fn select(only: Option<&[String]>) -> std::result::Result<Vec<&'static str>, String> {
    let Some(names) = only else {
        return Ok(CHECKS.to_vec());
    };
    let names: Vec<&str> = names.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err(format!("empty check selection; available: {}", CHECKS.join(", ")));
    }
    names
        .into_iter()
        .map(|n| {
            CHECKS
                .iter()
                .copied()
                .find(|c| *c == n)
                .ok_or_else(|| format!("unknown check `{n}`; available: {}", CHECKS.join(", ")))
        })
        .collect()
}

pub fn run(names: &[&'static str], opts: &SuiteOptions) -> Vec<CheckOutcome> {
    names.iter().map(|n| run_check(n, opts)).collect()
}

pub fn run_check(name: &'static str, opts: &SuiteOptions) -> CheckOutcome {
    let start = Instant::now();
    let result = match name {
        "eigen-oracle" => eigen_oracle(opts),
        "operators" => operators(opts),
        "f-infinity" => f_infinity(opts),
        "routes" => routes(opts),
        "linearization" => linearization(opts),
        "kernel" => kernel(opts),
        "stationary" => stationary(),
        "monitors" => monitors(),
        "manufactured" => manufactured(),
        "attained-slope" => attained_slope(),
        other => Err(Error::InvalidOperator(format!("unknown check `{other}`"))),
    };
    let (passed, detail) = match result {
        Ok((passed, detail)) => (passed, detail),
        Err(e) => (false, format!("error: {e}")),
    };
    CheckOutcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

type Verdict = Result<(bool, String)>;

fn rng(opts: &SuiteOptions, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(opts.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn test_operators() -> Result<Vec<(&'static str, OperatorSpec)>> {
    Ok(vec![
        ("quotient(2,1) n=2", OperatorSpec::quotient(2, 2, 1)?),
        ("quotient(3,1) n=3", OperatorSpec::quotient(3, 3, 1)?),
        ("quotient(2,0) n=2", OperatorSpec::quotient(2, 2, 0)?),
        ("dhym n=2", OperatorSpec::dhym(2, DhymBranch::Supercritical)?),
    ])
}

fn random_hermitian(n: usize, rng: &mut impl Rng, shift: f64) -> CMatrix {
    let mut m = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    // m m* + shift·I is Hermitian, positive when shift > 0
    let mut out = m.matmul(&m.adjoint());
    for i in 0..n {
        out[(i, i)] += shift;
    }
    out
}

fn eigen_oracle(opts: &SuiteOptions) -> Verdict {
    let mut rng = rng(opts, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let shift = rng.random_range(-2.0..2.0);
        let g = random_hermitian(2, &mut rng, shift);
        let chi = random_hermitian(2, &mut rng, 0.5);
        let (a, b) = eigen_oracle_2x2(&g, &chi);
        let pe = pencil_eigen(&g, &chi).map_err(|pivot| Error::InvalidMetric { point: 0, pivot })?;
        let scale = 1.0 + a.abs().max(b.abs());
        worst = worst.max((pe.values[0] - a).abs() / scale).max((pe.values[1] - b).abs() / scale);
    }
    Ok((worst <= 1e-12, format!("max relative eigenvalue error {worst:.2e} over 500 pencils")))
}

fn operators(opts: &SuiteOptions) -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for (idx, (label, op)) in test_operators()?.into_iter().enumerate() {
        let mut rng = rng(opts, 10 + idx as u64);
        let (mut nonpositive, mut grad_bad, mut order_bad, mut concave_bad) = (0, 0, 0, 0);
        let mut worst_grad: f64 = 0.0;
        for _ in 0..1000 {
            let lambda = sorted_desc(sample_cone_point(&op, &mut rng));
            let mut grad = op.f_grad(&lambda)?;
            if opts.corrupt_gradient {
                grad[0] *= 1.01;
            }
            if grad.iter().any(|&g| !(g > 0.0)) {
                nonpositive += 1;
            }
            let err = fd_gradient_error(&op, &lambda, &grad);
            worst_grad = worst_grad.max(err);
            if !(err <= 1e-4) {
                grad_bad += 1;
            }
            if grad.windows(2).any(|w| w[0] > w[1] + 1e-12) {
                order_bad += 1;
            }
            if !op.is_dhym() {
                let other = sample_cone_point(&op, &mut rng);
                let mid: Vec<f64> = lambda.iter().zip(&other).map(|(a, b)| 0.5 * (a + b)).collect();
                let lhs = op.f_eval(&mid)?;
                let rhs = 0.5 * (op.f_eval(&lambda)? + op.f_eval(&other)?);
                if lhs < rhs - 1e-10 {
                    concave_bad += 1;
                }
            }
        }
        let pass = nonpositive + grad_bad + order_bad + concave_bad == 0;
        ok &= pass;
        notes.push(format!(
            "{label}: f_i<=0 {nonpositive}, grad {grad_bad} (worst {worst_grad:.1e}), order {order_bad}, concavity {concave_bad}"
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn f_infinity(opts: &SuiteOptions) -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for (idx, (label, op)) in test_operators()?.into_iter().enumerate() {
        let mut rng = rng(opts, 20 + idx as u64);
        let mut bad = 0;
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let lambda = sample_cone_point(&op, &mut rng);
            let seq = f_infinity_numeric(&op, &lambda, &DEFAULT_R_LIST)?;
            let numeric = *seq.last().expect("non-empty R list");
            if op.f_infinity_is_unbounded() {
                // logarithmic growth: each factor 100 in R adds at least ln 100 − 1
                if seq.windows(2).any(|w| !(w[1] - w[0] >= 100f64.ln() - 1.0)) {
                    bad += 1;
                }
            } else {
                let err = (numeric - op.f_infinity(&lambda)?).abs();
                worst = worst.max(err);
                if !(err <= 1e-6) {
                    bad += 1;
                }
            }
        }
        if op.f_infinity_is_unbounded() {
            let at_one = *f_infinity_numeric(&op, &[1.0, 1.0], &DEFAULT_R_LIST)?.last().expect("non-empty R list");
            if !(at_one > 1e8f64.ln() - 1.0) {
                bad += 1;
            }
            ok &= bad == 0;
            notes.push(format!("{label}: {bad} samples without logarithmic growth; value at (1,1) {at_one:.3}"));
        } else {
            ok &= bad == 0;
            notes.push(format!("{label}: {bad} mismatches (worst {worst:.1e})"));
        }
    }
    Ok((ok, notes.join("; ")))
}

fn one_point_fields(n: usize, lambda: &[f64], h: f64) -> Result<(Vec<Vec<f64>>, ScalarField)> {
    let mut shape = vec![4];
    shape.resize(2 * n, 1);
    let geom = Arc::new(GridGeometry::new(n, shape)?);
    let field = ScalarField::constant(geom, h);
    Ok((vec![lambda.to_vec(); 4], field))
}

fn routes(opts: &SuiteOptions) -> Verdict {
    let mut rng = rng(opts, 30);
    let dhym = OperatorSpec::dhym(2, DhymBranch::Full)?;
    let mut discrepancies = 0;
    for _ in 0..1000 {
        let lambda: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let f_inf = dhym.f_infinity(&lambda)?;
        let mut offset: f64 = rng.random_range(-0.5..0.5);
        if offset.abs() < 1e-9 {
            offset = 0.25;
        }
        let (lf, h) = one_point_fields(2, &lambda, f_inf - offset)?;
        let a = dhym_subsolution_criterion(&lf, &h);
        let b = is_c_subsolution(&dhym, &lf, &h, 0.0)?.is_subsolution;
        if a != b {
            discrepancies += 1;
        }
    }
    let mut ray_bad = 0;
    let ray_ops = [OperatorSpec::quotient(2, 2, 1)?, OperatorSpec::quotient(3, 3, 1)?, dhym.clone()];
    for i in 0..100 {
        let op = &ray_ops[i % ray_ops.len()];
        let lambda = sample_cone_point(op, &mut rng);
        let f_inf = op.f_infinity(&lambda)?;
        let f0 = op.f_eval(&lambda)?;
        // keep h off the threshold and above f(λ) so the rays are informative
        let h = f0 + (f_inf - f0) * rng.random_range(0.0..2.0);
        let h = if (h - f_inf).abs() < 1e-3 { f_inf + 0.1 } else { h };
        let (lf, hf) = one_point_fields(op.n, &lambda, h)?;
        let sub = is_c_subsolution(op, &lf, &hf, 0.0)?.is_subsolution;
        let ray = ray_boundedness(op, &lambda, h)?;
        let agree = match ray {
            RayVerdict::Bounded => sub,
            RayVerdict::Unbounded => !sub,
            RayVerdict::Inconclusive => false,
        };
        if !agree {
            ray_bad += 1;
        }
    }
    Ok((
        discrepancies == 0 && ray_bad == 0,
        format!("{discrepancies} route discrepancies / 1000, {ray_bad} ray disagreements / 100"),
    ))
}

fn random_equation(rng: &mut impl Rng, op: OperatorSpec, shape: Vec<usize>) -> Result<Equation> {
    let n = op.n;
    let geom = Arc::new(GridGeometry::new(n, shape)?);
    let mut diag = Vec::with_capacity(n);
    for _ in 0..n {
        diag.push(rng.random_range(1.0..2.0));
    }
    let omega = HermitianField::constant(geom.clone(), &CMatrix::from_real_diagonal(&diag))?;
    let chi = HermitianField::identity(geom);
    Equation::new(op, omega, chi)
}

fn admissible_state(eq: &Equation, max_mode: i32, rng: &mut impl Rng) -> ScalarField {
    let g = eq.geometry();
    let mut amp = 0.5;
    loop {
        let u = random_band_limited(g, max_mode, rng).map(|v| amp * v);
        if eq.is_admissible(&u) {
            return u;
        }
        amp *= 0.5;
    }
}

fn linearization(opts: &SuiteOptions) -> Verdict {
    let mut rng = rng(opts, 40);
    let cases = [
        (OperatorSpec::quotient(2, 2, 1)?, vec![8, 8, 8, 8], 3),
        (OperatorSpec::quotient(3, 2, 1)?, vec![4, 4, 4, 4, 4, 4], 1),
        (OperatorSpec::dhym(2, DhymBranch::Supercritical)?, vec![16, 16, 1, 1], 3),
        (OperatorSpec::quotient(1, 1, 0)?, vec![32, 1], 3),
    ];
    let mut worst: f64 = 0.0;
    for (op, shape, modes) in cases {
        let eq = random_equation(&mut rng, op, shape)?;
        for _ in 0..3 {
            let u = admissible_state(&eq, modes, &mut rng);
            let psi = random_band_limited(eq.geometry(), modes, &mut rng);
            worst = worst.max(fd_directional_check(&eq, &u, &psi, 1e-6)?);
        }
    }
    Ok((worst <= 1e-5, format!("worst directional error {worst:.2e}")))
}

fn kernel(opts: &SuiteOptions) -> Verdict {
    let mut rng = rng(opts, 50);
    let cases = [
        (OperatorSpec::quotient(1, 1, 0)?, vec![32, 1]),
        (OperatorSpec::quotient(2, 2, 1)?, vec![16, 1, 1, 1]),
        (OperatorSpec::dhym(2, DhymBranch::Supercritical)?, vec![12, 12, 1, 1]),
        (OperatorSpec::quotient(2, 2, 0)?, vec![8, 8, 1, 1]),
    ];
    let mut nonzero = 0;
    let mut xi_min = f64::INFINITY;
    for i in 0..10 {
        let (op, shape) = cases[i % cases.len()].clone();
        let eq = random_equation(&mut rng, op, shape)?;
        let u = admissible_state(&eq, 3, &mut rng);
        let one = ScalarField::constant(eq.geometry().clone(), 1.0);
        if linearized_apply(&eq, &u, &one)?.values().iter().any(|&v| v != 0.0) {
            nonzero += 1;
        }
        let states = eq.point_states(&u)?;
        xi_min = xi_min.min(adjoint_kernel(&eq, &states)?.min());
    }
    Ok((
        nonzero == 0 && xi_min > 0.0,
        format!("{nonzero} states with L(1) != 0; min adjoint kernel entry {xi_min:.3e}"),
    ))
}

fn solve_shipped(name: &str) -> Result<(ProblemConfig, crate::config::Problem, PathOutcome)> {
    let cfg = shipped_problem(name)?;
    let problem = cfg.build()?;
    let out = run_path(&problem.eq, &problem.h, &problem.u_bar, &problem.u_sub, &cfg.path)?;
    Ok((cfg, problem, out))
}

fn stationary() -> Verdict {
    let (_, _, out) = solve_shipped("stationary")?;
    let worst_c = out.log.iter().map(|r| r.c_t.abs()).fold(0.0, f64::max);
    let phi = out.state.phi.norm_inf();
    Ok((
        worst_c <= 1e-14 && phi <= 1e-14,
        format!("max |c_t| {worst_c:.1e}, |phi| {phi:.1e} over {} steps", out.log.len()),
    ))
}

fn monitors() -> Verdict {
    let mut notes = Vec::new();
    let mut breaches = 0;
    for (name, _) in SHIPPED {
        match solve_shipped(name) {
            Ok((_, _, out)) => {
                let b: usize = out.log.iter().map(|r| r.breaches(out.delta).len()).sum();
                breaches += b;
                notes.push(format!("{name}: {} steps, {b} breaches", out.log.len()));
            }
            Err(Error::MonitorBreach { t, monitor, .. }) => {
                breaches += 1;
                notes.push(format!("{name}: breach at t = {t}: {monitor}"));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((breaches == 0, notes.join("; ")))
}

/// Solves a manufactured config at `factor` times its resolution and
/// returns (Δx, L∞ error modulo constants, |c₁ − c_expected|).
pub fn manufactured_error(cfg: &ProblemConfig, factor: usize) -> Result<(f64, f64, f64)> {
    let mut cfg = cfg.clone();
    let g = &cfg.geometry;
    let shape: Vec<usize> = g.shape().iter().map(|&s| if s > 1 { s * factor } else { 1 }).collect();
    cfg.geometry = Arc::new(GridGeometry::with_z_tensor(g.n(), shape, g.z_tensor().to_vec())?);
    let problem = cfg.build()?;
    let m = problem
        .manufactured
        .as_ref()
        .ok_or_else(|| Error::InvalidField("not a manufactured problem".into()))?;
    let out = run_path(&problem.eq, &problem.h, &problem.u_bar, &problem.u_sub, &cfg.path)?;
    let u = problem.u_bar.add_scaled(&out.state.phi, 1.0);
    let diff = u.zip_map(&m.u_star, |a, b| a - b);
    let mean = diff.mean();
    let geom = &cfg.geometry;
    let dx = geom.active_coords().map(|c| geom.spacing()[c]).fold(0.0, f64::max);
    Ok((dx, diff.map(|v| v - mean).norm_inf(), (out.state.c - m.c_expected).abs()))
}

fn manufactured() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for name in ["quotient_n1_manufactured", "dhym_n2_manufactured"] {
        let cfg = shipped_problem(name)?;
        let (dx, e1, c_err) = manufactured_error(&cfg, 1)?;
        let (_, e2, _) = manufactured_error(&cfg, 2)?;
        let ratio = e1 / e2;
        let pass = e1 <= 5.0 * dx * dx && (3.0..=5.0).contains(&ratio) && c_err <= 1e-6 + 5.0 * dx * dx;
        ok &= pass;
        notes.push(format!("{name}: error {e1:.2e} (bound {:.2e}), ratio {ratio:.3}, |c - c*| {c_err:.1e}", 5.0 * dx * dx));
    }
    Ok((ok, notes.join("; ")))
}

fn attained_slope() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, _) in SHIPPED {
        let (cfg, problem, out) = solve_shipped(name)?;
        let trial_cfg = cfg.trials.unwrap_or(TrialConfig {
            count: 100,
            ..TrialConfig::default()
        });
        let trials = random_trials(&problem.eq, &trial_cfg);
        let report = verify_attained_slope(
            &problem.eq,
            &problem.u_bar,
            &problem.h,
            &out.state,
            &trials,
            cfg.path.newton_tol,
            1e-6 + cfg.oscillation_allowance,
        )?;
        let pass = report.oscillation <= 1e-6 + cfg.oscillation_allowance && report.beaten_by.is_empty();
        ok &= pass;
        notes.push(format!(
            "{name}: oscillation {:.1e}, {} of {} trials beat c1",
            report.oscillation,
            report.beaten_by.len(),
            report.trial_values.len()
        ));
    }
    Ok((ok, notes.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_rules() {
        assert_eq!(select(None).unwrap().len(), CHECKS.len());
        assert!(select(Some(&[])).is_err());
        assert!(select(Some(&[" ".to_string()])).is_err());
        assert!(select(Some(&["nope".to_string()])).is_err());
        assert_eq!(select(Some(&["kernel".to_string()])).unwrap(), vec!["kernel"]);
    }

    #[test]
    fn shipped_problems_parse() {
        for (name, _) in SHIPPED {
            shipped_problem(name).unwrap().build().unwrap();
        }
    }

    #[test]
    fn corrupted_gradient_fails() {
        let opts = SuiteOptions {
            corrupt_gradient: true,
            ..SuiteOptions::default()
        };
        assert!(!run_check("operators", &opts).passed);
        assert!(run_check("operators", &SuiteOptions::default()).passed);
    }
}
