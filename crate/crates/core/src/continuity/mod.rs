//! Continuity method for F(ū + φ_t) = h_t + c_t, h_t = (1 − t)h̄ + t·h.
//!
//! The unknown pair (φ_t, c_t) is advanced in t by damped Newton steps on
//! the bordered system [L, −1; mean, 0]. Every accepted step is checked
//! against the bounds the existence argument provides:
//!
//! * c_t ≤ t·c̄, where c̄ = max_M (F(ū) − h);
//! * c_t ≥ inf_M F(ω) − sup_M h_t;
//! * min_M [f_∞(λ(ω_{u_sub})) − h_t − c_t] ≥ δ.
//!
//! A breach aborts the march with the full monitor log.

mod linear;

pub use linear::{gmres, BorderedSystem, LinearSolution, LinearizedOperator, Orientation, LINEAR_RTOL};

use crate::equation::{Equation, PointState};
use crate::error::{Error, Result};
use crate::grid::{check_same, ScalarField};
use crate::subsolution::{is_c_subsolution, max_excess};
use std::fmt::Write as _;

/// Slack allowed in every path monitor.
pub const MONITOR_SLACK: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PathConfig {
    pub t_step_init: f64,
    pub t_step_min: f64,
    /// L∞ residual at which Newton stops.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Backtracking factor for damped updates.
    pub damping: f64,
    /// Smallest subsolution margin δ the caller requires.
    pub delta_margin: f64,
    /// Extract the adjoint kernel ξ at every accepted step.
    pub track_adjoint_kernel: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            t_step_init: 0.1,
            t_step_min: 1e-4,
            newton_tol: 1e-10,
            max_newton: 30,
            damping: 0.5,
            delta_margin: 0.0,
            track_adjoint_kernel: true,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.t_step_min
            && self.t_step_min <= self.t_step_init
            && self.t_step_init <= 1.0
            && self.newton_tol > 0.0
            && self.max_newton > 0
            && self.damping > 0.0
            && self.damping < 1.0
            && self.delta_margin >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config {
                key: None,
                line: None,
                message: format!("invalid path configuration {self:?}"),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub c_bar: f64,
    pub residual: f64,
    pub min_cone_margin: f64,
    pub subsolution_margin: f64,
    /// min ξ of the normalized adjoint kernel; NaN when not extracted.
    pub xi_min: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuityState {
    pub t: f64,
    /// Mean-zero correction to ū.
    pub phi: ScalarField,
    pub c: f64,
    pub newton_iters: usize,
    pub diagnostics: Diagnostics,
}

impl ContinuityState {
    /// φ shifted so that sup φ = 0.
    pub fn sup_normalized_phi(&self) -> ScalarField {
        let m = self.phi.max();
        self.phi.shifted(-m)
    }
}

/// One accepted continuation step.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRecord {
    pub t: f64,
    pub c_t: f64,
    pub residual: f64,
    pub newton_iters: usize,
    pub min_cone_margin: f64,
    pub subsolution_margin: f64,
    /// t·c̄
    pub c_upper_bound: f64,
    /// inf F(ω) − sup h_t (−∞ when ω itself is outside the cone)
    pub c_lower_bound: f64,
    pub xi_min: f64,
}

impl MonitorRecord {
    pub const CSV_HEADER: &'static str =
        "t,c_t,residual,newton_iters,min_cone_margin,subsolution_margin,c_upper_bound,c_lower_bound,xi_min";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.t,
            self.c_t,
            self.residual,
            self.newton_iters,
            self.min_cone_margin,
            self.subsolution_margin,
            self.c_upper_bound,
            self.c_lower_bound,
            self.xi_min
        )
    }

    /// Names of the monitors this record breaches, given the recorded δ.
    pub fn breaches(&self, delta: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.c_t <= self.c_upper_bound + MONITOR_SLACK) {
            out.push(format!("c_t = {:e} exceeds t·c̄ = {:e}", self.c_t, self.c_upper_bound));
        }
        if !(self.c_t >= self.c_lower_bound - MONITOR_SLACK) {
            out.push(format!("c_t = {:e} below lower bound {:e}", self.c_t, self.c_lower_bound));
        }
        let margin_ok = if delta.is_infinite() {
            self.subsolution_margin.is_infinite()
        } else {
            self.subsolution_margin >= delta - MONITOR_SLACK
        };
        if !margin_ok {
            out.push(format!("subsolution margin {:e} below δ = {:e}", self.subsolution_margin, delta));
        }
        if !(self.min_cone_margin > 0.0) {
            out.push(format!("cone margin {:e} not positive", self.min_cone_margin));
        }
        if self.xi_min.is_finite() && !(self.xi_min > 0.0) {
            out.push(format!("adjoint kernel not positive (min ξ = {:e})", self.xi_min));
        }
        out
    }
}

pub fn monitor_csv(log: &[MonitorRecord]) -> String {
    let mut s = String::from(MonitorRecord::CSV_HEADER);
    s.push('\n');
    for r in log {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

/// L(ψ) at the potential u.
pub fn linearized_apply(eq: &Equation, u: &ScalarField, psi: &ScalarField) -> Result<ScalarField> {
    check_same(psi.geometry(), eq.geometry())?;
    let states = eq.point_states(u)?;
    let lin = LinearizedOperator::new(&eq.op, eq.geometry(), &states);
    Ok(lin.apply_field(psi))
}

/// Data fixed along the whole path.
#[derive(Debug, Clone)]
pub struct PathProblem<'a> {
    pub eq: &'a Equation,
    pub h: &'a ScalarField,
    pub u_bar: &'a ScalarField,
    /// F(ū)
    pub h_bar: ScalarField,
}

impl<'a> PathProblem<'a> {
    pub fn new(eq: &'a Equation, h: &'a ScalarField, u_bar: &'a ScalarField) -> Result<Self> {
        check_same(h.geometry(), eq.geometry())?;
        check_same(u_bar.geometry(), eq.geometry())?;
        let h_bar = eq.evaluate(u_bar)?;
        Ok(Self { eq, h, u_bar, h_bar })
    }

    /// h_t = (1 − t)h̄ + t·h
    pub fn h_t(&self, t: f64) -> ScalarField {
        self.h_bar.zip_map(self.h, |hb, h| (1.0 - t) * hb + t * h)
    }

    pub fn potential(&self, phi: &ScalarField) -> ScalarField {
        self.u_bar.add_scaled(phi, 1.0)
    }

    /// Per-point states and the residual F(ū + φ) − h_t − c.
    fn residual(&self, phi: &ScalarField, c: f64, h_t: &ScalarField) -> Result<(Vec<PointState>, Vec<f64>)> {
        let states = self.eq.point_states(&self.potential(phi))?;
        let r = states
            .iter()
            .zip(h_t.values())
            .map(|(s, h)| s.value - h - c)
            .collect();
        Ok((states, r))
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves L(δφ) − δc = −r with mean(δφ) = 0 at the given states.
pub fn newton_step(
    eq: &Equation,
    states: &[PointState],
    residual: &[f64],
) -> Result<(ScalarField, f64)> {
    let geom = eq.geometry();
    if norm_inf(residual) == 0.0 {
        return Ok((ScalarField::zeros(geom.clone()), 0.0));
    }
    let lin = LinearizedOperator::new(&eq.op, geom, states);
    let n = geom.len();
    let system = BorderedSystem::new(&lin, Orientation::Direct, -1.0, 1.0 / n as f64);
    let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
    let sol = system.solve(&rhs, 0.0, LINEAR_RTOL)?;
    // constants are in the kernel of L, so re-centering is exact
    let mean = sol.x.iter().sum::<f64>() / n as f64;
    let dphi = sol.x.iter().map(|v| v - mean).collect();
    Ok((ScalarField::new(geom.clone(), dphi)?, sol.mu))
}

/// Positive adjoint-kernel vector ξ of L: Lᵀ(Wξ) = 0 with weights W from
/// `Equation::volume_weights`, normalized to Σ ξ·w = 1.
pub fn adjoint_kernel(eq: &Equation, states: &[PointState]) -> Result<ScalarField> {
    let geom = eq.geometry();
    let lin = LinearizedOperator::new(&eq.op, geom, states);
    let system = BorderedSystem::new(&lin, Orientation::Transposed, 1.0, 1.0);
    let zeros = vec![0.0; geom.len()];
    let sol = system.solve(&zeros, 1.0, LINEAR_RTOL)?;
    let w = eq.volume_weights();
    let xi = sol.x.iter().zip(&w).map(|(eta, w)| eta / w).collect();
    ScalarField::new(geom.clone(), xi)
}

/// Outcome of one Newton solve at a fixed t.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub phi: ScalarField,
    pub c: f64,
    pub residual: f64,
    pub iterations: usize,
    pub min_cone_margin: f64,
    pub states: Vec<PointState>,
}

/// Damped Newton at fixed t from a warm start (φ₀, c₀).
pub fn solve_at_t(
    problem: &PathProblem<'_>,
    t: f64,
    phi0: &ScalarField,
    c0: f64,
    cfg: &PathConfig,
) -> Result<SolveReport> {
    let h_t = problem.h_t(t);
    let mut phi = phi0.clone();
    let mut c = c0;
    let (mut states, mut r) = problem.residual(&phi, c, &h_t)?;
    let mut res = norm_inf(&r);
    let mut iterations = 0;
    while res > cfg.newton_tol {
        if iterations >= cfg.max_newton {
            return Err(Error::StepFailure {
                t,
                residual: res,
                iterations,
            });
        }
        iterations += 1;
        let (dphi, dc) = newton_step(problem.eq, &states, &r)?;
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-6 {
            let trial_phi = phi.add_scaled(&dphi, alpha);
            let trial_c = c + alpha * dc;
            if let Ok((s, tr)) = problem.residual(&trial_phi, trial_c, &h_t) {
                let tres = norm_inf(&tr);
                if tres < res || tres <= cfg.newton_tol {
                    accepted = Some((trial_phi, trial_c, s, tr, tres));
                    break;
                }
            }
            alpha *= cfg.damping;
        }
        match accepted {
            Some((p, cc, s, rr, rres)) => {
                phi = p;
                c = cc;
                states = s;
                r = rr;
                res = rres;
            }
            None => {
                return Err(Error::StepFailure {
                    t,
                    residual: res,
                    iterations,
                })
            }
        }
    }
    let min_cone_margin = states.iter().map(|s| s.cone_margin).fold(f64::INFINITY, f64::min);
    Ok(SolveReport {
        phi,
        c,
        residual: res,
        iterations,
        min_cone_margin,
        states,
    })
}

#[derive(Debug, Clone)]
pub struct PathOutcome {
    pub state: ContinuityState,
    pub log: Vec<MonitorRecord>,
    pub c_bar: f64,
    pub delta: f64,
    /// inf F(ω) − sup h (−∞ when ω is outside the cone)
    pub sigma_lower: f64,
}

impl PathOutcome {
    pub fn monitor_csv(&self) -> String {
        monitor_csv(&self.log)
    }
}

/// Marches t from 0 to 1 starting at ū = `u_bar_start`, with `u_sub` as
/// the C-subsolution that certifies the path stays solvable.
pub fn run_path(
    eq: &Equation,
    h: &ScalarField,
    u_bar_start: &ScalarField,
    u_sub: &ScalarField,
    cfg: &PathConfig,
) -> Result<PathOutcome> {
    cfg.validate()?;
    let geom = eq.geometry().clone();
    let problem = PathProblem::new(eq, h, u_bar_start)?;
    let c_bar = problem.h_bar.zip_map(h, |a, b| a - b).max();

    let sub_lambda = eq.admissible_eigenvalues(u_sub)?;
    let sub = is_c_subsolution(&eq.op, &sub_lambda, h, c_bar)?;
    if !sub.is_subsolution || sub.min_margin < cfg.delta_margin {
        return Err(Error::NotSubsolution {
            point: sub.argmin,
            margin: sub.min_margin,
        });
    }
    let delta = sub.min_margin;
    let f_inf_sub: Vec<f64> = sub_lambda.iter().map(|l| eq.op.f_infinity_unchecked(l)).collect();

    let inf_f_omega = eq.evaluate_background().map(|f| f.min()).unwrap_or(f64::NEG_INFINITY);
    let sigma_lower = inf_f_omega - h.max();

    let mut log = Vec::new();
    let record = |t: f64, rep: &SolveReport, log: &mut Vec<MonitorRecord>| -> Result<MonitorRecord> {
        let h_t = problem.h_t(t);
        let subsolution_margin = f_inf_sub
            .iter()
            .zip(h_t.values())
            .map(|(fi, ht)| fi - ht - rep.c)
            .fold(f64::INFINITY, f64::min);
        let xi_min = if cfg.track_adjoint_kernel {
            adjoint_kernel(eq, &rep.states)?.min()
        } else {
            f64::NAN
        };
        let rec = MonitorRecord {
            t,
            c_t: rep.c,
            residual: rep.residual,
            newton_iters: rep.iterations,
            min_cone_margin: rep.min_cone_margin,
            subsolution_margin,
            c_upper_bound: t * c_bar,
            c_lower_bound: inf_f_omega - h_t.max(),
            xi_min,
        };
        log.push(rec.clone());
        if let Some(monitor) = rec.breaches(delta).into_iter().next() {
            return Err(Error::MonitorBreach {
                t,
                monitor,
                log: log.clone(),
            });
        }
        Ok(rec)
    };

    let zero = ScalarField::zeros(geom.clone());
    let mut current = solve_at_t(&problem, 0.0, &zero, 0.0, cfg)?;
    let mut last = record(0.0, &current, &mut log)?;
    let mut t = 0.0;
    let mut dt = cfg.t_step_init;
    let mut streak = 0;
    while t < 1.0 {
        let t_next = if t + dt >= 1.0 - 1e-12 { 1.0 } else { t + dt };
        match solve_at_t(&problem, t_next, &current.phi, current.c, cfg) {
            Ok(rep) => {
                t = t_next;
                last = record(t, &rep, &mut log)?;
                current = rep;
                streak += 1;
                if streak >= 2 {
                    dt = (2.0 * dt).min(cfg.t_step_init);
                    streak = 0;
                }
            }
            Err(Error::StepFailure { .. } | Error::ConeViolation { .. } | Error::SingularLinearization { .. }) => {
                dt *= 0.5;
                streak = 0;
                if dt < cfg.t_step_min {
                    return Err(Error::PathFailure {
                        t,
                        reason: format!("step size fell below {:e}", cfg.t_step_min),
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }

    let state = ContinuityState {
        t,
        phi: current.phi,
        c: current.c,
        newton_iters: current.iterations,
        diagnostics: Diagnostics {
            c_bar,
            residual: last.residual,
            min_cone_margin: last.min_cone_margin,
            subsolution_margin: last.subsolution_margin,
            xi_min: last.xi_min,
        },
    };
    Ok(PathOutcome {
        state,
        log,
        c_bar,
        delta,
        sigma_lower,
    })
}

#[derive(Debug, Clone)]
pub struct AttainedSlopeReport {
    /// max − min of F(u) − h at the solution.
    pub oscillation: f64,
    pub oscillation_ok: bool,
    /// max_M (F(u′) − h) for each admissible trial.
    pub trial_values: Vec<f64>,
    /// Trials with max_M(F(u′) − h) < c₁ − 1e-6.
    pub beaten_by: Vec<usize>,
    pub skipped: usize,
}

impl AttainedSlopeReport {
    pub fn passed(&self) -> bool {
        self.oscillation_ok && self.beaten_by.is_empty()
    }
}

pub const TRIAL_SLACK: f64 = 1e-6;

/// Checks that the solution is a level set of F − h at c₁ and that no
/// trial potential achieves a smaller max_M (F(u′) − h).
pub fn verify_attained_slope(
    eq: &Equation,
    u_bar: &ScalarField,
    h: &ScalarField,
    state: &ContinuityState,
    trials: &[ScalarField],
    newton_tol: f64,
    discretization_allowance: f64,
) -> Result<AttainedSlopeReport> {
    let u = u_bar.add_scaled(&state.phi, 1.0);
    let excess = eq.evaluate(&u)?.zip_map(h, |a, b| a - b);
    let oscillation = excess.max() - excess.min();
    let mut trial_values = Vec::new();
    let mut beaten_by = Vec::new();
    let mut skipped = 0;
    for (i, trial) in trials.iter().enumerate() {
        match max_excess(eq, trial, h) {
            Ok(v) => {
                if v < state.c - TRIAL_SLACK {
                    beaten_by.push(i);
                }
                trial_values.push(v);
            }
            Err(Error::ConeViolation { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(AttainedSlopeReport {
        oscillation,
        oscillation_ok: oscillation <= 10.0 * newton_tol + discretization_allowance,
        trial_values,
        beaten_by,
        skipped,
    })
}
