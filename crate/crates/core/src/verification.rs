//! Independent oracles: manufactured problems, finite-difference checks,
//! closed-form 2×2 eigenvalues, numeric f_∞ limits and ray searches.
//!
//! Nothing here calls into the solver; solver tests consume these outputs.

use crate::continuity::linearized_apply;
use crate::equation::Equation;
use crate::error::{Error, Result};
use crate::expr::TrigSeries;
use crate::grid::ScalarField;
use crate::linalg::{pencil_eigen, CMatrix};
use crate::symmetric::{ConeKind, OperatorSpec};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    /// h = f(λ(ω_{u*})) − c with λ from exact derivatives of u*.
    pub h: ScalarField,
    pub c_expected: f64,
    pub u_star: ScalarField,
}

/// Builds h from the exact (analytic) derivatives of `u_star`, so a
/// discrete solve recovers u* only up to the truncation error.
pub fn manufactured_problem(eq: &Equation, u_star: &TrigSeries, c: f64) -> Result<ManufacturedProblem> {
    let geom = eq.geometry();
    let inadmissible = |e: Error| Error::InadmissibleManufactured(Box::new(e));
    u_star.check_geometry(geom).map_err(inadmissible)?;
    let dims = geom.real_dims();
    let mut h = Vec::with_capacity(geom.len());
    for p in 0..geom.len() {
        let x = geom.point(p);
        let mut form = geom.hessian_form(&u_star.hessian(&x, dims));
        if geom.has_z() {
            form = form.add(&geom.gradient_form(&u_star.gradient(&x, dims)));
        }
        let mut g = eq.omega.matrix(p).add(&form);
        g.symmetrize();
        let lambda = pencil_eigen(&g, &eq.chi.matrix(p))
            .map_err(|pivot| inadmissible(Error::InvalidMetric { point: p, pivot }))?
            .values;
        if !eq.op.cone.contains(&lambda) {
            return Err(inadmissible(Error::ConeViolation {
                point: p,
                lambda,
                cone: eq.op.cone.to_string(),
            }));
        }
        h.push(eq.op.eval_unchecked(&lambda) - c);
    }
    Ok(ManufacturedProblem {
        h: ScalarField::new(geom.clone(), h)?,
        c_expected: c,
        u_star: u_star.sample(geom)?,
    })
}

/// ‖[F(u+sψ) − F(u−sψ)]/(2s) − L(ψ)‖∞ / (1 + ‖L(ψ)‖∞). Halves s up to
/// three times if a perturbed potential leaves the cone.
pub fn fd_directional_check(eq: &Equation, base_u: &ScalarField, psi: &ScalarField, s: f64) -> Result<f64> {
    let lin = linearized_apply(eq, base_u, psi)?;
    let mut step = s;
    let mut last_err = None;
    for _ in 0..4 {
        let plus = eq.evaluate(&base_u.add_scaled(psi, step));
        let minus = eq.evaluate(&base_u.add_scaled(psi, -step));
        match (plus, minus) {
            (Ok(fp), Ok(fm)) => {
                let fd = fp.zip_map(&fm, |a, b| (a - b) / (2.0 * step));
                let diff = fd.zip_map(&lin, |a, b| a - b).norm_inf();
                return Ok(diff / (1.0 + lin.norm_inf()));
            }
            (Err(e), _) | (_, Err(e)) => {
                last_err = Some(e);
                step *= 0.5;
            }
        }
    }
    Err(last_err.expect("loop ran"))
}

/// Roots of det(g̃ − λχ) = 0 for 2 × 2 Hermitian g̃ and positive χ,
/// sorted descending.
pub fn eigen_oracle_2x2(gt: &CMatrix, chi: &CMatrix) -> (f64, f64) {
    let (a11, a22, a12) = (gt[(0, 0)].re, gt[(1, 1)].re, gt[(0, 1)]);
    let (b11, b22, b12) = (chi[(0, 0)].re, chi[(1, 1)].re, chi[(0, 1)]);
    let qa = b11 * b22 - b12.norm_sqr();
    let qb = -(a11 * b22 + a22 * b11) + 2.0 * (a12 * b12.conj()).re;
    let qc = a11 * a22 - a12.norm_sqr();
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    let (r1, r2) = if qb == 0.0 && qc == 0.0 {
        (0.0, 0.0)
    } else {
        let q = -0.5 * (qb + qb.signum() * disc);
        if q == 0.0 {
            let r = -qb / (2.0 * qa);
            (r, r)
        } else {
            (q / qa, qc / q)
        }
    };
    if r1 >= r2 {
        (r1, r2)
    } else {
        (r2, r1)
    }
}

pub const DEFAULT_R_LIST: [f64; 4] = [1e2, 1e4, 1e6, 1e8];

/// minᵢ f(λ with λᵢ := R) for each R (an entry already above R is kept).
pub fn f_infinity_numeric(op: &OperatorSpec, lambda: &[f64], r_list: &[f64]) -> Result<Vec<f64>> {
    op.ensure_in_cone(lambda)?;
    r_list
        .iter()
        .map(|&r| {
            (0..lambda.len())
                .map(|i| {
                    let mut x = lambda.to_vec();
                    x[i] = r.max(x[i]);
                    op.f_eval(&x)
                })
                .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayVerdict {
    Bounded,
    Unbounded,
    Inconclusive,
}

const RAY_T_MAX: f64 = 1e8;
const RAY_MARGIN: f64 = 1e-6;

/// Probes {λ : f(λ) = h, λ − λ_sub ∈ Γₙ} along the rays λ_sub + t·eᵢ:
/// bounded iff every ray reaches the level h at finite t.
pub fn ray_boundedness(op: &OperatorSpec, lambda_sub: &[f64], h: f64) -> Result<RayVerdict> {
    let f0 = op.f_eval(lambda_sub)?;
    if f0 >= h {
        return Ok(RayVerdict::Bounded);
    }
    let mut inconclusive = false;
    for i in 0..lambda_sub.len() {
        let along = |t: f64| {
            let mut x = lambda_sub.to_vec();
            x[i] += t;
            op.eval_unchecked(&x)
        };
        let mut hi = 1.0;
        while hi < RAY_T_MAX && along(hi) < h {
            hi *= 2.0;
        }
        let hi = hi.min(RAY_T_MAX);
        let f_hi = along(hi);
        if f_hi >= h {
            // bisect to locate the crossing; it exists, so the ray is bounded
            let mut lo = 0.0;
            let mut up = hi;
            for _ in 0..200 {
                let mid = 0.5 * (lo + up);
                if along(mid) < h {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
            debug_assert!(along(up) >= h);
        } else if f_hi < h - RAY_MARGIN {
            return Ok(RayVerdict::Unbounded);
        } else {
            inconclusive = true;
        }
    }
    Ok(if inconclusive {
        RayVerdict::Inconclusive
    } else {
        RayVerdict::Bounded
    })
}

/// Rejection-samples a point of the operator's cone.
pub fn sample_cone_point(op: &OperatorSpec, rng: &mut impl Rng) -> Vec<f64> {
    let (lo, hi) = match &op.cone.kind {
        ConeKind::DhymBranch(_) => (-3.0, 6.0),
        _ => (-1.0, 4.0),
    };
    loop {
        let lambda: Vec<f64> = (0..op.n).map(|_| rng.random_range(lo..hi)).collect();
        if op.cone.contains(&lambda) {
            return lambda;
        }
    }
}

/// Sorts descending.
pub fn sorted_desc(mut lambda: Vec<f64>) -> Vec<f64> {
    lambda.sort_by(|a, b| b.total_cmp(a));
    lambda
}

/// Relative error of `f_grad` against central finite differences with
/// step 1e-6·(1 + |λ|).
pub fn fd_gradient_error(op: &OperatorSpec, lambda: &[f64], grad: &[f64]) -> f64 {
    let scale = 1.0 + lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    let h = 1e-6 * scale;
    let mut worst: f64 = 0.0;
    for i in 0..lambda.len() {
        let mut xp = lambda.to_vec();
        let mut xm = lambda.to_vec();
        xp[i] += h;
        xm[i] -= h;
        if !(op.cone.contains(&xp) && op.cone.contains(&xm)) {
            continue;
        }
        let fd = (op.eval_unchecked(&xp) - op.eval_unchecked(&xm)) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1e-300).max(fd.abs()));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridGeometry, HermitianField};
    use crate::symmetric::DhymBranch;
    use num_complex::Complex64;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn eigen_oracle_examples() {
        let (a, b) = eigen_oracle_2x2(&CMatrix::from_real_diagonal(&[2.0, 3.0]), &CMatrix::identity(2));
        assert_eq!((a, b), (3.0, 2.0));
        let (a, b) = eigen_oracle_2x2(
            &CMatrix::from_real_rows(2, &[2.0, 1.0, 1.0, 2.0]),
            &CMatrix::from_real_diagonal(&[2.0, 1.0]),
        );
        let s3 = 3f64.sqrt();
        assert!((a - (3.0 + s3) / 2.0).abs() < 1e-14);
        assert!((b - (3.0 - s3) / 2.0).abs() < 1e-14);
        let chi = CMatrix::from_rows(
            2,
            vec![
                Complex64::new(2.0, 0.0),
                Complex64::new(0.3, -0.2),
                Complex64::new(0.3, 0.2),
                Complex64::new(1.0, 0.0),
            ],
        );
        let (a, b) = eigen_oracle_2x2(&chi, &chi);
        assert!((a - 1.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-7);
    }

    #[test]
    fn numeric_f_infinity_examples() {
        let d = OperatorSpec::dhym(2, DhymBranch::Supercritical).unwrap();
        let v = f_infinity_numeric(&d, &[1.0, 1.0], &[1e8]).unwrap()[0];
        assert!(v < 0.75 * PI && 0.75 * PI - v < 2e-8);

        let q31 = OperatorSpec::quotient(3, 3, 1).unwrap();
        let v = f_infinity_numeric(&q31, &[2.0, 2.0, 2.0], &[1e8]).unwrap()[0];
        assert!((v - 12f64.ln()).abs() < 1e-7);

        let q20 = OperatorSpec::quotient(2, 2, 0).unwrap();
        let vals = f_infinity_numeric(&q20, &[1.0, 1.0], &DEFAULT_R_LIST).unwrap();
        for (v, r) in vals.iter().zip(DEFAULT_R_LIST) {
            assert!(*v >= r.ln() - 1.0);
        }
    }

    #[test]
    fn manufactured_zero_perturbation() {
        let g = Arc::new(GridGeometry::new(1, vec![16, 1]).unwrap());
        let op = OperatorSpec::quotient(1, 1, 0).unwrap();
        let omega = HermitianField::constant(g.clone(), &CMatrix::from_real_diagonal(&[2.0])).unwrap();
        let eq = Equation::new(op, omega, HermitianField::identity(g)).unwrap();
        let m = manufactured_problem(&eq, &TrigSeries::zero(), 0.0).unwrap();
        assert!(m.h.values().iter().all(|&v| (v - 2f64.ln()).abs() < 1e-15));
    }

    #[test]
    fn manufactured_quotient_matches_analytic() {
        let g = Arc::new(GridGeometry::new(1, vec![32, 1]).unwrap());
        let op = OperatorSpec::quotient(1, 1, 0).unwrap();
        let eq = Equation::new(op, HermitianField::identity(g.clone()), HermitianField::identity(g.clone())).unwrap();
        let m = manufactured_problem(&eq, &TrigSeries::parse("0.5*cos(x1)").unwrap(), 0.0).unwrap();
        for p in 0..g.len() {
            let x = g.point(p)[0];
            assert!((m.h.values()[p] - (1.0 - x.cos() / 8.0).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn manufactured_dhym_matches_analytic() {
        let g = Arc::new(GridGeometry::new(2, vec![16, 16, 1, 1]).unwrap());
        let op = OperatorSpec::dhym(2, DhymBranch::Supercritical).unwrap();
        let eq = Equation::new(op, HermitianField::identity(g.clone()), HermitianField::identity(g.clone())).unwrap();
        let m = manufactured_problem(&eq, &TrigSeries::parse("0.3*cos(x1)").unwrap(), 0.0).unwrap();
        for p in 0..g.len() {
            let x = g.point(p)[0];
            let expect = (1.0 - 0.075 * x.cos()).atan() + 1f64.atan();
            assert!((m.h.values()[p] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn manufactured_outside_cone_is_rejected() {
        let g = Arc::new(GridGeometry::new(1, vec![16, 1]).unwrap());
        let op = OperatorSpec::quotient(1, 1, 0).unwrap();
        let eq = Equation::new(op, HermitianField::identity(g.clone()), HermitianField::identity(g)).unwrap();
        let err = manufactured_problem(&eq, &TrigSeries::parse("10*cos(x1)").unwrap(), 0.0).unwrap_err();
        assert!(matches!(err, Error::InadmissibleManufactured(_)));
    }

    #[test]
    fn ray_search_examples() {
        let q31 = OperatorSpec::quotient(3, 3, 1).unwrap();
        let lam = [2.0, 2.0, 2.0];
        assert_eq!(ray_boundedness(&q31, &lam, 12f64.ln() - 0.1).unwrap(), RayVerdict::Bounded);
        assert_eq!(ray_boundedness(&q31, &lam, 12f64.ln() + 0.1).unwrap(), RayVerdict::Unbounded);
        let q20 = OperatorSpec::quotient(2, 2, 0).unwrap();
        assert_eq!(ray_boundedness(&q20, &[1.0, 1.0], 10.0).unwrap(), RayVerdict::Bounded);
    }
}
