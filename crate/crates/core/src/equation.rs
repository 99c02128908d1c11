//! Pointwise evaluation of F(u) = f(λ(ω_u)) on a grid.

use crate::error::{Error, Result};
use crate::grid::{check_metric, check_same, GridGeometry, HermitianField, ScalarField};
use crate::linalg::{pencil_eigen, PencilEigen};
use crate::symmetric::OperatorSpec;
use rayon::prelude::*;
use std::sync::Arc;

/// An operator together with its background forms ω and χ.
#[derive(Debug, Clone)]
pub struct Equation {
    pub op: OperatorSpec,
    pub omega: HermitianField,
    pub chi: HermitianField,
}

/// Everything the solver needs at one grid point.
#[derive(Debug, Clone)]
pub struct PointState {
    pub lambda: Vec<f64>,
    pub value: f64,
    pub cone_margin: f64,
    pub eigen: PencilEigen,
}

impl Equation {
    pub fn new(op: OperatorSpec, omega: HermitianField, chi: HermitianField) -> Result<Self> {
        check_same(omega.geometry(), chi.geometry())?;
        if op.n != omega.geometry().n() {
            return Err(Error::InvalidOperator(format!(
                "operator dimension {} does not match geometry n = {}",
                op.n,
                omega.geometry().n()
            )));
        }
        check_metric(&chi)?;
        Ok(Self { op, omega, chi })
    }

    pub fn geometry(&self) -> &Arc<GridGeometry> {
        self.omega.geometry()
    }

    fn pencil_at(&self, u: &[f64], p: usize) -> Result<PencilEigen> {
        let geom = self.geometry();
        let mut g = self.omega.matrix(p).add(&geom.potential_form(u, p));
        g.symmetrize();
        pencil_eigen(&g, &self.chi.matrix(p)).map_err(|pivot| Error::InvalidMetric { point: p, pivot })
    }

    /// λ(ω_u) at each point, without any cone check.
    pub fn eigenvalues(&self, u: &ScalarField) -> Result<Vec<Vec<f64>>> {
        check_same(u.geometry(), self.geometry())?;
        let vals = u.values();
        (0..u.len())
            .into_par_iter()
            .map(|p| self.pencil_at(vals, p).map(|e| e.values))
            .collect()
    }

    /// λ(ω_u) at each point, failing at the first point outside the cone.
    pub fn admissible_eigenvalues(&self, u: &ScalarField) -> Result<Vec<Vec<f64>>> {
        let lambdas = self.eigenvalues(u)?;
        self.check_cone(&lambdas)?;
        Ok(lambdas)
    }

    pub fn check_cone(&self, lambdas: &[Vec<f64>]) -> Result<()> {
        match lambdas.iter().position(|l| !self.op.cone.contains(l)) {
            None => Ok(()),
            Some(p) => Err(Error::ConeViolation {
                point: p,
                lambda: lambdas[p].clone(),
                cone: self.op.cone.to_string(),
            }),
        }
    }

    /// Full per-point state; fails on the first cone violation.
    pub fn point_states(&self, u: &ScalarField) -> Result<Vec<PointState>> {
        check_same(u.geometry(), self.geometry())?;
        let vals = u.values();
        let states: Vec<Result<PointState>> = (0..u.len())
            .into_par_iter()
            .map(|p| {
                let eigen = self.pencil_at(vals, p)?;
                let lambda = eigen.values.clone();
                if !self.op.cone.contains(&lambda) {
                    return Err(Error::ConeViolation {
                        point: p,
                        lambda,
                        cone: self.op.cone.to_string(),
                    });
                }
                Ok(PointState {
                    value: self.op.eval_unchecked(&lambda),
                    cone_margin: self.op.cone.margin(&lambda),
                    lambda,
                    eigen,
                })
            })
            .collect();
        states.into_iter().collect()
    }

    /// F(u) = f(λ(ω_u)).
    pub fn evaluate(&self, u: &ScalarField) -> Result<ScalarField> {
        let lambdas = self.admissible_eigenvalues(u)?;
        let values = lambdas.iter().map(|l| self.op.eval_unchecked(l)).collect();
        ScalarField::new(u.geometry().clone(), values)
    }

    /// F(ω), i.e. F at the zero potential.
    pub fn evaluate_background(&self) -> Result<ScalarField> {
        self.evaluate(&ScalarField::zeros(self.geometry().clone()))
    }

    /// Whether ω_u has cone eigenvalues at every point.
    pub fn is_admissible(&self, u: &ScalarField) -> bool {
        self.eigenvalues(u)
            .map(|ls| ls.iter().all(|l| self.op.cone.contains(l)))
            .unwrap_or(false)
    }

    /// Quadrature weights: cell volume times det χ at each point.
    pub fn volume_weights(&self) -> Vec<f64> {
        let cell = self.geometry().cell_volume();
        (0..self.chi.len())
            .map(|p| {
                let l = crate::linalg::cholesky(&self.chi.matrix(p)).expect("metric checked at construction");
                let det: f64 = (0..l.dim()).map(|i| l[(i, i)].re).product();
                cell * det * det
            })
            .collect()
    }
}
