//! Solver for eigenvalue-type fully nonlinear elliptic equations
//! f(λ(ω_u)) = h + σ on flat tori, where λ are the eigenvalues of
//! ω_u = ω + √−1∂∂̄u + Z(∂u) with respect to a background metric χ.
//!
//! The crate provides
//!
//! * [`grid`]: periodic grids, central-difference (1,1)-forms and the
//!   generalized eigenvalues λ(ω_u);
//! * [`symmetric`]: σ_k, Gårding cones, the Hessian-quotient and phase
//!   operators with gradients and f_∞;
//! * [`subsolution`]: C-subsolution tests and sub-slope brackets;
//! * [`continuity`]: the continuation solver with its path monitors;
//! * [`verification`]: independent oracles used by tests and `subslope verify`.

// `!(a <= b)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod continuity;
pub mod equation;
pub mod error;
pub mod expr;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod subsolution;
pub mod suite;
pub mod symmetric;
pub mod verification;

pub use continuity::{run_path, ContinuityState, PathConfig, PathOutcome};
pub use equation::Equation;
pub use error::{Error, Result};
pub use expr::TrigSeries;
pub use grid::{GridGeometry, HermitianField, ScalarField};
pub use symmetric::{ConeSpec, DhymBranch, OperatorKind, OperatorSpec};
