//! Inverse optimization by KKT residual minimization: given observed
//! `(u_k, x_k)` and an objective template, find coefficients `c` and
//! per-observation multipliers `λ_k ≥ 0` that make every observation as
//! close to optimal as possible.

mod fit;
mod system;

pub use fit::{fit_objective, residual_norm, FitResult, NormKind};
pub use system::{assemble_kkt_system, ResidualSystem, StationarityRow, SINGULAR_TOL};

use crate::error::Result;
use crate::pop::{template_forward_solve, Constraints, Dataset, ObjectiveTemplate};

/// Assembles and solves in one step.
pub fn fit(t: &ObjectiveTemplate, constraints: &Constraints, data: &Dataset, kind: NormKind) -> Result<FitResult> {
    fit_objective(&assemble_kkt_system(t, constraints, data)?, kind)
}

/// Decision predicted by the fitted objective at `u_new`.
pub fn predict(t: &ObjectiveTemplate, c_hat: &[f64], constraints: &Constraints, u_new: &[f64]) -> Result<Vec<f64>> {
    template_forward_solve(t, c_hat, constraints, u_new)
}
