//! Dense linear algebra helpers and the LP / QP solvers that every other
//! module builds on.
//!
//! Both solvers are deterministic pure functions of their input. The QP
//! solver is a primal active-set method so that callers get an exact
//! working set back, which the critical-region code relies on.

mod kkt;
pub mod linalg;
mod lp;
mod qp;

pub use kkt::{check_kkt, KktReport};
pub use lp::{solve_lp, LpProblem, PricingRule};
pub use qp::{solve_qp, QpProblem};

use serde::{Deserialize, Serialize};

/// Default feasibility/stationarity tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Tolerance used to decide whether an inequality is tight.
pub const ACTIVE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Outcome of an LP or QP solve.
///
/// `lambda` holds one multiplier per inequality row using the convention
/// `grad + Aᵀλ = 0`, `λ ≥ 0`. For LPs with equality rows the corresponding
/// multipliers are in `lambda_eq` (same sign convention, free sign).
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_eq: Vec<f64>,
    pub active_set: Vec<usize>,
    pub objective: f64,
}

impl SolveResult {
    pub(crate) fn failed(status: Status, n: usize, m: usize) -> Self {
        SolveResult {
            status,
            x: vec![f64::NAN; n],
            lambda: vec![0.0; m],
            lambda_eq: Vec::new(),
            active_set: Vec::new(),
            objective: match status {
                Status::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
