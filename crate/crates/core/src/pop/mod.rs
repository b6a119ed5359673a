//! Forward-problem data: parametric QP instances, objective templates that
//! are linear in the unknown coefficients, and noiseless dataset generation.

mod dataset;
mod instance;
pub mod reference;
mod template;

pub use dataset::{generate_dataset, Dataset, DatasetMeta, TruthModel};
pub use instance::{generate_random_pop, PopInstance};
pub use reference::UtilityInstance;
pub use template::{
    template_forward_solve, template_forward_solve_with_duals, Constraints, LinearCoef, ObjectiveTemplate, Term,
};

/// Box of parameter values, one `(lower, upper)` pair per coordinate.
pub type ParamBox = Vec<(f64, f64)>;

pub(crate) fn check_box(bx: &[(f64, f64)]) -> crate::Result<()> {
    if bx.is_empty() {
        return Err(crate::Error::InvalidInput("empty parameter box".into()));
    }
    for (i, &(lo, hi)) in bx.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(crate::Error::InvalidInput(format!("box coordinate {i} has bounds [{lo}, {hi}]")));
        }
    }
    Ok(())
}

pub(crate) fn box_contains(bx: &[(f64, f64)], u: &[f64], tol: f64) -> bool {
    bx.len() == u.len() && bx.iter().zip(u).all(|(&(lo, hi), &v)| v >= lo - tol && v <= hi + tol)
}

/// Corners of a box followed by its center.
pub(crate) fn box_corners_and_center(bx: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let q = bx.len();
    let mut pts = Vec::with_capacity((1 << q) + 1);
    for mask in 0..(1usize << q) {
        pts.push((0..q).map(|j| if mask >> j & 1 == 1 { bx[j].1 } else { bx[j].0 }).collect());
    }
    pts.push(bx.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect());
    pts
}
