//! Learning convex objective coefficients of parametric optimization
//! problems from observed decisions, and comparing that against generic
//! regressors.
//!
//! The crate is organized bottom-up:
//!
//! * [`solver`] dense LP (simplex) and QP (active-set) solvers with KKT checks,
//! * [`pop`] parametric problem data, objective templates and dataset generation,
//! * [`inverse`] the KKT-residual inverse fit and predictions from it,
//! * [`regions`] critical regions of parametric QPs,
//! * [`ml`] Gaussian-process, random-forest and ε-SVR regressors,
//! * [`bench`] metrics, leave-one-out selection and the experiment drivers.

pub mod bench;
pub mod error;
pub mod inverse;
pub mod ml;
pub mod num;
pub mod pop;
pub mod regions;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
