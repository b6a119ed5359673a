use nalgebra::{Cholesky, Dyn};

use crate::error::{Error, Result};
use crate::pop::Dataset;
use crate::solver::linalg::{Mat, Vector};

fn rbf(a: &[f64], b: &[f64], length_scale: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-0.5 * d2 / (length_scale * length_scale)).exp()
}

/// Factored kernel matrix shared by all outputs.
pub(crate) struct GpFit<'a> {
    u: &'a [Vec<f64>],
    length_scale: f64,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> GpFit<'a> {
    pub(crate) fn new(u: &'a [Vec<f64>], length_scale: f64, alpha: f64) -> Result<Self> {
        let k = u.len();
        let mut km = Mat::from_fn(k, k, |i, j| rbf(&u[i], &u[j], length_scale));
        for i in 0..k {
            km[(i, i)] += alpha;
        }
        let chol = Cholesky::new(km).ok_or_else(|| {
            Error::NotPositiveDefinite(format!(
                "GP kernel matrix (length scale {length_scale}, alpha {alpha}) is numerically singular"
            ))
        })?;
        Ok(GpFit { u, length_scale, chol })
    }

    pub(crate) fn model(&self, y: &[f64]) -> GpModel {
        let w = self.chol.solve(&Vector::from_column_slice(y));
        GpModel { inputs: self.u.to_vec(), weights: w.iter().cloned().collect(), length_scale: self.length_scale }
    }
}

/// Zero-mean GP posterior mean with an RBF kernel.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    weights: Vec<f64>,
    length_scale: f64,
}

impl GpModel {
    pub fn predict(&self, u: &[f64]) -> f64 {
        self.inputs.iter().zip(&self.weights).map(|(x, w)| w * rbf(u, x, self.length_scale)).sum()
    }

    /// Dual weights `(K + αI)⁻¹ y`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Leave-one-out predictions from one factorization:
/// `ŷ₋ₖ = yₖ − [K⁻¹y]ₖ / [K⁻¹]ₖₖ`.
pub(crate) fn loo(data: &Dataset, length_scale: f64, alpha: f64) -> Result<Vec<Vec<f64>>> {
    let fit = GpFit::new(&data.u, length_scale, alpha)?;
    let k = data.len();
    let inv = fit.chol.inverse();
    let diag: Vec<f64> = (0..k).map(|i| inv[(i, i)]).collect();
    if diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::Numerical("GP kernel inverse has a nonpositive diagonal".into()));
    }
    let mut out = vec![vec![0.0; data.n()]; k];
    for j in 0..data.n() {
        let y = Vector::from_iterator(k, data.x.iter().map(|x| x[j]));
        let w = &inv * &y;
        for i in 0..k {
            out[i][j] = y[i] - w[i] / diag[i];
        }
    }
    Ok(out)
}
