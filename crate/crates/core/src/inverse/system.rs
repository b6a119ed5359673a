use crate::error::{Error, Result};
use crate::pop::{Constraints, Dataset, ObjectiveTemplate};

/// Observations whose coordinate falls below this are treated as sitting
/// on the boundary where `√x` has no gradient.
pub const SINGULAR_TOL: f64 = 1e-9;

/// Stationarity row `constant + c_coef·c + Σ lambda_coef λ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityRow {
    pub k: usize,
    pub j: usize,
    pub constant: f64,
    pub c_coef: Vec<f64>,
    /// `(constraint index i, ∂g_i/∂x_j)`
    pub lambda_coef: Vec<(usize, f64)>,
}

/// KKT residuals of a template over a dataset, affine in `(c, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSystem {
    pub num_coefficients: usize,
    pub num_observations: usize,
    pub num_constraints: usize,
    pub stationarity: Vec<StationarityRow>,
    /// `comp[k][i] = −g_i(u_k, x_k)`; the complementarity residual is
    /// `comp[k][i]·λ_ki`.
    pub comp: Vec<Vec<f64>>,
    pub bounds: Vec<(f64, f64)>,
    /// Required value of `Σ_j c_j`, if any.
    pub normalization: Option<f64>,
    /// Stationarity rows dropped at singular gradients.
    pub dropped: usize,
}

impl ResidualSystem {
    pub fn num_lambdas(&self) -> usize {
        self.num_observations * self.num_constraints
    }

    pub fn lambda_index(&self, k: usize, i: usize) -> usize {
        k * self.num_constraints + i
    }

    /// Stationarity residuals in row order.
    pub fn stationarity_residuals(&self, c: &[f64], lambda: &[Vec<f64>]) -> Vec<f64> {
        self.stationarity
            .iter()
            .map(|r| {
                let cl: f64 = r.c_coef.iter().zip(c).map(|(a, b)| a * b).sum();
                let ll: f64 = r.lambda_coef.iter().map(|&(i, a)| a * lambda[r.k][i]).sum();
                r.constant + cl + ll
            })
            .collect()
    }

    /// Complementarity residuals, `comp[k][i]·λ_ki`.
    pub fn complementarity_residuals(&self, lambda: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.comp.iter().zip(lambda).map(|(g, l)| g.iter().zip(l).map(|(g, l)| g * l).collect()).collect()
    }
}

/// Builds the stationarity and complementarity residuals of `t` at every
/// observation. Homogeneous templates get the normalization `Σ c_j = J`.
pub fn assemble_kkt_system(t: &ObjectiveTemplate, constraints: &Constraints, data: &Dataset) -> Result<ResidualSystem> {
    let n = t.n();
    if data.n() != n {
        return Err(Error::Dimension(format!("dataset has {} decision columns, template {n}", data.n())));
    }
    if let Constraints::NonNegative { n: cn } = constraints {
        if *cn != n {
            return Err(Error::Dimension(format!("orthant of size {cn} for n = {n}")));
        }
    }
    let jn = t.num_coefficients();
    let m = constraints.m();
    let jac: Vec<Vec<(usize, f64)>> = (0..m).map(|i| constraints.jacobian_row(i)).collect();
    // per-coordinate lists of (constraint, coefficient)
    let mut by_coord: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in jac.iter().enumerate() {
        for &(j, a) in row {
            if j >= n {
                return Err(Error::Dimension(format!("constraint {i} references x_{j}")));
            }
            by_coord[j].push((i, a));
        }
    }

    let mut stationarity = Vec::with_capacity(data.len() * n);
    let mut comp = Vec::with_capacity(data.len());
    let mut dropped = 0;
    let mut clamped = 0;
    for (k, (u, x)) in data.u.iter().zip(&data.x).enumerate() {
        let g0 = t.f0_grad(u, x);
        let gb: Vec<Vec<f64>> = (0..jn).map(|j| t.basis_grad(j, u, x)).collect();
        for j in 0..n {
            if t.singular_at(x, j, SINGULAR_TOL) {
                dropped += 1;
                continue;
            }
            let c_coef: Vec<f64> = gb.iter().map(|g| g[j]).collect();
            if !g0[j].is_finite() || c_coef.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("gradient is not finite at observation {k}, coordinate {j}")));
            }
            stationarity.push(StationarityRow { k, j, constant: g0[j], c_coef, lambda_coef: by_coord[j].clone() });
        }
        let g = constraints.values(u, x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("constraint values are not finite at observation {k}")));
        }
        comp.push(
            g.iter()
                .map(|&v| {
                    if v > 0.0 {
                        clamped += 1;
                    }
                    (-v).max(0.0)
                })
                .collect(),
        );
    }
    if dropped > 0 {
        log::warn!("{dropped} stationarity rows dropped where the square-root gradient is undefined");
    }
    if clamped > 0 {
        log::warn!("{clamped} slightly violated constraints treated as active");
    }
    Ok(ResidualSystem {
        num_coefficients: jn,
        num_observations: data.len(),
        num_constraints: m,
        stationarity,
        comp,
        bounds: t.bounds().to_vec(),
        normalization: if t.homogeneous() { Some(jn as f64) } else { None },
        dropped,
    })
}
