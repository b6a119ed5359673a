use serde::{Deserialize, Serialize};

use super::system::ResidualSystem;
use crate::error::{Error, Result};
use crate::solver::linalg::{Mat, Vector};
use crate::solver::{solve_lp, solve_qp, LpProblem, PricingRule, QpProblem, Status, DEFAULT_TOL};

/// Norm applied to the residuals of each observation; the per-observation
/// norms are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormKind {
    #[default]
    L1,
    #[serde(rename = "Linf")]
    LInf,
    #[serde(rename = "L2sq")]
    L2Squared,
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(NormKind::L1),
            "linf" => Ok(NormKind::LInf),
            "l2sq" | "l2" => Ok(NormKind::L2Squared),
            _ => Err(Error::InvalidInput(format!("unknown norm '{s}' (expected L1, Linf or L2sq)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub c_hat: Vec<f64>,
    #[serde(skip)]
    pub lambda_hat: Vec<Vec<f64>>,
    pub residual_norm: f64,
    pub norm_kind: NormKind,
    pub normalized: bool,
}

impl FitResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: FitResult = serde_json::from_str(s)?;
        if r.c_hat.is_empty() || r.c_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("c_hat must be a nonempty list of finite numbers".into()));
        }
        if !(r.residual_norm >= 0.0) {
            return Err(Error::Parse("residual_norm must be nonnegative".into()));
        }
        Ok(r)
    }
}

/// Sum over observations of the chosen norm of that observation's
/// stationarity and complementarity residuals.
pub fn residual_norm(sys: &ResidualSystem, c: &[f64], lambda: &[Vec<f64>], kind: NormKind) -> f64 {
    let stat = sys.stationarity_residuals(c, lambda);
    let comp = sys.complementarity_residuals(lambda);
    let mut per_obs = vec![0.0_f64; sys.num_observations];
    let mut add = |k: usize, r: f64| match kind {
        NormKind::L1 => per_obs[k] += r.abs(),
        NormKind::LInf => per_obs[k] = per_obs[k].max(r.abs()),
        NormKind::L2Squared => per_obs[k] += r * r,
    };
    for (row, r) in sys.stationarity.iter().zip(stat) {
        add(row.k, r);
    }
    for (k, rk) in comp.iter().enumerate() {
        for &r in rk {
            add(k, r);
        }
    }
    per_obs.iter().sum()
}

/// Minimizes the residual norm over `c` in its bounds and `λ ≥ 0`.
pub fn fit_objective(sys: &ResidualSystem, kind: NormKind) -> Result<FitResult> {
    if sys.num_observations == 0 {
        return Err(Error::InvalidInput("no observations".into()));
    }
    let (c_hat, lambda_flat) = match kind {
        NormKind::L1 => fit_l1(sys)?,
        NormKind::LInf => fit_linf(sys)?,
        NormKind::L2Squared => fit_l2(sys)?,
    };
    let lambda_hat: Vec<Vec<f64>> = lambda_flat
        .chunks(sys.num_constraints.max(1))
        .take(sys.num_observations)
        .map(|ch| ch.iter().take(sys.num_constraints).map(|v| v.max(0.0)).collect())
        .collect();
    let lambda_hat = if sys.num_constraints == 0 { vec![Vec::new(); sys.num_observations] } else { lambda_hat };
    let residual_norm = residual_norm(sys, &c_hat, &lambda_hat, kind);
    Ok(FitResult { c_hat, lambda_hat, residual_norm, norm_kind: kind, normalized: sys.normalization.is_some() })
}

fn base_lp(sys: &ResidualSystem, cost: Vec<f64>) -> Result<LpProblem> {
    let jn = sys.num_coefficients;
    let nl = sys.num_lambdas();
    let extra = cost.len() - jn - nl;
    let mut lp = LpProblem::new(cost).with_pricing(PricingRule::Dantzig);
    for (j, &(lo, hi)) in sys.bounds.iter().enumerate() {
        lp.set_bounds(j, lo, hi)?;
    }
    for v in jn..jn + nl + extra {
        lp.set_bounds(v, 0.0, f64::INFINITY)?;
    }
    if let Some(gamma) = sys.normalization {
        lp.add_eq((0..jn).map(|j| (j, 1.0)).collect(), gamma)?;
    }
    Ok(lp)
}

fn stat_row(sys: &ResidualSystem, r: usize) -> Vec<(usize, f64)> {
    let row = &sys.stationarity[r];
    let jn = sys.num_coefficients;
    let mut out: Vec<(usize, f64)> =
        row.c_coef.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(j, &a)| (j, a)).collect();
    out.extend(row.lambda_coef.iter().filter(|(_, a)| *a != 0.0).map(|&(i, a)| (jn + sys.lambda_index(row.k, i), a)));
    out
}

fn finish_lp(sys: &ResidualSystem, lp: &LpProblem) -> Result<(Vec<f64>, Vec<f64>)> {
    let res = solve_lp(lp)?;
    if res.status != Status::Optimal {
        return Err(Error::Numerical(format!("residual LP reported {:?}", res.status)));
    }
    let jn = sys.num_coefficients;
    Ok((res.x[..jn].to_vec(), res.x[jn..jn + sys.num_lambdas()].to_vec()))
}

fn set_comp_costs(sys: &ResidualSystem, cost: &mut [f64]) {
    let jn = sys.num_coefficients;
    for (k, g) in sys.comp.iter().enumerate() {
        for (i, &gi) in g.iter().enumerate() {
            cost[jn + sys.lambda_index(k, i)] = gi;
        }
    }
}

/// `min Σ|r_stat| + Σ comp·λ` with `r = t⁺ − t⁻`.
fn fit_l1(sys: &ResidualSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let jn = sys.num_coefficients;
    let nl = sys.num_lambdas();
    let nr = sys.stationarity.len();
    let mut cost = vec![0.0; jn + nl + 2 * nr];
    set_comp_costs(sys, &mut cost);
    cost[jn + nl..].iter_mut().for_each(|v| *v = 1.0);
    let mut lp = base_lp(sys, cost)?;
    for r in 0..nr {
        let mut row = stat_row(sys, r);
        let tp = jn + nl + 2 * r;
        row.push((tp, -1.0));
        row.push((tp + 1, 1.0));
        lp.add_eq(row, -sys.stationarity[r].constant)?;
    }
    finish_lp(sys, &lp)
}

/// `min Σ_k s_k` with `s_k` bounding every residual of observation `k`.
fn fit_linf(sys: &ResidualSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let jn = sys.num_coefficients;
    let nl = sys.num_lambdas();
    let nk = sys.num_observations;
    let mut cost = vec![0.0; jn + nl + nk];
    cost[jn + nl..].iter_mut().for_each(|v| *v = 1.0);
    let mut lp = base_lp(sys, cost)?;
    for r in 0..sys.stationarity.len() {
        let row = stat_row(sys, r);
        let s = jn + nl + sys.stationarity[r].k;
        let constant = sys.stationarity[r].constant;
        let mut up = row.clone();
        up.push((s, -1.0));
        lp.add_le(up, -constant)?;
        let mut down: Vec<(usize, f64)> = row.iter().map(|&(j, a)| (j, -a)).collect();
        down.push((s, -1.0));
        lp.add_le(down, constant)?;
    }
    for (k, g) in sys.comp.iter().enumerate() {
        for (i, &gi) in g.iter().enumerate() {
            if gi > 0.0 {
                lp.add_le(vec![(jn + sys.lambda_index(k, i), gi), (jn + nl + k, -1.0)], 0.0)?;
            }
        }
    }
    finish_lp(sys, &lp)
}

/// Least squares over `(c, λ)` as a QP. A normalization is eliminated by
/// substituting the last coefficient, and a tiny ridge keeps the Hessian
/// positive definite when some multiplier is not identified.
fn fit_l2(sys: &ResidualSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let jn = sys.num_coefficients;
    let nl = sys.num_lambdas();
    let nz = jn + nl;
    // z = T y + z0
    let (ny, t, z0) = match sys.normalization {
        Some(gamma) => {
            let ny = nz - 1;
            let mut t = Mat::zeros(nz, ny);
            for j in 0..jn - 1 {
                t[(j, j)] = 1.0;
                t[(jn - 1, j)] = -1.0;
            }
            for v in jn..nz {
                t[(v, v - 1)] = 1.0;
            }
            let mut z0 = Vector::zeros(nz);
            z0[jn - 1] = gamma;
            (ny, t, z0)
        }
        None => (nz, Mat::identity(nz, nz), Vector::zeros(nz)),
    };
    let comp_rows: Vec<(usize, f64)> = sys
        .comp
        .iter()
        .enumerate()
        .flat_map(|(k, g)| g.iter().enumerate().filter(|(_, &v)| v > 0.0).map(move |(i, &v)| (k * g.len() + i, v)))
        .collect();
    let nrows = sys.stationarity.len() + comp_rows.len();
    let mut g = Mat::zeros(nrows, nz);
    let mut h = Vector::zeros(nrows);
    for r in 0..sys.stationarity.len() {
        for (j, a) in stat_row(sys, r) {
            g[(r, j)] += a;
        }
        h[r] = sys.stationarity[r].constant;
    }
    for (off, &(li, v)) in comp_rows.iter().enumerate() {
        g[(sys.stationarity.len() + off, jn + li)] = v;
    }
    let gy = &g * &t;
    let hy = &h + &g * &z0;
    let mut p = gy.transpose() * &gy * 2.0;
    let ridge = 1e-10 * (1.0 + p.diagonal().amax());
    for i in 0..ny {
        p[(i, i)] += ridge;
    }
    let d = gy.transpose() * &hy * 2.0;

    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let free_c = if sys.normalization.is_some() { jn - 1 } else { jn };
    for j in 0..free_c {
        let (lo, hi) = sys.bounds[j];
        if hi.is_finite() {
            rows.push((vec![(j, 1.0)], hi));
        }
        if lo.is_finite() {
            rows.push((vec![(j, -1.0)], -lo));
        }
    }
    if let Some(gamma) = sys.normalization {
        let (lo, hi) = sys.bounds[jn - 1];
        let all: Vec<usize> = (0..jn - 1).collect();
        if lo.is_finite() {
            rows.push((all.iter().map(|&j| (j, 1.0)).collect(), gamma - lo));
        }
        if hi.is_finite() {
            rows.push((all.iter().map(|&j| (j, -1.0)).collect(), hi - gamma));
        }
    }
    for v in free_c..ny {
        rows.push((vec![(v, -1.0)], 0.0));
    }
    let mut a = Mat::zeros(rows.len(), ny);
    let mut b = Vector::zeros(rows.len());
    for (r, (row, rhs)) in rows.iter().enumerate() {
        for &(j, v) in row {
            a[(r, j)] = v;
        }
        b[r] = *rhs;
    }
    let qp = QpProblem::new(p, d, a, b)?;
    let res = solve_qp(&qp, DEFAULT_TOL)?;
    if res.status != Status::Optimal {
        return Err(Error::Numerical(format!("residual QP reported {:?}", res.status)));
    }
    let z = t * Vector::from_column_slice(&res.x) + z0;
    Ok((z.as_slice()[..jn].to_vec(), z.as_slice()[jn..].to_vec()))
}
