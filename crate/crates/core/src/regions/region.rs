use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pop::PopInstance;
use crate::solver::linalg::{self, Mat, Vector};
use crate::solver::{solve_lp, LpProblem, Status};

/// Polyhedral set of parameters sharing one optimal active set, with the
/// affine primal and dual laws valid on it.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRegion {
    pub active_set: Vec<usize>,
    /// `x*(u) = G u + g`
    pub g_mat: Mat,
    pub g_vec: Vector,
    /// `λ_AS(u) = L u + l`
    pub l_mat: Mat,
    pub l_vec: Vector,
    /// `{u : E u ≤ e}`, box rows included
    pub e_mat: Mat,
    pub e_vec: Vector,
}

impl CriticalRegion {
    pub fn x_star(&self, u: &[f64]) -> Vec<f64> {
        (&self.g_mat * Vector::from_column_slice(u) + &self.g_vec).iter().cloned().collect()
    }

    pub fn lambda_active(&self, u: &[f64]) -> Vec<f64> {
        (&self.l_mat * Vector::from_column_slice(u) + &self.l_vec).iter().cloned().collect()
    }

    /// Full multiplier vector of length `m`.
    pub fn lambda(&self, m: usize, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (&i, l) in self.active_set.iter().zip(self.lambda_active(u)) {
            out[i] = l;
        }
        out
    }

    /// Largest violation of `E u ≤ e`.
    pub fn violation(&self, u: &[f64]) -> f64 {
        let r = &self.e_mat * Vector::from_column_slice(u) - &self.e_vec;
        r.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        self.violation(u) <= tol
    }

    /// Center and radius of the largest ball inside the region.
    pub fn chebyshev_center(&self) -> Result<(Vec<f64>, f64)> {
        let q = self.e_mat.ncols();
        let mut cost = vec![0.0; q + 1];
        cost[q] = -1.0;
        let mut lp = LpProblem::new(cost);
        lp.set_bounds(q, 0.0, f64::INFINITY)?;
        for r in 0..self.e_mat.nrows() {
            let norm = self.e_mat.row(r).norm();
            let mut row: Vec<(usize, f64)> = (0..q).map(|j| (j, self.e_mat[(r, j)])).collect();
            row.push((q, norm));
            lp.add_le(row, self.e_vec[r])?;
        }
        let res = solve_lp(&lp)?;
        match res.status {
            Status::Optimal => Ok((res.x[..q].to_vec(), res.x[q])),
            Status::Infeasible => Err(Error::Infeasible("region is empty".into())),
            Status::Unbounded => Err(Error::Unbounded("region is unbounded".into())),
        }
    }

    /// Removes inequalities implied by the others.
    pub fn remove_redundant_rows(&mut self) -> Result<()> {
        let q = self.e_mat.ncols();
        let mut keep: Vec<usize> = (0..self.e_mat.nrows()).collect();
        let mut r = 0;
        while r < keep.len() {
            let row = keep[r];
            let cost: Vec<f64> = (0..q).map(|j| -self.e_mat[(row, j)]).collect();
            let mut lp = LpProblem::new(cost);
            for &o in keep.iter().filter(|&&o| o != row) {
                lp.add_le((0..q).map(|j| (j, self.e_mat[(o, j)])).collect(), self.e_vec[o])?;
            }
            // cap the probe so an unbounded relaxation is seen as essential
            lp.add_le((0..q).map(|j| (j, self.e_mat[(row, j)])).collect(), self.e_vec[row] + 1.0)?;
            let res = solve_lp(&lp)?;
            let norm = self.e_mat.row(row).norm().max(1e-300);
            let redundant = res.status == Status::Optimal && -res.objective <= self.e_vec[row] + 1e-9 * norm;
            if redundant || res.status == Status::Infeasible {
                keep.remove(r);
            } else {
                r += 1;
            }
        }
        self.e_mat = Mat::from_fn(keep.len(), q, |i, j| self.e_mat[(keep[i], j)]);
        self.e_vec = Vector::from_iterator(keep.len(), keep.iter().map(|&i| self.e_vec[i]));
        Ok(())
    }

    pub(crate) fn to_raw(&self) -> RawRegion {
        RawRegion {
            active_set: self.active_set.clone(),
            g_mat: rows(&self.g_mat),
            g_vec: self.g_vec.iter().cloned().collect(),
            l_mat: rows(&self.l_mat),
            l_vec: self.l_vec.iter().cloned().collect(),
            e_mat: rows(&self.e_mat),
            e_vec: self.e_vec.iter().cloned().collect(),
        }
    }

    pub(crate) fn from_raw(raw: RawRegion, q: usize) -> Result<Self> {
        let n = raw.g_vec.len();
        let k = raw.active_set.len();
        let r = raw.e_vec.len();
        let g_mat = linalg::mat_from_rows(&raw.g_mat, q)?;
        let l_mat = linalg::mat_from_rows(&raw.l_mat, q)?;
        let e_mat = linalg::mat_from_rows(&raw.e_mat, q)?;
        if g_mat.nrows() != n || l_mat.nrows() != k || raw.l_vec.len() != k || e_mat.nrows() != r {
            return Err(Error::Dimension("region matrices have inconsistent sizes".into()));
        }
        let all =
            g_mat.iter().chain(l_mat.iter()).chain(e_mat.iter()).chain(&raw.g_vec).chain(&raw.l_vec).chain(&raw.e_vec);
        if !all.into_iter().all(|v| v.is_finite()) {
            return Err(Error::Parse("region data must be finite".into()));
        }
        let mut sorted = raw.active_set.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != raw.active_set {
            return Err(Error::Parse("active set must be strictly increasing".into()));
        }
        Ok(CriticalRegion {
            active_set: raw.active_set,
            g_mat,
            g_vec: Vector::from_vec(raw.g_vec),
            l_mat,
            l_vec: Vector::from_vec(raw.l_vec),
            e_mat,
            e_vec: Vector::from_vec(raw.e_vec),
        })
    }
}

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RawRegion {
    active_set: Vec<usize>,
    #[serde(rename = "G")]
    g_mat: Vec<Vec<f64>>,
    #[serde(rename = "g")]
    g_vec: Vec<f64>,
    #[serde(rename = "L")]
    l_mat: Vec<Vec<f64>>,
    #[serde(rename = "l")]
    l_vec: Vec<f64>,
    #[serde(rename = "E")]
    e_mat: Vec<Vec<f64>>,
    #[serde(rename = "e")]
    e_vec: Vec<f64>,
}

/// Solves the equality-constrained KKT system of `pop` on `active_set`
/// symbolically in `u` and returns the region where that solution is
/// optimal, intersected with the instance box.
pub fn region_from_active_set(pop: &PopInstance, active_set: &[usize]) -> Result<CriticalRegion> {
    let n = pop.n();
    let m = pop.m();
    let q = pop.q();
    let mut aset = active_set.to_vec();
    aset.sort_unstable();
    aset.dedup();
    if aset.iter().any(|&i| i >= m) {
        return Err(Error::InvalidInput(format!("active set {active_set:?} references a constraint ≥ {m}")));
    }
    let k = aset.len();
    let a = pop.a();
    let aw = Mat::from_fn(k, n, |r, c| a[(aset[r], c)]);
    if k > n || (k > 0 && linalg::rank(&aw, 1e-10) < k) {
        return Err(Error::Degenerate(format!("rows {aset:?} of A are linearly dependent")));
    }
    let p = pop.q_mat() + pop.q_mat().transpose();
    let chol = linalg::cholesky(&p)?;
    let h = pop.h();
    let c = Vector::from_column_slice(pop.c());
    let pinv_h = chol.solve(h);
    let pinv_c = chol.solve(&c);

    let (l_mat, l_vec) = if k == 0 {
        (Mat::zeros(0, q), Vector::zeros(0))
    } else {
        let fw = Mat::from_fn(k, q, |r, j| pop.f()[(aset[r], j)]);
        let bw = Vector::from_iterator(k, aset.iter().map(|&i| pop.b()[i]));
        let pinv_awt = chol.solve(&aw.transpose());
        let s = &aw * &pinv_awt;
        let s_chol = linalg::cholesky(&s).map_err(|_| Error::Degenerate(format!("active set {aset:?}")))?;
        let l_mat = -s_chol.solve(&(fw + &aw * &pinv_h));
        let l_vec = -s_chol.solve(&(bw + &aw * &pinv_c));
        (l_mat, l_vec)
    };
    let (g_mat, g_vec) = if k == 0 {
        (-pinv_h, -pinv_c)
    } else {
        let awt = aw.transpose();
        (-chol.solve(&(h + &awt * &l_mat)), -chol.solve(&(&c + &awt * &l_vec)))
    };

    let inactive: Vec<usize> = (0..m).filter(|i| !aset.contains(i)).collect();
    let bx = pop.u_box();
    let nrows = inactive.len() + k + 2 * q;
    let mut e_mat = Mat::zeros(nrows, q);
    let mut e_vec = Vector::zeros(nrows);
    let mut r = 0;
    for &i in &inactive {
        // A_i (G u + g) ≤ b_i + F_i u
        for j in 0..q {
            e_mat[(r, j)] = (0..n).map(|t| a[(i, t)] * g_mat[(t, j)]).sum::<f64>() - pop.f()[(i, j)];
        }
        e_vec[r] = pop.b()[i] - (0..n).map(|t| a[(i, t)] * g_vec[t]).sum::<f64>();
        r += 1;
    }
    for s in 0..k {
        // L u + l ≥ 0
        for j in 0..q {
            e_mat[(r, j)] = -l_mat[(s, j)];
        }
        e_vec[r] = l_vec[s];
        r += 1;
    }
    for (j, &(lo, hi)) in bx.iter().enumerate() {
        e_mat[(r, j)] = 1.0;
        e_vec[r] = hi;
        e_mat[(r + 1, j)] = -1.0;
        e_vec[r + 1] = -lo;
        r += 2;
    }
    Ok(CriticalRegion { active_set: aset, g_mat, g_vec, l_mat, l_vec, e_mat, e_vec })
}
