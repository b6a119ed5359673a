//! Primal active-set method for strictly convex QPs
//! `min ½ xᵀP x + dᵀx  s.t.  A x ≤ b`.

use nalgebra::{Cholesky, Dyn};

use super::linalg::{self, Mat, Vector};
use super::lp::{solve_lp, LpProblem};
use super::{SolveResult, Status, ACTIVE_TOL};
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

/// A strictly convex QP. `P` is symmetrized on construction and must be
/// positive definite.
#[derive(Debug, Clone)]
pub struct QpProblem {
    p: Mat,
    d: Vector,
    a: Mat,
    b: Vector,
    chol: Cholesky<f64, Dyn>,
}

impl QpProblem {
    pub fn new(p: Mat, d: Vector, a: Mat, b: Vector) -> Result<Self> {
        let n = d.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::Dimension(format!("P is {}x{} but d has {n} entries", p.nrows(), p.ncols())));
        }
        if a.nrows() != b.len() || (a.nrows() > 0 && a.ncols() != n) {
            return Err(Error::Dimension(format!(
                "A is {}x{}, b has {} entries, n = {n}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        let all_finite = p.iter().chain(d.iter()).chain(a.iter()).chain(b.iter()).all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("QP data must be finite".into()));
        }
        let p = if linalg::max_asymmetry(&p) > SYMMETRY_TOL { linalg::symmetrize(&p) } else { p };
        let chol = linalg::cholesky(&p)?;
        let a = if a.nrows() == 0 { Mat::zeros(0, n) } else { a };
        Ok(QpProblem { p, d, a, b, chol })
    }

    /// Unconstrained QP.
    pub fn unconstrained(p: Mat, d: Vector) -> Result<Self> {
        let n = d.len();
        QpProblem::new(p, d, Mat::zeros(0, n), Vector::zeros(0))
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn p(&self) -> &Mat {
        &self.p
    }

    pub fn d(&self) -> &Vector {
        &self.d
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let xv = Vector::from_column_slice(x);
        0.5 * xv.dot(&(&self.p * &xv)) + self.d.dot(&xv)
    }

    /// `A x − b`.
    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        let xv = Vector::from_column_slice(x);
        (&self.a * xv - &self.b).iter().cloned().collect()
    }

    fn row(&self, i: usize) -> Vector {
        self.a.row(i).transpose()
    }

    /// Phase-1 LP: `min t` s.t. `A x − t ≤ b`, `t ≥ 0`.
    fn feasible_start(&self) -> Result<Option<Vector>> {
        let n = self.n();
        let mut cost = vec![0.0; n + 1];
        cost[n] = 1.0;
        let mut lp = LpProblem::new(cost);
        lp.set_bounds(n, 0.0, f64::INFINITY)?;
        for i in 0..self.m() {
            let mut row: Vec<(usize, f64)> =
                (0..n).filter(|&j| self.a[(i, j)] != 0.0).map(|j| (j, self.a[(i, j)])).collect();
            row.push((n, -1.0));
            lp.add_le(row, self.b[i])?;
        }
        let res = solve_lp(&lp)?;
        if res.status != Status::Optimal {
            return Ok(None);
        }
        let scale = 1.0 + self.b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if res.x[n] > 1e-9 * scale {
            return Ok(None);
        }
        Ok(Some(Vector::from_column_slice(&res.x[..n])))
    }
}

/// Independence test of `row` against the rows already in `basis`
/// (kept orthonormal by Gram–Schmidt).
fn independent(basis: &mut Vec<Vector>, row: &Vector) -> bool {
    let mut r = row.clone();
    for q in basis.iter() {
        let c = q.dot(&r);
        r -= q * c;
    }
    let nr = r.norm();
    if nr > 1e-9 * row.norm().max(1e-300) {
        basis.push(r / nr);
        true
    } else {
        false
    }
}

/// Solves the QP with a primal active-set method.
///
/// Infeasibility is reported via `status`; `Err` is returned only if the
/// iteration limit is hit or a subproblem is singular.
pub fn solve_qp(qp: &QpProblem, tol: f64) -> Result<SolveResult> {
    let n = qp.n();
    let m = qp.m();
    let chol = &qp.chol;

    let mut x = -chol.solve(&qp.d);
    let unconstrained_ok = (0..m).all(|i| qp.row(i).dot(&x) - qp.b[i] <= tol);
    if !unconstrained_ok {
        match qp.feasible_start()? {
            Some(x0) => x = x0,
            None => return Ok(SolveResult::failed(Status::Infeasible, n, m)),
        }
    }

    // Initial working set: tight, linearly independent constraints in index order.
    let mut working: Vec<usize> = Vec::new();
    if !unconstrained_ok {
        let mut ortho = Vec::new();
        for i in 0..m {
            if working.len() == n {
                break;
            }
            let slack = qp.b[i] - qp.row(i).dot(&x);
            if slack.abs() <= ACTIVE_TOL && independent(&mut ortho, &qp.row(i)) {
                working.push(i);
            }
        }
    }

    let max_iter = 100 * (n + m) + 100;
    let mut mult = Vector::zeros(0);
    let mut converged = false;
    let mut at_eqp_minimizer = false;
    for _ in 0..max_iter {
        let g = &qp.p * &x + &qp.d;
        let k = working.len();
        let pinv_g = chol.solve(&g);
        let (step, lam) = if k == 0 {
            (-pinv_g, Vector::zeros(0))
        } else if k == n {
            // vertex: the step is zero and A_Wᵀλ = −g is square
            let awt = Mat::from_fn(n, k, |r, c| qp.a[(working[c], r)]);
            let lam = awt.lu().solve(&(-&g)).ok_or_else(|| Error::Numerical("working set became dependent".into()))?;
            (Vector::zeros(n), lam)
        } else {
            let aw = Mat::from_fn(k, n, |r, c| qp.a[(working[r], c)]);
            let pinv_awt = chol.solve(&aw.transpose());
            let schur = &aw * &pinv_awt;
            let schur_chol =
                linalg::cholesky(&schur).map_err(|_| Error::Numerical("working set became dependent".into()))?;
            let lam = -schur_chol.solve(&(&aw * &pinv_g));
            let step = -(pinv_g + pinv_awt * &lam);
            (step, lam)
        };

        let xscale = 1.0 + x.amax();
        if at_eqp_minimizer || step.amax() <= 1e-12 * xscale {
            let gscale = 1.0 + g.amax();
            // most negative multiplier, lowest index on ties
            let mut drop: Option<(usize, f64)> = None;
            for (pos, &l) in lam.iter().enumerate() {
                if l < -1e-11 * gscale {
                    let better = match drop {
                        None => true,
                        Some((bp, bl)) => l < bl || (l == bl && working[pos] < working[bp]),
                    };
                    if better {
                        drop = Some((pos, l));
                    }
                }
            }
            match drop {
                None => {
                    mult = lam;
                    converged = true;
                    break;
                }
                Some((pos, _)) => {
                    at_eqp_minimizer = false;
                    working.remove(pos);
                    continue;
                }
            }
        }

        // step length with lowest-index blocking constraint on ties
        let mut alpha = 1.0;
        let mut blocking: Option<usize> = None;
        for i in 0..m {
            if working.contains(&i) {
                continue;
            }
            let ai = qp.row(i);
            let aip = ai.dot(&step);
            if aip > 1e-14 * (1.0 + ai.amax() * step.amax()) {
                let slack = (qp.b[i] - ai.dot(&x)).max(0.0);
                let t = slack / aip;
                if t < alpha {
                    alpha = t;
                    blocking = Some(i);
                }
            }
        }
        x += &step * alpha;
        // a full unblocked step lands on the minimizer of the current
        // equality subproblem; recomputing it would only return rounding noise
        at_eqp_minimizer = blocking.is_none();
        if let Some(i) = blocking {
            let pos = working.partition_point(|&w| w < i);
            working.insert(pos, i);
        }
    }
    if !converged {
        return Err(Error::Numerical(format!("active-set QP exceeded {max_iter} iterations")));
    }

    let mut lambda = vec![0.0; m];
    for (pos, &i) in working.iter().enumerate() {
        lambda[i] = mult[pos].max(0.0);
    }
    let xs: Vec<f64> = x.iter().cloned().collect();
    let values = qp.constraint_values(&xs);
    let active_set = (0..m).filter(|&i| values[i].abs() <= ACTIVE_TOL).collect();
    let objective = qp.objective(&xs);
    Ok(SolveResult { status: Status::Optimal, x: xs, lambda, lambda_eq: Vec::new(), active_set, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp(p: &[f64], d: &[f64], a: &[f64], b: &[f64]) -> QpProblem {
        let n = d.len();
        QpProblem::new(
            Mat::from_row_slice(n, n, p),
            Vector::from_column_slice(d),
            Mat::from_row_slice(b.len(), n, a),
            Vector::from_column_slice(b),
        )
        .unwrap()
    }

    #[test]
    fn unconstrained_stationary_point() {
        let r = solve_qp(&qp(&[2.0, 0.0, 0.0, 2.0], &[-2.0, -2.0], &[], &[]), 1e-8).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] - 1.0).abs() < 1e-12);
        assert!((r.objective + 2.0).abs() < 1e-12);
    }

    #[test]
    fn half_space_projection() {
        let r = solve_qp(&qp(&[2.0, 0.0, 0.0, 2.0], &[0.0, 0.0], &[-1.0, 0.0], &[-1.0]), 1e-8).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-12 && r.x[1].abs() < 1e-12);
        assert!((r.lambda[0] - 2.0).abs() < 1e-10);
        assert_eq!(r.active_set, vec![0]);
    }

    #[test]
    fn rejects_indefinite_p() {
        let err = QpProblem::unconstrained(Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), Vector::zeros(2));
        assert!(matches!(err, Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn symmetrizes_p() {
        let p = qp(&[2.0, 1.0, 0.0, 2.0], &[0.0, 0.0], &[], &[]);
        assert_eq!(p.p()[(0, 1)], 0.5);
        assert_eq!(p.p()[(1, 0)], 0.5);
    }

    #[test]
    fn reports_infeasible() {
        // x ≤ -1 and -x ≤ -1
        let r = solve_qp(&qp(&[1.0], &[0.0], &[1.0, -1.0], &[-1.0, -1.0]), 1e-8).unwrap();
        assert_eq!(r.status, Status::Infeasible);
    }

    #[test]
    fn degenerate_vertex_with_redundant_constraints() {
        // three constraints tight at (1, 1): x ≤ 1, y ≤ 1, x + y ≤ 2
        let r = solve_qp(
            &qp(&[2.0, 0.0, 0.0, 2.0], &[-6.0, -6.0], &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 2.0]),
            1e-8,
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-10 && (r.x[1] - 1.0).abs() < 1e-10);
        assert_eq!(r.active_set, vec![0, 1, 2]);
        let rep = super::super::check_kkt(
            &qp(&[2.0, 0.0, 0.0, 2.0], &[-6.0, -6.0], &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 2.0]),
            &r.x,
            &r.lambda,
            1e-8,
        );
        assert!(rep.pass, "{rep:?}");
    }
}
