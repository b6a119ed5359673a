use super::linalg::Vector;
use super::QpProblem;

/// Infinity-norm residuals of the KKT system of a QP at `(x, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub pass: bool,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

/// Evaluates `‖Px + d + Aᵀλ‖∞`, `max(Ax − b)₊`, `max(−λ)₊` and
/// `max |λᵢ(Aᵢx − bᵢ)|`.
pub fn check_kkt(qp: &QpProblem, x: &[f64], lambda: &[f64], tol: f64) -> KktReport {
    assert_eq!(x.len(), qp.n(), "x has wrong length");
    assert_eq!(lambda.len(), qp.m(), "lambda has wrong length");
    let xv = Vector::from_column_slice(x);
    let lv = Vector::from_column_slice(lambda);
    let mut grad = qp.p() * &xv + qp.d();
    if qp.m() > 0 {
        grad += qp.a().transpose() * &lv;
    }
    let values = qp.constraint_values(x);
    let stationarity = grad.amax();
    let primal = values.iter().fold(0.0_f64, |m, &v| m.max(v));
    let dual = lambda.iter().fold(0.0_f64, |m, &l| m.max(-l));
    let complementarity = values.iter().zip(lambda).fold(0.0_f64, |m, (v, l)| m.max((v * l).abs()));
    let pass = stationarity <= tol && primal <= tol && dual <= tol && complementarity <= tol;
    KktReport { stationarity, primal, dual, complementarity, pass }
}
