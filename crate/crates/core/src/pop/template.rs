//! Objective templates `f(u,x,c) = f0(u,x) + Σ_j c_j φ_j(u,x)` and the
//! forward solver for an instantiated template.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::solver::linalg::{self, Mat, Vector};
use crate::solver::{solve_qp, QpProblem, Status, DEFAULT_TOL};

/// Coefficient vector `ψ(u)` of a linear term `ψ(u)ᵀx`.
#[derive(Clone)]
pub enum LinearCoef {
    /// `ψ(u) = H u + c`.
    Affine { h: Mat, c: Vec<f64> },
    /// Arbitrary `ψ(u)`.
    Function(Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>),
}

impl LinearCoef {
    pub fn constant(c: Vec<f64>) -> Self {
        let n = c.len();
        LinearCoef::Affine { h: Mat::zeros(n, 0), c }
    }

    pub fn function<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        LinearCoef::Function(Arc::new(f))
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        match self {
            LinearCoef::Affine { h, c } => {
                let mut out = c.clone();
                for i in 0..h.nrows() {
                    for j in 0..h.ncols() {
                        out[i] += h[(i, j)] * u[j];
                    }
                }
                out
            }
            LinearCoef::Function(f) => f(u),
        }
    }
}

impl fmt::Debug for LinearCoef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinearCoef::Affine { h, c } => f.debug_struct("Affine").field("h", h).field("c", c).finish(),
            LinearCoef::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// One term of an objective template.
#[derive(Debug, Clone)]
pub enum Term {
    /// `xᵀ M x`.
    Quadratic(Mat),
    /// `ψ(u)ᵀ x`.
    Linear(LinearCoef),
    /// `Σ_i w_i √x_i`.
    Sqrt(Vec<f64>),
}

impl Term {
    pub fn value(&self, u: &[f64], x: &[f64]) -> f64 {
        match self {
            Term::Quadratic(m) => {
                let xv = Vector::from_column_slice(x);
                xv.dot(&(m * &xv))
            }
            Term::Linear(psi) => linalg::dot(&psi.eval(u), x),
            Term::Sqrt(w) => w.iter().zip(x).map(|(w, x)| w * x.max(0.0).sqrt()).sum(),
        }
    }

    /// x-gradient. Square-root terms give an infinite entry at `x_i = 0`.
    pub fn grad(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        match self {
            Term::Quadratic(m) => {
                let xv = Vector::from_column_slice(x);
                ((m + m.transpose()) * xv).iter().cloned().collect()
            }
            Term::Linear(psi) => psi.eval(u),
            Term::Sqrt(w) => {
                w.iter().zip(x).map(|(&w, &x)| if w == 0.0 { 0.0 } else { w / (2.0 * x.max(0.0).sqrt()) }).collect()
            }
        }
    }

    /// Whether the gradient of coordinate `j` is undefined at `x`.
    pub fn singular_at(&self, x: &[f64], j: usize, tol: f64) -> bool {
        matches!(self, Term::Sqrt(w) if w[j] != 0.0 && x[j] < tol)
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Term::Quadratic(m) => Some(m.nrows()),
            Term::Linear(LinearCoef::Affine { c, .. }) => Some(c.len()),
            Term::Linear(LinearCoef::Function(_)) => None,
            Term::Sqrt(w) => Some(w.len()),
        }
    }
}

/// Objective family linear in the unknown coefficients `c`.
#[derive(Debug, Clone)]
pub struct ObjectiveTemplate {
    pub name: String,
    n: usize,
    f0: Vec<Term>,
    basis: Vec<Term>,
    bounds: Vec<(f64, f64)>,
}

impl ObjectiveTemplate {
    /// `bounds` are the admissible ranges of each `c_j`; the objective is
    /// convex whenever every coefficient lies in its range.
    pub fn new(
        name: impl Into<String>,
        n: usize,
        f0: Vec<Term>,
        basis: Vec<Term>,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("template needs n ≥ 1".into()));
        }
        if basis.is_empty() {
            return Err(Error::InvalidInput("template needs at least one basis function".into()));
        }
        if bounds.len() != basis.len() {
            return Err(Error::Dimension(format!("{} bounds for {} basis functions", bounds.len(), basis.len())));
        }
        for t in f0.iter().chain(&basis) {
            if let Some(d) = t.dim() {
                if d != n {
                    return Err(Error::Dimension(format!("term of size {d} in a template with n = {n}")));
                }
            }
            if let Term::Quadratic(m) = t {
                if m.ncols() != n {
                    return Err(Error::Dimension("quadratic term must be square".into()));
                }
            }
        }
        if bounds.iter().any(|&(lo, hi)| lo.is_nan() || hi.is_nan() || lo > hi) {
            return Err(Error::InvalidInput("coefficient bounds must satisfy lo ≤ hi".into()));
        }
        Ok(ObjectiveTemplate { name: name.into(), n, f0, basis, bounds })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_coefficients(&self) -> usize {
        self.basis.len()
    }

    pub fn f0(&self) -> &[Term] {
        &self.f0
    }

    pub fn basis(&self) -> &[Term] {
        &self.basis
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn homogeneous(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn f0_value(&self, u: &[f64], x: &[f64]) -> f64 {
        self.f0.iter().map(|t| t.value(u, x)).sum()
    }

    pub fn f0_grad(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for t in &self.f0 {
            for (gi, ti) in g.iter_mut().zip(t.grad(u, x)) {
                *gi += ti;
            }
        }
        g
    }

    pub fn basis_value(&self, j: usize, u: &[f64], x: &[f64]) -> f64 {
        self.basis[j].value(u, x)
    }

    pub fn basis_grad(&self, j: usize, u: &[f64], x: &[f64]) -> Vec<f64> {
        self.basis[j].grad(u, x)
    }

    pub fn value(&self, u: &[f64], x: &[f64], c: &[f64]) -> f64 {
        self.f0_value(u, x) + c.iter().enumerate().map(|(j, cj)| cj * self.basis_value(j, u, x)).sum::<f64>()
    }

    pub fn grad(&self, u: &[f64], x: &[f64], c: &[f64]) -> Vec<f64> {
        let mut g = self.f0_grad(u, x);
        for (j, &cj) in c.iter().enumerate() {
            for (gi, bi) in g.iter_mut().zip(self.basis_grad(j, u, x)) {
                *gi += cj * bi;
            }
        }
        g
    }

    /// Whether some term has an undefined gradient in coordinate `j` at `x`.
    pub fn singular_at(&self, x: &[f64], j: usize, tol: f64) -> bool {
        self.f0.iter().chain(&self.basis).any(|t| t.singular_at(x, j, tol))
    }

    fn check_coefficients(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.basis.len() {
            return Err(Error::Dimension(format!("{} coefficients for {} basis functions", c.len(), self.basis.len())));
        }
        if let Some(j) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("coefficient {j} is not finite")));
        }
        for (j, (&cj, &(lo, hi))) in c.iter().zip(&self.bounds).enumerate() {
            let slack = 1e-12 * (1.0 + cj.abs());
            if cj < lo - slack || cj > hi + slack {
                return Err(Error::NonConvex(format!(
                    "coefficient c[{j}] = {cj} is outside its admissible range [{lo}, {hi}]"
                )));
            }
        }
        if self.homogeneous() && c.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidInput("all coefficients are zero and the objective vanishes".into()));
        }
        Ok(())
    }

    /// Weighted terms `(weight, term)` of the instantiated objective.
    fn weighted<'a>(&'a self, c: &'a [f64]) -> impl Iterator<Item = (f64, &'a Term)> + 'a {
        self.f0.iter().map(|t| (1.0, t)).chain(c.iter().cloned().zip(self.basis.iter()))
    }
}

/// Feasible set of a forward problem.
#[derive(Debug, Clone)]
pub enum Constraints {
    /// `A x ≤ b + F u`.
    Affine { a: Mat, b: Vec<f64>, f: Mat },
    /// `x ≥ 0`.
    NonNegative { n: usize },
}

impl Constraints {
    pub fn affine(a: Mat, b: Vec<f64>, f: Mat) -> Result<Self> {
        if a.nrows() != b.len() || f.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "A has {} rows, b {} entries, F {} rows",
                a.nrows(),
                b.len(),
                f.nrows()
            )));
        }
        Ok(Constraints::Affine { a, b, f })
    }

    pub fn m(&self) -> usize {
        match self {
            Constraints::Affine { b, .. } => b.len(),
            Constraints::NonNegative { n } => *n,
        }
    }

    /// Constraint values `g_i(u, x)`; feasibility is `g ≤ 0`.
    pub fn values(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        match self {
            Constraints::Affine { a, b, f } => (0..b.len())
                .map(|i| {
                    let ax: f64 = (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum();
                    let fu: f64 = (0..f.ncols()).map(|j| f[(i, j)] * u[j]).sum();
                    ax - b[i] - fu
                })
                .collect(),
            Constraints::NonNegative { .. } => x.iter().map(|v| -v).collect(),
        }
    }

    /// Nonzero entries of `∂g_i/∂x`.
    pub fn jacobian_row(&self, i: usize) -> Vec<(usize, f64)> {
        match self {
            Constraints::Affine { a, .. } => {
                (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0).map(|j| (j, a[(i, j)])).collect()
            }
            Constraints::NonNegative { .. } => vec![(i, -1.0)],
        }
    }

    /// `(A, rhs)` with the feasible set `A x ≤ rhs` at `u`.
    pub fn instantiate(&self, n: usize, u: &[f64]) -> Result<(Mat, Vector)> {
        match self {
            Constraints::Affine { a, b, f } => {
                if a.nrows() > 0 && a.ncols() != n {
                    return Err(Error::Dimension(format!("A has {} columns, expected {n}", a.ncols())));
                }
                if f.ncols() != u.len() && f.nrows() > 0 {
                    return Err(Error::Dimension(format!("F has {} columns but u has {}", f.ncols(), u.len())));
                }
                let mut rhs = Vector::from_column_slice(b);
                for i in 0..b.len() {
                    for j in 0..f.ncols() {
                        rhs[i] += f[(i, j)] * u[j];
                    }
                }
                Ok((if a.nrows() == 0 { Mat::zeros(0, n) } else { a.clone() }, rhs))
            }
            Constraints::NonNegative { n: cn } => {
                if *cn != n {
                    return Err(Error::Dimension(format!("orthant of size {cn}, expected {n}")));
                }
                Ok((-Mat::identity(n, n), Vector::zeros(n)))
            }
        }
    }
}

/// Minimizer of `f(u, ·, c)` over the constraints.
pub fn template_forward_solve(
    t: &ObjectiveTemplate,
    c: &[f64],
    constraints: &Constraints,
    u: &[f64],
) -> Result<Vec<f64>> {
    template_forward_solve_with_duals(t, c, constraints, u).map(|(x, _)| x)
}

/// Like [`template_forward_solve`] but also returns the constraint
/// multipliers (convention `∇f + Σ λ_i ∇g_i = 0`).
pub fn template_forward_solve_with_duals(
    t: &ObjectiveTemplate,
    c: &[f64],
    constraints: &Constraints,
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    t.check_coefficients(c)?;
    if let Some(sep) = separable(t, c, constraints, u)? {
        return solve_separable(&sep);
    }
    let n = t.n;
    let mut p = Mat::zeros(n, n);
    let mut d = Vector::zeros(n);
    for (w, term) in t.weighted(c) {
        match term {
            Term::Quadratic(m) => p += (m + m.transpose()) * w,
            Term::Linear(psi) => {
                let v = psi.eval(u);
                if v.len() != n {
                    return Err(Error::Dimension(format!("ψ(u) has {} entries, expected {n}", v.len())));
                }
                d += Vector::from_vec(v) * w;
            }
            Term::Sqrt(_) => {
                return Err(Error::InvalidInput(
                    "square-root terms require separable terms and the nonnegative orthant".into(),
                ))
            }
        }
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("linear coefficient is not finite at this u".into()));
    }
    let (a, rhs) = constraints.instantiate(n, u)?;
    let qp = QpProblem::new(p, d, a, rhs).map_err(|e| match e {
        Error::NotPositiveDefinite(_) => {
            Error::NonConvex(format!("Hessian of '{}' is not positive definite at c = {c:?}", t.name))
        }
        other => other,
    })?;
    let res = solve_qp(&qp, DEFAULT_TOL)?;
    match res.status {
        Status::Optimal => Ok((res.x, res.lambda)),
        Status::Infeasible => Err(Error::Infeasible(format!("constraints are empty at u = {u:?}"))),
        Status::Unbounded => Err(Error::Unbounded(format!("objective unbounded at u = {u:?}"))),
    }
}

/// Per-coordinate data of `a x² + l x + s √x` on `x ≥ 0`.
struct Separable {
    a: Vec<f64>,
    l: Vec<f64>,
    s: Vec<f64>,
}

fn separable(t: &ObjectiveTemplate, c: &[f64], constraints: &Constraints, u: &[f64]) -> Result<Option<Separable>> {
    if !matches!(constraints, Constraints::NonNegative { .. }) {
        return Ok(None);
    }
    let n = t.n;
    let diagonal = |m: &Mat| (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0));
    if t.weighted(c).any(|(_, term)| matches!(term, Term::Quadratic(m) if !diagonal(m))) {
        return Ok(None);
    }
    let mut sep = Separable { a: vec![0.0; n], l: vec![0.0; n], s: vec![0.0; n] };
    for (w, term) in t.weighted(c) {
        match term {
            Term::Quadratic(m) => (0..n).for_each(|i| sep.a[i] += w * m[(i, i)]),
            Term::Linear(psi) => {
                let v = psi.eval(u);
                if v.len() != n {
                    return Err(Error::Dimension(format!("ψ(u) has {} entries, expected {n}", v.len())));
                }
                (0..n).for_each(|i| sep.l[i] += w * v[i]);
            }
            Term::Sqrt(v) => (0..n).for_each(|i| sep.s[i] += w * v[i]),
        }
    }
    for i in 0..n {
        if sep.a[i] < 0.0 || sep.s[i] > 0.0 {
            return Err(Error::NonConvex(format!(
                "coordinate {i} of '{}' has quadratic weight {} and square-root weight {}",
                t.name, sep.a[i], sep.s[i]
            )));
        }
        if !(sep.a[i].is_finite() && sep.l[i].is_finite() && sep.s[i].is_finite()) {
            return Err(Error::Numerical(format!("coordinate {i} has a non-finite coefficient")));
        }
    }
    Ok(Some(sep))
}

fn solve_separable(sep: &Separable) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sep.a.len();
    let mut x = vec![0.0; n];
    let mut lambda = vec![0.0; n];
    for i in 0..n {
        let (a, l, w) = (sep.a[i], sep.l[i], -sep.s[i]);
        let unbounded = || Error::Unbounded(format!("coordinate {i} decreases without bound"));
        if w > 0.0 {
            if a == 0.0 {
                if l <= 0.0 {
                    return Err(unbounded());
                }
                let r = w / (2.0 * l);
                x[i] = r * r;
            } else {
                x[i] = sqrt_cubic_root(a, l, w).powi(2);
            }
        } else if a > 0.0 {
            x[i] = (-l / (2.0 * a)).max(0.0);
            if x[i] == 0.0 {
                lambda[i] = l;
            }
        } else if l >= 0.0 {
            lambda[i] = l;
        } else {
            return Err(unbounded());
        }
    }
    Ok((x, lambda))
}

/// Positive root `s` of `2a s³ + l s − w/2` for `a, w > 0` (`x = s²` is
/// the stationary point of `a x² + l x − w √x`).
fn sqrt_cubic_root(a: f64, l: f64, w: f64) -> f64 {
    let g = |s: f64| 2.0 * a * s * s * s + l * s - 0.5 * w;
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
