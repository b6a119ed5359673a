use rand::Rng;
use serde::Deserialize;

use super::template::{Constraints, LinearCoef, ObjectiveTemplate, Term};
use super::{box_contains, box_corners_and_center, check_box, ParamBox};
use crate::error::{Error, Result};
use crate::num::format_f64;
use crate::seed;
use crate::solver::linalg::{self, Mat, Vector};
use crate::solver::{solve_lp, solve_qp, LpProblem, QpProblem, SolveResult, Status, DEFAULT_TOL};

const MAX_GENERATION_ATTEMPTS: u64 = 100;

/// Parametric QP `min (Qx + Hu + c)ᵀx  s.t.  A x ≤ b + F u`, `u ∈ u_box`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopInstance {
    q_mat: Mat,
    h: Mat,
    c: Vec<f64>,
    a: Mat,
    b: Vec<f64>,
    f: Mat,
    u_box: ParamBox,
}

impl PopInstance {
    /// Validates dimensions, `Q ≻ 0`, the box, and feasibility at the box
    /// corners and center.
    pub fn new(q_mat: Mat, h: Mat, c: Vec<f64>, a: Mat, b: Vec<f64>, f: Mat, u_box: ParamBox) -> Result<Self> {
        let n = c.len();
        let m = b.len();
        let q = u_box.len();
        if n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        check_box(&u_box)?;
        let shape = |name: &str, mat: &Mat, r: usize, cols: usize| {
            if mat.nrows() != r || mat.ncols() != cols {
                Err(Error::Dimension(format!("{name} is {}x{}, expected {r}x{cols}", mat.nrows(), mat.ncols())))
            } else {
                Ok(())
            }
        };
        shape("Q", &q_mat, n, n)?;
        shape("H", &h, n, q)?;
        shape("A", &a, m, n)?;
        shape("F", &f, m, q)?;
        let finite = q_mat.iter().chain(h.iter()).chain(&c).chain(a.iter()).chain(&b).chain(f.iter());
        if !finite.into_iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("instance data must be finite".into()));
        }
        let sym = linalg::symmetrize(&q_mat);
        linalg::cholesky(&sym).map_err(|_| Error::NotPositiveDefinite("Q".into()))?;
        let pop = PopInstance { q_mat, h, c, a, b, f, u_box };
        pop.certify_feasible()?;
        Ok(pop)
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn q(&self) -> usize {
        self.u_box.len()
    }

    pub fn q_mat(&self) -> &Mat {
        &self.q_mat
    }

    pub fn h(&self) -> &Mat {
        &self.h
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn f(&self) -> &Mat {
        &self.f
    }

    pub fn u_box(&self) -> &ParamBox {
        &self.u_box
    }

    /// Same instance over a different parameter box.
    pub fn with_box(&self, u_box: ParamBox) -> Result<Self> {
        PopInstance::new(
            self.q_mat.clone(),
            self.h.clone(),
            self.c.clone(),
            self.a.clone(),
            self.b.clone(),
            self.f.clone(),
            u_box,
        )
    }

    fn certify_feasible(&self) -> Result<()> {
        for u in box_corners_and_center(&self.u_box) {
            let rhs = self.rhs(&u);
            let lp = LpProblem::from_dense(&vec![0.0; self.n()], &self.a, rhs.as_slice())?;
            let res = solve_lp(&lp)?;
            if res.status != Status::Optimal {
                return Err(Error::Infeasible(format!("no feasible x at u = {u:?}")));
            }
        }
        Ok(())
    }

    fn check_u(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.q() {
            return Err(Error::Dimension(format!("u has {} entries, expected {}", u.len(), self.q())));
        }
        let tol = 1e-12 * (1.0 + u.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        if !box_contains(&self.u_box, u, tol) {
            return Err(Error::InvalidInput(format!("u = {u:?} lies outside the parameter box")));
        }
        Ok(())
    }

    /// `H u + c`.
    pub fn linear_cost(&self, u: &[f64]) -> Vector {
        &self.h * Vector::from_column_slice(u) + Vector::from_column_slice(&self.c)
    }

    /// `b + F u`.
    pub fn rhs(&self, u: &[f64]) -> Vector {
        Vector::from_column_slice(&self.b) + &self.f * Vector::from_column_slice(u)
    }

    /// QP at `u` with `P = Q + Qᵀ` and `d = H u + c`.
    pub fn instantiate_qp(&self, u: &[f64]) -> Result<QpProblem> {
        self.check_u(u)?;
        QpProblem::new(&self.q_mat + self.q_mat.transpose(), self.linear_cost(u), self.a.clone(), self.rhs(u))
    }

    pub fn forward_solve(&self, u: &[f64]) -> Result<SolveResult> {
        solve_qp(&self.instantiate_qp(u)?, DEFAULT_TOL)
    }

    /// Value of the instance objective at `(u, x)`.
    pub fn objective(&self, u: &[f64], x: &[f64]) -> f64 {
        let xv = Vector::from_column_slice(x);
        (&self.q_mat * &xv + self.linear_cost(u)).dot(&xv)
    }

    pub fn constraints(&self) -> Constraints {
        Constraints::Affine { a: self.a.clone(), b: self.b.clone(), f: self.f.clone() }
    }

    /// Template with the exact objective; the unknowns are the constant
    /// linear coefficients `c`.
    pub fn perfect_template(&self) -> ObjectiveTemplate {
        let n = self.n();
        let f0 = vec![
            Term::Quadratic(self.q_mat.clone()),
            Term::Linear(LinearCoef::Affine { h: self.h.clone(), c: vec![0.0; n] }),
        ];
        linear_unknowns("pop-perfect", n, f0)
    }

    /// Template with `H u` frozen at `H ū`; the unknowns are again `c`.
    pub fn imperfect_template(&self, u_bar: &[f64]) -> ObjectiveTemplate {
        let n = self.n();
        let hu: Vec<f64> = (&self.h * Vector::from_column_slice(u_bar)).iter().cloned().collect();
        let f0 = vec![Term::Quadratic(self.q_mat.clone()), Term::Linear(LinearCoef::constant(hu))];
        linear_unknowns("pop-imperfect", n, f0)
    }

    pub fn to_json(&self) -> String {
        fn arr(v: &[f64]) -> String {
            let items: Vec<String> = v.iter().map(|&x| format_f64(x)).collect();
            format!("[{}]", items.join(", "))
        }
        fn mat(m: &Mat) -> String {
            let rows: Vec<String> =
                (0..m.nrows()).map(|i| arr(&(0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>())).collect();
            format!("[{}]", rows.join(", "))
        }
        let boxes: Vec<String> = self.u_box.iter().map(|&(lo, hi)| arr(&[lo, hi])).collect();
        format!(
            "{{\n  \"n\": {},\n  \"m\": {},\n  \"q\": {},\n  \"Q\": {},\n  \"H\": {},\n  \"c\": {},\n  \"A\": {},\n  \"b\": {},\n  \"F\": {},\n  \"u_box\": [{}]\n}}\n",
            self.n(),
            self.m(),
            self.q(),
            mat(&self.q_mat),
            mat(&self.h),
            arr(&self.c),
            mat(&self.a),
            arr(&self.b),
            mat(&self.f),
            boxes.join(", ")
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawInstance = serde_json::from_str(s)?;
        if raw.c.len() != raw.n || raw.b.len() != raw.m || raw.u_box.len() != raw.q {
            return Err(Error::Dimension(format!(
                "declared n={}, m={}, q={} but c, b, u_box have {}, {}, {} entries",
                raw.n,
                raw.m,
                raw.q,
                raw.c.len(),
                raw.b.len(),
                raw.u_box.len()
            )));
        }
        let q_mat = linalg::mat_from_rows(&raw.q_mat, raw.n)?;
        let h = linalg::mat_from_rows(&raw.h, raw.q)?;
        let a = linalg::mat_from_rows(&raw.a, raw.n)?;
        let f = linalg::mat_from_rows(&raw.f, raw.q)?;
        let u_box = raw.u_box.iter().map(|p| (p[0], p[1])).collect();
        PopInstance::new(q_mat, h, raw.c, a, raw.b, f, u_box)
    }
}

fn linear_unknowns(name: &str, n: usize, f0: Vec<Term>) -> ObjectiveTemplate {
    let basis = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            Term::Linear(LinearCoef::constant(e))
        })
        .collect();
    ObjectiveTemplate::new(name, n, f0, basis, vec![(f64::NEG_INFINITY, f64::INFINITY); n])
        .expect("well-formed template")
}

#[derive(Deserialize)]
struct RawInstance {
    n: usize,
    m: usize,
    q: usize,
    #[serde(rename = "Q")]
    q_mat: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    c: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    u_box: Vec<[f64; 2]>,
}

/// Random instance with `Q = RᵀR + 0.1 I`, entries of `R, H, c, A, F` in
/// `U[−1, 1]`, `b = A x₀ + s` with `x₀ ∈ U[−1,1]ⁿ`, `s ∈ U[0.5, 5]ᵐ`, over
/// the box `[−10, 10]^q`. Draws that fail the feasibility certificate are
/// resampled.
pub fn generate_random_pop(n: usize, m: usize, q: usize, seed: u64) -> Result<PopInstance> {
    if n == 0 || m == 0 || q == 0 {
        return Err(Error::InvalidInput(format!("dimensions must be positive, got n={n}, m={m}, q={q}")));
    }
    let mut last = None;
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = seed::rng(seed::derive(seed, &[attempt]));
        let mut uniform = |r: usize, c: usize, lo: f64, hi: f64| Mat::from_fn(r, c, |_, _| rng.gen_range(lo..hi));
        let r = uniform(n, n, -1.0, 1.0);
        let h = uniform(n, q, -1.0, 1.0);
        let c = uniform(n, 1, -1.0, 1.0);
        let a = uniform(m, n, -1.0, 1.0);
        let f = uniform(m, q, -1.0, 1.0);
        let x0 = uniform(n, 1, -1.0, 1.0);
        let s = uniform(m, 1, 0.5, 5.0);
        let q_mat = r.transpose() * &r + Mat::identity(n, n) * 0.1;
        let b = &a * x0 + s;
        match PopInstance::new(
            q_mat,
            h,
            c.iter().cloned().collect(),
            a,
            b.iter().cloned().collect(),
            f,
            vec![(-10.0, 10.0); q],
        ) {
            Ok(p) => return Ok(p),
            Err(e @ Error::Infeasible(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Infeasible(format!(
        "no feasible instance after {MAX_GENERATION_ATTEMPTS} draws: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let p = generate_random_pop(2, 4, 2, 11).unwrap();
        let back = PopInstance::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn rejects_outside_box() {
        let p = generate_random_pop(2, 3, 2, 1).unwrap();
        assert!(matches!(p.instantiate_qp(&[11.0, 0.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_bad_json_dimensions() {
        let s = r#"{"n":2,"m":0,"q":1,"Q":[[1,0],[0,1]],"H":[[0],[0]],"c":[0],"A":[],"b":[],"F":[],"u_box":[[0,1]]}"#;
        assert!(PopInstance::from_json(s).is_err());
    }
}
