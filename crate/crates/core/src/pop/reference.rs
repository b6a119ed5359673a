//! Fixed problem families: the consumer utility problem, the two-variable
//! reference TPOP, its u-dependence ladder and its ladder of objective
//! priors.

use super::template::{Constraints, LinearCoef, ObjectiveTemplate, Term};
use super::{box_corners_and_center, ParamBox, PopInstance};
use crate::error::{Error, Result};
use crate::solver::linalg::Mat;

pub const REF_Q: [f64; 2] = [1.3040, 19.4545];
pub const REF_A: [[f64; 2]; 4] = [[0.2294, 0.0], [0.0, 0.1890], [0.5436, -0.5889], [0.2210, 0.0]];
pub const REF_B: [f64; 4] = [2.5237, 4.2679, 2.8088, 3.2535];
pub const REF_F: [[f64; 2]; 4] = [[0.0, -0.9733], [-0.8658, -0.4634], [-0.4757, -0.3624], [-0.9753, 0.0]];

/// Sampling box of the ladder experiments: `u₁ ∈ (4, 6)`, `u₂ ∈ (−6, −4)`.
pub fn ladder_box() -> ParamBox {
    vec![(4.0, 6.0), (-6.0, -4.0)]
}

/// The reference instance `1.3040 x₁² + (1+u₁) x₁ + 19.4545 x₂² +
/// (u₂−u₁+1) x₂` over `[−10, 10]²`.
pub fn reference_instance() -> PopInstance {
    reference_instance_over(vec![(-10.0, 10.0); 2]).expect("reference instance is feasible")
}

pub fn reference_instance_over(u_box: ParamBox) -> Result<PopInstance> {
    let q = Mat::from_diagonal(&nalgebra::DVector::from_column_slice(&REF_Q));
    let h = Mat::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
    PopInstance::new(q, h, vec![1.0, 1.0], ref_a(), REF_B.to_vec(), ref_f(), u_box)
}

fn ref_a() -> Mat {
    Mat::from_fn(4, 2, |i, j| REF_A[i][j])
}

fn ref_f() -> Mat {
    Mat::from_fn(4, 2, |i, j| REF_F[i][j])
}

pub fn reference_constraints() -> Constraints {
    Constraints::Affine { a: ref_a(), b: REF_B.to_vec(), f: ref_f() }
}

fn unit_quadratics() -> Vec<Term> {
    (0..2)
        .map(|i| {
            let mut m = Mat::zeros(2, 2);
            m[(i, i)] = 1.0;
            Term::Quadratic(m)
        })
        .collect()
}

/// Smallest admissible curvature weight. A zero weight leaves the
/// forward problem without a unique minimizer.
pub const MIN_CURVATURE: f64 = 1e-6;

/// Template whose unknowns are the two quadratic weights.
fn quadratic_unknowns(name: &str, f0: Vec<Term>) -> ObjectiveTemplate {
    ObjectiveTemplate::new(name, 2, f0, unit_quadratics(), vec![(MIN_CURVATURE, f64::INFINITY); 2])
        .expect("well-formed template")
}

fn mean_of(rows: &[Vec<f64>], f: impl Fn(&[f64]) -> [f64; 2]) -> Vec<f64> {
    let mut acc = [0.0; 2];
    for r in rows {
        let v = f(r);
        acc[0] += v[0];
        acc[1] += v[1];
    }
    let k = rows.len().max(1) as f64;
    vec![acc[0] / k, acc[1] / k]
}

/// Form of the linear coefficients `Ψ(u)` of the reference objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    Linear,
    Rational,
    HighDegree,
}

impl Dependence {
    pub const ALL: [Dependence; 3] = [Dependence::Linear, Dependence::Rational, Dependence::HighDegree];

    pub fn name(self) -> &'static str {
        match self {
            Dependence::Linear => "linear",
            Dependence::Rational => "rational",
            Dependence::HighDegree => "high-degree",
        }
    }

    pub fn psi(self, u: &[f64]) -> [f64; 2] {
        let (u1, u2) = (u[0], u[1]);
        match self {
            Dependence::Linear => [1.0 + u1, u2 - u1 + 1.0],
            Dependence::Rational => [(1.0 + u1) / (1.0 - u1), (u2 - u1 + 1.0).powi(3) / (u2 - 1.0).powi(2)],
            Dependence::HighDegree => [u1 / (1.0 - 2.0 * u1).powi(4), (u2 - u1).powi(3) / (3.0 * u2 - 5.0).powi(5)],
        }
    }

    /// Affine denominators of `Ψ`.
    fn denominators(self, u: &[f64]) -> Vec<f64> {
        match self {
            Dependence::Linear => Vec::new(),
            Dependence::Rational => vec![1.0 - u[0], u[1] - 1.0],
            Dependence::HighDegree => vec![1.0 - 2.0 * u[0], 3.0 * u[1] - 5.0],
        }
    }

    /// Fails if a denominator of `Ψ` vanishes somewhere on `bx`. The
    /// denominators are affine, so a constant nonzero sign at the corners
    /// settles it.
    pub fn check_box(self, bx: &[(f64, f64)]) -> Result<()> {
        let pts = box_corners_and_center(bx);
        let first = self.denominators(&pts[0]);
        for p in &pts {
            for (i, (&d, &d0)) in self.denominators(p).iter().zip(&first).enumerate() {
                if d == 0.0 || d.signum() != d0.signum() {
                    return Err(Error::InvalidInput(format!(
                        "denominator {i} of the {} coefficients vanishes on the box",
                        self.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact objective; the unknowns are the quadratic weights, true value
    /// [`REF_Q`].
    pub fn perfect_template(self) -> ObjectiveTemplate {
        let f0 = vec![Term::Linear(LinearCoef::function(move |u| self.psi(u).to_vec()))];
        quadratic_unknowns(&format!("{}-perfect", self.name()), f0)
    }

    /// `Ψ(u)` replaced by its average over the training parameters.
    pub fn imperfect_template(self, train_u: &[Vec<f64>]) -> ObjectiveTemplate {
        let mean = mean_of(train_u, |u| self.psi(u));
        quadratic_unknowns(&format!("{}-imperfect", self.name()), vec![Term::Linear(LinearCoef::constant(mean))])
    }
}

/// Objective priors of decreasing correctness for the reference problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prior {
    /// `(1+u₁) x₁ + (u₂−u₁+1) x₂`
    Perfect,
    /// `x₁ + (u₂−u₁) x₂`
    DropConstants,
    /// `x₁ − u₁ x₂`
    DropU2,
    /// training means of the two true coefficients
    MeanBased,
    /// no linear terms
    NoLinear,
}

impl Prior {
    pub const ALL: [Prior; 5] =
        [Prior::Perfect, Prior::DropConstants, Prior::DropU2, Prior::MeanBased, Prior::NoLinear];

    pub fn name(self) -> &'static str {
        match self {
            Prior::Perfect => "perfect",
            Prior::DropConstants => "drop-constants",
            Prior::DropU2 => "drop-u2",
            Prior::MeanBased => "mean-based",
            Prior::NoLinear => "no-linear",
        }
    }

    /// Template with quadratic unknowns; `train_u` feeds the mean-based row.
    pub fn template(self, train_u: &[Vec<f64>]) -> ObjectiveTemplate {
        let h = |rows: &[f64]| Mat::from_row_slice(2, 2, rows);
        let f0 = match self {
            Prior::Perfect => {
                vec![Term::Linear(LinearCoef::Affine { h: h(&[1.0, 0.0, -1.0, 1.0]), c: vec![1.0, 1.0] })]
            }
            Prior::DropConstants => {
                vec![Term::Linear(LinearCoef::Affine { h: h(&[0.0, 0.0, -1.0, 1.0]), c: vec![1.0, 0.0] })]
            }
            Prior::DropU2 => {
                vec![Term::Linear(LinearCoef::Affine { h: h(&[0.0, 0.0, -1.0, 0.0]), c: vec![1.0, 0.0] })]
            }
            Prior::MeanBased => {
                vec![Term::Linear(LinearCoef::constant(mean_of(train_u, |u| Dependence::Linear.psi(u))))]
            }
            Prior::NoLinear => Vec::new(),
        };
        quadratic_unknowns(self.name(), f0)
    }
}

/// Consumer problem `min pᵀx − U(x)` over `x ≥ 0` with prices drawn from
/// `price_range`; the parameter vector is the price vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityInstance {
    pub n: usize,
    pub price_range: (f64, f64),
}

impl UtilityInstance {
    pub fn new(n: usize) -> Self {
        UtilityInstance { n, price_range: (5.0, 20.0) }
    }

    pub fn price_box(&self) -> ParamBox {
        vec![self.price_range; self.n]
    }

    pub fn constraints(&self) -> Constraints {
        Constraints::NonNegative { n: self.n }
    }

    fn price_term(&self) -> Term {
        Term::Linear(LinearCoef::Affine { h: Mat::identity(self.n, self.n), c: vec![0.0; self.n] })
    }

    /// `U(x) = Σ c_i √x_i`, `c ≥ 0`. The truth is `c = 1`.
    pub fn perfect_template(&self) -> ObjectiveTemplate {
        let n = self.n;
        let basis = (0..n)
            .map(|i| {
                let mut w = vec![0.0; n];
                w[i] = -1.0;
                Term::Sqrt(w)
            })
            .collect();
        ObjectiveTemplate::new("utility-perfect", n, vec![self.price_term()], basis, vec![(0.0, f64::INFINITY); n])
            .expect("well-formed template")
    }

    pub fn true_coefficients(&self) -> Vec<f64> {
        vec![1.0; self.n]
    }

    /// `U(x) = Σ q x_i² + 2 r x_i` with unknowns `(q, r)`, `q < 0`.
    pub fn imperfect_template(&self) -> ObjectiveTemplate {
        let n = self.n;
        let basis = vec![Term::Quadratic(-Mat::identity(n, n)), Term::Linear(LinearCoef::constant(vec![-2.0; n]))];
        ObjectiveTemplate::new(
            "utility-imperfect",
            n,
            vec![self.price_term()],
            basis,
            vec![(f64::NEG_INFINITY, -MIN_CURVATURE), (f64::NEG_INFINITY, f64::INFINITY)],
        )
        .expect("well-formed template")
    }
}
