//! ε-SVR trained by sequential minimal optimization on the dual
//!
//! `min ½ (α−α*)ᵀK(α−α*) + ε Σ(α+α*) − yᵀ(α−α*)`
//! `s.t. Σ(α−α*) = 0, 0 ≤ α, α* ≤ C`,
//!
//! using second-order working-set selection.

use crate::error::Result;
use crate::pop::Dataset;

use super::column;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row-major RBF Gram matrix.
pub(crate) fn kernel_matrix(u: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let k = u.len();
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        m[i * k + i] = 1.0;
        for j in 0..i {
            let v = (-gamma * sq_dist(&u[i], &u[j])).exp();
            m[i * k + j] = v;
            m[j * k + i] = v;
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct SvrModel {
    inputs: Vec<Vec<f64>>,
    /// `β = α − α*` per training point.
    beta: Vec<f64>,
    /// `(α, α*)` per training point.
    pairs: Vec<(f64, f64)>,
    bias: f64,
    gamma: f64,
    c: f64,
    epsilon: f64,
    targets: Vec<f64>,
    iterations: usize,
}

/// Dual solver over the training points `idx` of a shared Gram matrix.
struct Smo<'a> {
    kern: &'a [f64],
    stride: usize,
    idx: &'a [usize],
    y: &'a [f64],
    c: f64,
    eps: f64,
    /// `[α; α*]`
    a: Vec<f64>,
    grad: Vec<f64>,
}

impl Smo<'_> {
    fn l(&self) -> usize {
        self.idx.len()
    }

    fn sign(&self, t: usize) -> f64 {
        if t < self.l() {
            1.0
        } else {
            -1.0
        }
    }

    fn k(&self, s: usize, t: usize) -> f64 {
        let l = self.l();
        self.kern[self.idx[s % l] * self.stride + self.idx[t % l]]
    }

    fn q(&self, s: usize, t: usize) -> f64 {
        self.sign(s) * self.sign(t) * self.k(s, t)
    }

    fn init_gradient(&mut self) {
        let l = self.l();
        let beta: Vec<f64> = (0..l).map(|p| self.a[p] - self.a[p + l]).collect();
        for t in 0..2 * l {
            let p = t % l;
            let kb: f64 = (0..l).map(|r| self.kern[self.idx[p] * self.stride + self.idx[r]] * beta[r]).sum();
            self.grad[t] = self.sign(t) * kb + self.eps - self.sign(t) * self.y[p];
        }
    }

    fn up(&self, t: usize) -> bool {
        if self.sign(t) > 0.0 {
            self.a[t] < self.c
        } else {
            self.a[t] > 0.0
        }
    }

    fn low(&self, t: usize) -> bool {
        if self.sign(t) > 0.0 {
            self.a[t] > 0.0
        } else {
            self.a[t] < self.c
        }
    }

    fn select(&self, tol: f64) -> Option<(usize, usize)> {
        let n = 2 * self.l();
        let mut gmax = f64::NEG_INFINITY;
        let mut i = None;
        for t in 0..n {
            if self.up(t) {
                let v = -self.sign(t) * self.grad[t];
                if v >= gmax {
                    gmax = v;
                    i = Some(t);
                }
            }
        }
        let i = i?;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = None;
        let mut obj_min = f64::INFINITY;
        let qii = self.k(i, i);
        for t in 0..n {
            if !self.low(t) {
                continue;
            }
            let v = self.sign(t) * self.grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = qii + self.k(t, t) - 2.0 * self.k(i, t);
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -diff * diff / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    best = Some(t);
                }
            }
        }
        if gmax + gmax2 < tol {
            return None;
        }
        best.map(|j| (i, j))
    }

    fn step(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (oi, oj) = (self.a[i], self.a[j]);
        let qij = self.q(i, j);
        let (qii, qjj) = (self.k(i, i), self.k(j, j));
        let (mut ai, mut aj) = (oi, oj);
        if self.sign(i) != self.sign(j) {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.a[i] = ai;
        self.a[j] = aj;
        let (di, dj) = (ai - oi, aj - oj);
        for t in 0..2 * self.l() {
            self.grad[t] += self.q(i, t) * di + self.q(j, t) * dj;
        }
    }

    fn solve(&mut self, tol: f64) -> usize {
        let max_iter = (100 * 2 * self.l()).max(10_000_000);
        let mut it = 0;
        while it < max_iter {
            let Some((i, j)) = self.select(tol) else { break };
            self.step(i, j);
            it += 1;
        }
        if it == max_iter {
            log::warn!("SMO stopped after {it} iterations without reaching tolerance {tol}");
        }
        it
    }

    /// Offset `b` of `f(u) = Σ βₚ k(uₚ, u) + b`: the average over free
    /// variables, or the midpoint of the interval the bounded ones allow.
    fn bias(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free, mut sum) = (0usize, 0.0);
        for t in 0..2 * self.l() {
            let yg = self.sign(t) * self.grad[t];
            let s = self.sign(t);
            if self.a[t] >= self.c {
                if s < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.a[t] <= 0.0 {
                if s > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum += yg;
            }
        }
        let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
        -rho
    }
}

impl SvrModel {
    /// Fits on the rows `u` with Gram matrix `kern` (row-major, `u.len()`
    /// square). `warm` is an optional feasible starting `β`.
    pub(crate) fn fit(u: &[Vec<f64>], y: &[f64], kern: &[f64], p: SvrParams, warm: Option<&[f64]>) -> SvrModel {
        let idx: Vec<usize> = (0..u.len()).collect();
        Self::fit_subset(u, y, kern, u.len(), &idx, p, warm)
    }

    fn fit_subset(
        u: &[Vec<f64>],
        y: &[f64],
        kern: &[f64],
        stride: usize,
        idx: &[usize],
        p: SvrParams,
        warm: Option<&[f64]>,
    ) -> SvrModel {
        let SvrParams { c, epsilon, gamma, tol } = p;
        let l = idx.len();
        let targets: Vec<f64> = idx.iter().map(|&p| y[p]).collect();
        let mut a = vec![0.0; 2 * l];
        if let Some(beta) = warm {
            for p in 0..l {
                a[p] = beta[p].max(0.0);
                a[p + l] = (-beta[p]).max(0.0);
            }
        }
        let mut smo = Smo { kern, stride, idx, y: &targets, c, eps: epsilon, a, grad: vec![0.0; 2 * l] };
        smo.init_gradient();
        let iterations = smo.solve(tol);
        let bias = smo.bias();
        let beta = (0..l).map(|p| smo.a[p] - smo.a[p + l]).collect();
        let pairs = (0..l).map(|p| (smo.a[p], smo.a[p + l])).collect();
        SvrModel {
            inputs: idx.iter().map(|&p| u[p].clone()).collect(),
            beta,
            pairs,
            bias,
            gamma,
            c,
            epsilon,
            targets,
            iterations,
        }
    }

    pub fn predict(&self, u: &[f64]) -> f64 {
        self.inputs
            .iter()
            .zip(&self.beta)
            .filter(|(_, b)| **b != 0.0)
            .map(|(x, b)| b * (-self.gamma * sq_dist(x, u)).exp())
            .sum::<f64>()
            + self.bias
    }

    /// `β = α − α*`.
    pub fn dual_coefficients(&self) -> &[f64] {
        &self.beta
    }

    /// Dual variables `(α, α*)`, each in `[0, C]`.
    pub fn dual_pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Largest complementary-slackness violation over the training points:
    /// `α (ε − r)₊ + α* (ε + r)₊` and `(C − α)(r − ε)₊ + (C − α*)(−r − ε)₊`
    /// with residual `r = y − f(u)`.
    pub fn complementarity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (p, x) in self.inputs.iter().enumerate() {
            let r = self.targets[p] - self.predict(x);
            let (a, a_star) = self.pairs[p];
            let inside = a * (self.epsilon - r).max(0.0) + a_star * (self.epsilon + r).max(0.0);
            let outside = (self.c - a) * (r - self.epsilon).max(0.0) + (self.c - a_star) * (-r - self.epsilon).max(0.0);
            worst = worst.max(inside).max(outside);
        }
        worst
    }
}

/// Refits every fold from the full-data dual with the held-out point's
/// coefficient spread over the others to keep `Σβ = 0`.
pub(crate) fn loo(data: &Dataset, p: SvrParams) -> Result<Vec<Vec<f64>>> {
    let k = data.len();
    let c = p.c;
    let kern = kernel_matrix(&data.u, p.gamma);
    let mut out = vec![vec![0.0; data.n()]; k];
    for j in 0..data.n() {
        let y = column(data, j);
        let full = SvrModel::fit(&data.u, &y, &kern, p, None);
        for fold in 0..k {
            let idx: Vec<usize> = (0..k).filter(|&p| p != fold).collect();
            let mut warm: Vec<f64> = idx.iter().map(|&p| full.beta[p]).collect();
            let mut excess = full.beta[fold];
            for b in warm.iter_mut() {
                if excess == 0.0 {
                    break;
                }
                let room = if excess > 0.0 { c - *b } else { -c - *b };
                let shift = if excess > 0.0 { excess.min(room) } else { excess.max(room) };
                *b += shift;
                excess -= shift;
            }
            let m = SvrModel::fit_subset(&data.u, &y, &kern, k, &idx, p, Some(&warm));
            out[fold][j] = m.predict(&data.u[fold]);
        }
    }
    Ok(out)
}
