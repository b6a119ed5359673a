#![allow(dead_code)]

use std::collections::BTreeSet;

use ioml::pop::PopInstance;
use ioml::regions::label_at;
use ioml::solver::linalg::{Mat, Vector};
use ioml::solver::QpProblem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform(rng: &mut ChaCha8Rng, bx: &[(f64, f64)]) -> Vec<f64> {
    bx.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()
}

/// Active-set labels at the cell centers of a `side × side` lattice.
pub fn oracle_labels(pop: &PopInstance, side: usize) -> BTreeSet<Vec<usize>> {
    let bx = pop.u_box();
    let mut labels = BTreeSet::new();
    for i in 0..side {
        for j in 0..side {
            let u = [
                bx[0].0 + (i as f64 + 0.5) * (bx[0].1 - bx[0].0) / side as f64,
                bx[1].0 + (j as f64 + 0.5) * (bx[1].1 - bx[1].0) / side as f64,
            ];
            labels.insert(label_at(pop, &u).unwrap());
        }
    }
    labels
}

pub fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QpProblem {
    let r = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let p = r.transpose() * &r + Mat::identity(n, n) * 0.2;
    let d = Vector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
    let a = Mat::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    // feasible at a random point inside [-1, 1]^n
    let x0 = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let b = &a * &x0 + Vector::from_fn(m, |_, _| rng.gen_range(0.1..2.0));
    QpProblem::new(p, d, a, b).unwrap()
}

/// Minimum of a 2-variable QP found geometrically: the optimum is either the
/// unconstrained minimizer or lies on one of the constraint lines, where the
/// objective is a 1-D quadratic over a feasible segment.
pub fn edge_scan_minimum(qp: &QpProblem) -> f64 {
    let feasible = |x: &[f64]| qp.constraint_values(x).iter().all(|&v| v <= 1e-9);
    let mut best = f64::INFINITY;
    let free = qp.p().clone().lu().solve(&(-qp.d())).unwrap();
    if feasible(free.as_slice()) {
        best = qp.objective(free.as_slice());
    }
    let (a, b) = (qp.a(), qp.b());
    for i in 0..a.nrows() {
        let (a0, a1) = (a[(i, 0)], a[(i, 1)]);
        let nn = a0 * a0 + a1 * a1;
        let base = [a0 * b[i] / nn, a1 * b[i] / nn];
        let dir = [-a1, a0];
        let (mut lo, mut hi) = (-1e6, 1e6);
        for k in (0..a.nrows()).filter(|&k| k != i) {
            let slope = a[(k, 0)] * dir[0] + a[(k, 1)] * dir[1];
            let room = b[k] - a[(k, 0)] * base[0] - a[(k, 1)] * base[1];
            if slope.abs() < 1e-14 {
                if room < 0.0 {
                    hi = lo - 1.0;
                }
            } else if slope > 0.0 {
                hi = f64::min(hi, room / slope);
            } else {
                lo = f64::max(lo, room / slope);
            }
        }
        if lo > hi {
            continue;
        }
        let at = |t: f64| [base[0] + t * dir[0], base[1] + t * dir[1]];
        let (f0, fp, fm) = (qp.objective(&at(0.0)), qp.objective(&at(1.0)), qp.objective(&at(-1.0)));
        let curv = (fp + fm - 2.0 * f0) / 2.0;
        let slope = (fp - fm) / 2.0;
        let t = (-slope / (2.0 * curv)).clamp(lo, hi);
        best = best.min(qp.objective(&at(t)));
    }
    best
}

/// Random bounded LP in 3 variables as `(cost, rows, rhs)`: the box
/// `[-5, 5]³` plus six random cuts that keep the origin feasible.
pub fn random_lp3(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<[f64; 3]>, Vec<f64>) {
    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        rows.push(e);
        rhs.push(5.0);
        e[j] = -1.0;
        rows.push(e);
        rhs.push(5.0);
    }
    for _ in 0..6 {
        rows.push([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        rhs.push(rng.gen_range(0.5..3.0));
    }
    let cost = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (cost, rows, rhs)
}

fn solve3(m: &[[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let mat = Mat::from_fn(3, 3, |i, j| m[i][j]);
    let x = mat.lu().solve(&Vector::from_column_slice(&r))?;
    x.iter().all(|v| v.is_finite()).then(|| [x[0], x[1], x[2]])
}

/// Best objective over all feasible intersections of three constraint planes.
pub fn vertex_minimum(cost: &[f64], rows: &[[f64; 3]], rhs: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    let r = rows.len();
    for i in 0..r {
        for j in i + 1..r {
            for k in j + 1..r {
                let Some(v) = solve3(&[rows[i], rows[j], rows[k]], [rhs[i], rhs[j], rhs[k]]) else { continue };
                let feasible =
                    rows.iter().zip(rhs).all(|(row, &b)| row[0] * v[0] + row[1] * v[1] + row[2] * v[2] <= b + 1e-9);
                if feasible {
                    best = best.min(cost[0] * v[0] + cost[1] * v[1] + cost[2] * v[2]);
                }
            }
        }
    }
    best
}
