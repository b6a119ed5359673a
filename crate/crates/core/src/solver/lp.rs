//! Two-phase primal simplex on a sparse tableau.
//!
//! Problems are stated as `min dᵀx` subject to `A x ≤ b`, `A_eq x = b_eq`
//! and per-variable bounds. Rows are stored sparsely: the residual LPs built
//! by the inverse fit are block-angular, and a dense tableau of that shape
//! would be mostly zeros.

use super::{SolveResult, Status, ACTIVE_TOL};
use crate::error::{Error, Result};
use crate::solver::linalg::Mat;

type SparseRow = Vec<(usize, f64)>;

const REDUCED_COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const PHASE1_TOL: f64 = 1e-7;

/// Entering-variable rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PricingRule {
    /// Lowest-index improving column, lowest basic index on ratio ties.
    #[default]
    Bland,
    /// Most negative reduced cost; falls back to Bland after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    n: usize,
    cost: Vec<f64>,
    le_rows: Vec<SparseRow>,
    le_rhs: Vec<f64>,
    eq_rows: Vec<SparseRow>,
    eq_rhs: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    pricing: PricingRule,
}

impl LpProblem {
    /// `min costᵀx` over free variables with no constraints yet.
    pub fn new(cost: Vec<f64>) -> Self {
        let n = cost.len();
        LpProblem {
            n,
            cost,
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            pricing: PricingRule::default(),
        }
    }

    /// `min dᵀx` s.t. `A x ≤ b` with free variables.
    pub fn from_dense(d: &[f64], a: &Mat, b: &[f64]) -> Result<Self> {
        if a.ncols() != d.len() && a.nrows() > 0 {
            return Err(Error::Dimension(format!("A has {} columns but d has {} entries", a.ncols(), d.len())));
        }
        if a.nrows() != b.len() {
            return Err(Error::Dimension(format!("A has {} rows but b has {} entries", a.nrows(), b.len())));
        }
        let mut lp = LpProblem::new(d.to_vec());
        for i in 0..a.nrows() {
            let row: SparseRow = (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0).map(|j| (j, a[(i, j)])).collect();
            lp.add_le(row, b[i])?;
        }
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_le(&self) -> usize {
        self.le_rows.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn with_pricing(mut self, rule: PricingRule) -> Self {
        self.pricing = rule;
        self
    }

    /// Makes every variable nonnegative.
    pub fn nonnegative(mut self) -> Self {
        for b in &mut self.bounds {
            *b = (0.0, f64::INFINITY);
        }
        self
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> Result<&mut Self> {
        if j >= self.n {
            return Err(Error::Dimension(format!("variable {j} out of range")));
        }
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidInput(format!("bad bounds [{lo}, {hi}] for x{j}")));
        }
        self.bounds[j] = (lo, hi);
        Ok(self)
    }

    pub fn add_le(&mut self, row: SparseRow, rhs: f64) -> Result<&mut Self> {
        let row = self.normalize_row(row, rhs)?;
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
        Ok(self)
    }

    pub fn add_eq(&mut self, row: SparseRow, rhs: f64) -> Result<&mut Self> {
        let row = self.normalize_row(row, rhs)?;
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        Ok(self)
    }

    fn normalize_row(&self, mut row: SparseRow, rhs: f64) -> Result<SparseRow> {
        if !rhs.is_finite() {
            return Err(Error::InvalidInput("non-finite right-hand side".into()));
        }
        row.sort_by_key(|&(j, _)| j);
        let mut out: SparseRow = Vec::with_capacity(row.len());
        for (j, v) in row {
            if j >= self.n {
                return Err(Error::Dimension(format!("column {j} out of range (n = {})", self.n)));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
            match out.last_mut() {
                Some((k, acc)) if *k == j => *acc += v,
                _ => out.push((j, v)),
            }
        }
        out.retain(|&(_, v)| v != 0.0);
        Ok(out)
    }

    fn le_activity(&self, x: &[f64]) -> Vec<f64> {
        self.le_rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = lo + x'
    Shift { col: usize, lo: f64 },
    /// x = hi - x'
    Mirror { col: usize, hi: f64 },
    /// x = x⁺ - x⁻
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: Vec<SparseRow>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    red: Vec<f64>,
    enterable: Vec<bool>,
    pricing: PricingRule,
}

fn get(row: &SparseRow, col: usize) -> Option<f64> {
    row.binary_search_by_key(&col, |&(j, _)| j).ok().map(|k| row[k].1)
}

/// `a + s·b`, dropping `skip` and negligible entries.
fn axpy_row(a: &SparseRow, s: f64, b: &SparseRow, skip: usize) -> SparseRow {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut k) = (0, 0);
    while i < a.len() || k < b.len() {
        let (col, val) = if k >= b.len() || (i < a.len() && a[i].0 < b[k].0) {
            i += 1;
            a[i - 1]
        } else if i >= a.len() || b[k].0 < a[i].0 {
            k += 1;
            (b[k - 1].0, s * b[k - 1].1)
        } else {
            i += 1;
            k += 1;
            (a[i - 1].0, a[i - 1].1 + s * b[k - 1].1)
        };
        if col != skip && val.abs() > DROP_TOL {
            out.push((col, val));
        }
    }
    out
}

impl Tableau {
    fn price(&self, cost: &[f64]) -> Vec<f64> {
        let mut red = cost.to_vec();
        for (r, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for &(j, v) in row {
                    red[j] -= cb * v;
                }
            }
        }
        for &b in &self.basis {
            red[b] = 0.0;
        }
        red
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let piv = get(&self.rows[r], e).expect("pivot element present");
        let inv = 1.0 / piv;
        for entry in self.rows[r].iter_mut() {
            entry.1 *= inv;
        }
        self.rhs[r] *= inv;
        // exact unit entry on the pivot column
        if let Ok(k) = self.rows[r].binary_search_by_key(&e, |&(j, _)| j) {
            self.rows[r][k].1 = 1.0;
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            if let Some(a) = get(&self.rows[i], e) {
                self.rows[i] = axpy_row(&self.rows[i], -a, &pivot_row, e);
                self.rhs[i] -= a * pivot_rhs;
                if self.rhs[i].abs() < 1e-11 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        let de = self.red[e];
        if de != 0.0 {
            for &(j, v) in &pivot_row {
                self.red[j] -= de * v;
            }
        }
        self.red[e] = 0.0;
        self.rows[r] = pivot_row;
        self.basis[r] = e;
    }

    fn choose_entering(&self, bland: bool) -> Option<usize> {
        if bland {
            (0..self.red.len()).find(|&j| self.enterable[j] && self.red[j] < -REDUCED_COST_TOL)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for (j, &d) in self.red.iter().enumerate() {
                if self.enterable[j] && d < -REDUCED_COST_TOL && best.map_or(true, |(_, b)| d < b) {
                    best = Some((j, d));
                }
            }
            best.map(|(j, _)| j)
        }
    }

    fn ratio_test(&self, e: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(a) = get(row, e) {
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i].max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if (ratio < br && !tie) || (tie && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// Runs simplex iterations; returns false when the LP is unbounded.
    fn optimize(&mut self, max_iter: usize) -> Result<bool> {
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let bland = match self.pricing {
                PricingRule::Bland => true,
                PricingRule::Dantzig => degenerate_run > 50,
            };
            let Some(e) = self.choose_entering(bland) else {
                return Ok(true);
            };
            let Some(r) = self.ratio_test(e) else {
                return Ok(false);
            };
            if self.rhs[r].abs() <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, e);
        }
        Err(Error::Numerical(format!("simplex exceeded {max_iter} iterations")))
    }
}

/// Solves the LP with a two-phase simplex.
///
/// Returns `Err` only for malformed input or an iteration blow-up;
/// infeasibility and unboundedness are reported through
/// [`SolveResult::status`].
pub fn solve_lp(lp: &LpProblem) -> Result<SolveResult> {
    let n = lp.n;
    let m = lp.le_rows.len();
    if lp.cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite cost".into()));
    }

    // Column layout: structural columns, then slacks, then artificials.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ncols, lo });
            if hi.is_finite() {
                upper_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Mirror { col: ncols, hi });
            ncols += 1;
        } else {
            maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
            ncols += 2;
        }
    }
    let n_struct = ncols;
    let mut cost = vec![0.0; n_struct];
    for (j, map) in maps.iter().enumerate() {
        let c = lp.cost[j];
        match *map {
            VarMap::Shift { col, .. } => cost[col] = c,
            VarMap::Mirror { col, .. } => cost[col] = -c,
            VarMap::Split { pos, neg } => {
                cost[pos] = c;
                cost[neg] = -c;
            }
        }
    }

    let substitute = |row: &SparseRow, rhs: f64| -> (SparseRow, f64) {
        let mut out: SparseRow = Vec::with_capacity(row.len() + 1);
        let mut rhs = rhs;
        for &(j, a) in row {
            match maps[j] {
                VarMap::Shift { col, lo } => {
                    out.push((col, a));
                    rhs -= a * lo;
                }
                VarMap::Mirror { col, hi } => {
                    out.push((col, -a));
                    rhs -= a * hi;
                }
                VarMap::Split { pos, neg } => {
                    out.push((pos, a));
                    out.push((neg, -a));
                }
            }
        }
        out.sort_by_key(|&(c, _)| c);
        (out, rhs)
    };

    // (row, rhs, has_slack, sign flip)
    struct StdRow {
        row: SparseRow,
        rhs: f64,
        slack: Option<usize>,
        sign: f64,
    }
    let mut std_rows: Vec<StdRow> = Vec::new();
    let mut slack_col = n_struct;
    for (row, &rhs) in lp.le_rows.iter().zip(&lp.le_rhs) {
        let (r, b) = substitute(row, rhs);
        std_rows.push(StdRow { row: r, rhs: b, slack: Some(slack_col), sign: 1.0 });
        slack_col += 1;
    }
    for &(col, ub) in &upper_rows {
        std_rows.push(StdRow { row: vec![(col, 1.0)], rhs: ub, slack: Some(slack_col), sign: 1.0 });
        slack_col += 1;
    }
    for (row, &rhs) in lp.eq_rows.iter().zip(&lp.eq_rhs) {
        let (r, b) = substitute(row, rhs);
        std_rows.push(StdRow { row: r, rhs: b, slack: None, sign: 1.0 });
    }
    ncols = slack_col;
    for sr in &mut std_rows {
        if let Some(s) = sr.slack {
            sr.row.push((s, 1.0));
        }
        if sr.rhs < 0.0 {
            sr.sign = -1.0;
            sr.rhs = -sr.rhs;
            for e in sr.row.iter_mut() {
                e.1 = -e.1;
            }
        }
    }

    // Crash basis: positive slacks, then structural singletons, then artificials.
    let mut col_count = vec![0usize; n_struct];
    for sr in &std_rows {
        for &(j, _) in &sr.row {
            if j < n_struct {
                col_count[j] += 1;
            }
        }
    }
    let nrows = std_rows.len();
    let mut used = vec![false; n_struct];
    let mut basis = vec![usize::MAX; nrows];
    let mut unit: Vec<(usize, f64)> = vec![(usize::MAX, 0.0); nrows];
    let mut n_art = 0usize;
    for (i, sr) in std_rows.iter().enumerate() {
        if let Some(s) = sr.slack {
            if sr.sign > 0.0 {
                basis[i] = s;
                unit[i] = (s, 1.0);
                continue;
            }
        }
        let singleton = sr.row.iter().find(|&&(j, v)| j < n_struct && col_count[j] == 1 && v > 0.0 && !used[j]);
        if let Some(&(j, v)) = singleton {
            used[j] = true;
            basis[i] = j;
            unit[i] = (j, v);
        } else {
            n_art += 1;
        }
    }
    let art_start = ncols;
    let mut art = art_start;
    for (i, sr) in std_rows.iter_mut().enumerate() {
        if basis[i] == usize::MAX {
            sr.row.push((art, 1.0));
            basis[i] = art;
            unit[i] = (art, 1.0);
            art += 1;
        }
    }
    ncols += n_art;
    cost.resize(ncols, 0.0);

    let mut rows = Vec::with_capacity(nrows);
    let mut rhs = Vec::with_capacity(nrows);
    for (i, sr) in std_rows.iter().enumerate() {
        let kappa = unit[i].1;
        let mut row = sr.row.clone();
        if kappa != 1.0 {
            for e in row.iter_mut() {
                e.1 /= kappa;
            }
        }
        rows.push(row);
        rhs.push(sr.rhs / kappa);
    }
    let signs: Vec<f64> = std_rows.iter().map(|s| s.sign).collect();
    drop(std_rows);

    let max_iter = 50 * (nrows + ncols) + 1000;
    let mut tab = Tableau { rows, rhs, basis, red: Vec::new(), enterable: vec![true; ncols], pricing: lp.pricing };

    if n_art > 0 {
        let mut phase1 = vec![0.0; ncols];
        for c in phase1.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        tab.red = tab.price(&phase1);
        tab.optimize(max_iter)?;
        let infeas: f64 = tab.basis.iter().zip(&tab.rhs).filter(|(&b, _)| b >= art_start).map(|(_, &v)| v).sum();
        let scale = 1.0 + tab.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if infeas > PHASE1_TOL * scale {
            return Ok(SolveResult::failed(Status::Infeasible, n, m));
        }
        // drive artificials out of the basis where possible
        for r in 0..nrows {
            if tab.basis[r] >= art_start {
                let cand = tab.rows[r].iter().find(|&&(j, v)| j < art_start && v.abs() > PIVOT_TOL).map(|&(j, _)| j);
                if let Some(j) = cand {
                    tab.pivot(r, j);
                }
            }
        }
        for e in tab.enterable.iter_mut().skip(art_start) {
            *e = false;
        }
    }

    tab.red = tab.price(&cost);
    if !tab.optimize(max_iter)? {
        return Ok(SolveResult::failed(Status::Unbounded, n, m));
    }

    let mut xs = vec![0.0; ncols];
    for (r, &b) in tab.basis.iter().enumerate() {
        xs[b] = tab.rhs[r];
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, lo } => lo + xs[col],
            VarMap::Mirror { col, hi } => hi - xs[col],
            VarMap::Split { pos, neg } => xs[pos] - xs[neg],
        })
        .collect();

    // Row duals from the reduced costs of each row's initial unit column.
    let duals: Vec<f64> = (0..nrows)
        .map(|i| {
            let (u, kappa) = unit[i];
            signs[i] * (cost[u] - tab.red[u]) / kappa
        })
        .collect();
    let lambda: Vec<f64> = (0..m).map(|i| -duals[i]).collect();
    let eq_start = m + upper_rows.len();
    let lambda_eq: Vec<f64> = (0..lp.eq_rows.len()).map(|i| -duals[eq_start + i]).collect();

    let objective = crate::solver::linalg::dot(&lp.cost, &x);
    let activity = lp.le_activity(&x);
    let active_set = (0..m).filter(|&i| (activity[i] - lp.le_rhs[i]).abs() <= ACTIVE_TOL).collect();

    Ok(SolveResult { status: Status::Optimal, x, lambda, lambda_eq, active_set, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(d: &[f64], rows: &[(&[f64], f64)]) -> LpProblem {
        let mut p = LpProblem::new(d.to_vec());
        for (r, b) in rows {
            let row = r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect();
            p.add_le(row, *b).unwrap();
        }
        p
    }

    #[test]
    fn minimizes_over_orthant() {
        let p = lp(&[1.0, 1.0], &[]).nonnegative();
        let r = solve_lp(&p).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.x, vec![0.0, 0.0]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn upper_bound_row_is_hit() {
        let p = lp(&[-1.0], &[(&[1.0], 3.0)]).nonnegative();
        let r = solve_lp(&p).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-12);
        assert!((r.lambda[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.active_set, vec![0]);
    }

    #[test]
    fn detects_unbounded() {
        let p = lp(&[-1.0], &[]).nonnegative();
        assert_eq!(solve_lp(&p).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn detects_infeasible() {
        // x ≤ -1 and x ≥ 0
        let p = lp(&[1.0], &[(&[1.0], -1.0)]).nonnegative();
        assert_eq!(solve_lp(&p).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn equality_rows_and_free_variables() {
        // min x0 + 2 x1  s.t. x0 + x1 = 1, x0 - x1 ≤ 0.5, x free
        let mut p = lp(&[1.0, 2.0], &[(&[1.0, -1.0], 0.5)]);
        p.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0).unwrap();
        let r = solve_lp(&p).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 0.75).abs() < 1e-12 && (r.x[1] - 0.25).abs() < 1e-12);
        // stationarity d + Aᵀλ + A_eqᵀμ = 0
        let s0 = 1.0 + r.lambda[0] + r.lambda_eq[0];
        let s1 = 2.0 - r.lambda[0] + r.lambda_eq[0];
        assert!(s0.abs() < 1e-12 && s1.abs() < 1e-12, "{s0} {s1}");
    }

    #[test]
    fn bounded_variables() {
        let mut p = LpProblem::new(vec![-1.0, 1.0]);
        p.set_bounds(0, -2.0, 4.0).unwrap();
        p.set_bounds(1, f64::NEG_INFINITY, 3.0).unwrap();
        p.add_le(vec![(1, -1.0)], 1.0).unwrap();
        let r = solve_lp(&p).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 4.0).abs() < 1e-12 && (r.x[1] + 1.0).abs() < 1e-12);
        assert!((r.objective + 5.0).abs() < 1e-12);
    }

    #[test]
    fn dantzig_matches_bland() {
        let rows: &[(&[f64], f64)] = &[(&[1.0, 2.0, 1.0], 4.0), (&[3.0, 1.0, -1.0], 5.0), (&[-1.0, 1.0, 2.0], 3.0)];
        let p = lp(&[-2.0, -3.0, -1.0], rows).nonnegative();
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p.clone().with_pricing(PricingRule::Dantzig)).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-10);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, cycles under textbook Dantzig without anti-cycling.
        let rows: &[(&[f64], f64)] = &[
            (&[0.25, -60.0, -1.0 / 25.0, 9.0], 0.0),
            (&[0.5, -90.0, -1.0 / 50.0, 3.0], 0.0),
            (&[0.0, 0.0, 1.0, 0.0], 1.0),
        ];
        let p = lp(&[-0.75, 150.0, -1.0 / 50.0, 6.0], rows).nonnegative();
        let r = solve_lp(&p).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective + 0.05).abs() < 1e-10, "{}", r.objective);
    }
}
