//! Error metric, leave-one-out model selection, the experiment drivers and
//! their CSV/SVG outputs.

mod config;
mod experiments;
mod plot;
mod table;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{Experiment, ExperimentConfig, GridOverride, DEFAULT_SEED};
pub use experiments::{run_experiment, run_experiment_pop, run_experiment_utility};
pub use plot::{bar_chart, experiment_charts, line_chart};
pub use table::{CellMean, ResultRow, ResultsTable, CSV_HEADER};

use crate::error::{Error, Result};
use crate::ml::{loo_predictions, Gamma, Hyperparams, MaxFeatures, Method, DEFAULT_SVR_TOL};

/// Row label of a learning approach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Approach {
    IoPerfect,
    IoImperfect,
    /// Inverse fit with the template of a prior-ladder row.
    Io,
    Ml(Method),
}

impl Approach {
    pub fn name(self) -> &'static str {
        match self {
            Approach::IoPerfect => "IO-perfect",
            Approach::IoImperfect => "IO-imperfect",
            Approach::Io => "IO",
            Approach::Ml(m) => m.name(),
        }
    }
}

impl std::fmt::Display for Approach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Approach {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "IO-perfect" => Ok(Approach::IoPerfect),
            "IO-imperfect" => Ok(Approach::IoImperfect),
            "IO" => Ok(Approach::Io),
            other => other.parse().map(Approach::Ml),
        }
    }
}

impl Serialize for Approach {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Approach {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Mean relative error `(1/M) Σ ‖x − x_true‖₂ / ‖x_true‖₂`.
pub fn mre(preds: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<f64> {
    if preds.is_empty() || preds.len() != truths.len() {
        return Err(Error::Dimension(format!("{} predictions for {} truths", preds.len(), truths.len())));
    }
    let mut total = 0.0;
    for (m, (p, t)) in preds.iter().zip(truths).enumerate() {
        if p.len() != t.len() {
            return Err(Error::Dimension(format!("row {m}: prediction has {} entries, truth {}", p.len(), t.len())));
        }
        let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidInput(format!("truth row {m} has zero norm; relative error is undefined")));
        }
        let diff = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        total += diff / norm;
    }
    Ok(total / preds.len() as f64)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            r[t] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub hyperparams: Hyperparams,
    /// Position in the grid.
    pub index: usize,
    pub cv_error: f64,
    /// Leave-one-out MRE of every grid point; `None` where a fold failed.
    pub errors: Vec<Option<f64>>,
}

/// Grid point with the lowest leave-one-out MRE on `data`; ties go to the
/// earlier grid point and settings whose folds fail are skipped.
pub fn loocv_select(grid: &[Hyperparams], data: &crate::pop::Dataset, seed: u64) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty hyperparameter grid".into()));
    }
    if data.len() < 2 {
        return Err(Error::InvalidInput("leave-one-out selection needs K ≥ 2".into()));
    }
    let mut errors = Vec::with_capacity(grid.len());
    for (h, preds) in grid.iter().zip(loo_predictions(grid, data, seed)) {
        let err = preds.and_then(|p| mre(&p, &data.x));
        match err {
            Ok(e) if e.is_finite() => errors.push(Some(e)),
            Ok(e) => {
                log::info!("grid point {h:?} disqualified: leave-one-out error {e}");
                errors.push(None);
            }
            Err(e) => {
                log::info!("grid point {h:?} disqualified: {e}");
                errors.push(None);
            }
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (g, e) in errors.iter().enumerate() {
        if let Some(e) = *e {
            if best.map_or(true, |(_, b)| e < b) {
                best = Some((g, e));
            }
        }
    }
    let (index, cv_error) = best.ok_or_else(|| Error::Numerical("every grid point failed leave-one-out".into()))?;
    Ok(Selection { hyperparams: grid[index], index, cv_error, errors })
}

/// Settings quoted for the utility experiment, used where leave-one-out is
/// impossible (a single training point).
pub fn quoted_setting(method: Method) -> Hyperparams {
    match method {
        Method::Gp => Hyperparams::Gp { length_scale: 1.0, alpha: 1e-10 },
        Method::Rf => {
            Hyperparams::Rf { n_estimators: 50, max_depth: None, max_features: MaxFeatures::All, bootstrap: true }
        }
        Method::Svr => Hyperparams::Svr { c: 0.1, epsilon: 0.1, gamma: Gamma::Auto, tol: DEFAULT_SVR_TOL },
    }
}

/// Writes `results.csv` and the per-experiment charts into `dir`,
/// replacing earlier files; returns the written paths.
pub fn emit_outputs(table: &ResultsTable, dir: &Path) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(Error::InvalidInput("no result rows to write".into()));
    }
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("results.csv");
    std::fs::write(&csv_path, table.to_csv_string())?;
    let mut written = vec![csv_path];
    for (name, svg) in experiment_charts(table) {
        let p = dir.join(name);
        std::fs::write(&p, svg)?;
        written.push(p);
    }
    Ok(written)
}
