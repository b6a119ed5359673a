//! Multi-output regressors used as baselines: Gaussian-process regression,
//! random forests and ε-SVR. Every method fits one scalar model per output
//! coordinate.

mod forest;
mod gp;
mod svr;

use serde::{Deserialize, Serialize};

pub use forest::{Forest, Tree};
pub use gp::GpModel;
pub use svr::SvrModel;

use crate::error::{Error, Result};
use crate::pop::Dataset;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "GP")]
    Gp,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "SVR")]
    Svr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gp, Method::Rf, Method::Svr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gp => "GP",
            Method::Rf => "RF",
            Method::Svr => "SVR",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GP" => Ok(Method::Gp),
            "RF" => Ok(Method::Rf),
            "SVR" => Ok(Method::Svr),
            _ => Err(Error::InvalidInput(format!("unknown method '{s}' (expected GP, RF or SVR)"))),
        }
    }
}

/// Features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    #[default]
    All,
    Sqrt,
}

/// RBF width of the SVR kernel `exp(−γ‖a−b‖²)`; `Auto` is `1/q`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Gamma {
    #[default]
    Auto,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, q: usize) -> f64 {
        match self {
            Gamma::Auto => 1.0 / q.max(1) as f64,
            Gamma::Value(g) => g,
        }
    }
}

impl Serialize for Gamma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gamma::Auto => s.serialize_str("auto"),
            Gamma::Value(g) => s.serialize_f64(*g),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(g) => Ok(Gamma::Value(g)),
            Raw::Str(s) if s == "auto" => Ok(Gamma::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("gamma must be a number or \"auto\", got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum Hyperparams {
    #[serde(rename = "GP")]
    Gp { length_scale: f64, alpha: f64 },
    #[serde(rename = "RF")]
    Rf {
        n_estimators: usize,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default)]
        max_features: MaxFeatures,
        #[serde(default = "yes")]
        bootstrap: bool,
    },
    #[serde(rename = "SVR")]
    Svr {
        c: f64,
        epsilon: f64,
        #[serde(default)]
        gamma: Gamma,
        /// Stopping tolerance of the dual solver.
        #[serde(default = "default_svr_tol")]
        tol: f64,
    },
}

fn default_svr_tol() -> f64 {
    DEFAULT_SVR_TOL
}

/// Stopping tolerance of libsvm and scikit-learn.
pub const DEFAULT_SVR_TOL: f64 = 1e-3;

fn yes() -> bool {
    true
}

impl Hyperparams {
    pub fn method(&self) -> Method {
        match self {
            Hyperparams::Gp { .. } => Method::Gp,
            Hyperparams::Rf { .. } => Method::Rf,
            Hyperparams::Svr { .. } => Method::Svr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Hyperparams::Gp { length_scale, alpha } => {
                length_scale > 0.0 && length_scale.is_finite() && alpha >= 0.0 && alpha.is_finite()
            }
            Hyperparams::Rf { n_estimators, max_depth, .. } => n_estimators >= 1 && max_depth != Some(0),
            Hyperparams::Svr { c, epsilon, gamma, tol } => {
                c > 0.0
                    && c.is_finite()
                    && epsilon >= 0.0
                    && epsilon.is_finite()
                    && tol > 0.0
                    && !matches!(gamma, Gamma::Value(g) if !(g > 0.0 && g.is_finite()))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid hyperparameters {self:?}")))
        }
    }
}

/// Hyperparameter grid searched by leave-one-out selection.
pub fn default_grid(method: Method) -> Vec<Hyperparams> {
    let mut grid = Vec::new();
    match method {
        Method::Gp => {
            for length_scale in [0.1, 0.3, 1.0, 3.0, 10.0] {
                for alpha in [1e-10, 1e-6] {
                    grid.push(Hyperparams::Gp { length_scale, alpha });
                }
            }
        }
        Method::Rf => {
            for n_estimators in [10, 50, 100] {
                for max_depth in [None, Some(5), Some(10)] {
                    grid.push(Hyperparams::Rf {
                        n_estimators,
                        max_depth,
                        max_features: MaxFeatures::All,
                        bootstrap: true,
                    });
                }
            }
        }
        Method::Svr => {
            for c in [0.1, 1.0, 10.0] {
                for epsilon in [0.01, 0.1] {
                    for gamma in [Gamma::Auto, Gamma::Value(0.1), Gamma::Value(1.0)] {
                        grid.push(Hyperparams::Svr { c, epsilon, gamma, tol: DEFAULT_SVR_TOL });
                    }
                }
            }
        }
    }
    grid
}

#[derive(Debug, Clone)]
enum Scalar {
    Gp(GpModel),
    Rf(Forest),
    Svr(SvrModel),
}

impl Scalar {
    fn predict(&self, u: &[f64]) -> f64 {
        match self {
            Scalar::Gp(m) => m.predict(u),
            Scalar::Rf(m) => m.predict(u),
            Scalar::Svr(m) => m.predict(u),
        }
    }
}

/// A fitted multi-output regressor.
#[derive(Debug, Clone)]
pub struct Model {
    pub hyperparams: Hyperparams,
    outputs: Vec<Scalar>,
    pub train_u: Vec<Vec<f64>>,
    pub train_x: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Model {
    pub fn method(&self) -> Method {
        self.hyperparams.method()
    }

    /// Number of outputs.
    pub fn n(&self) -> usize {
        self.outputs.len()
    }

    pub fn predict(&self, u: &[f64]) -> Vec<f64> {
        self.outputs.iter().map(|m| m.predict(u)).collect()
    }

    pub fn svr_outputs(&self) -> impl Iterator<Item = &SvrModel> {
        self.outputs.iter().filter_map(|m| if let Scalar::Svr(s) = m { Some(s) } else { None })
    }
}

pub fn predict_model(m: &Model, u: &[f64]) -> Vec<f64> {
    m.predict(u)
}

fn check_data(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot fit a regressor on an empty dataset".into()));
    }
    let finite = data.u.iter().chain(&data.x).flatten().all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidInput("training data must be finite".into()));
    }
    Ok(())
}

fn column(data: &Dataset, j: usize) -> Vec<f64> {
    data.x.iter().map(|x| x[j]).collect()
}

fn output_seed(seed: u64, j: usize) -> u64 {
    seed::derive(seed, &[j as u64])
}

pub fn fit_model(h: &Hyperparams, data: &Dataset, seed: u64) -> Result<Model> {
    h.validate()?;
    check_data(data)?;
    let n = data.n();
    let outputs = match *h {
        Hyperparams::Gp { length_scale, alpha } => {
            let fit = gp::GpFit::new(&data.u, length_scale, alpha)?;
            (0..n).map(|j| Ok(Scalar::Gp(fit.model(&column(data, j))))).collect::<Result<Vec<_>>>()?
        }
        Hyperparams::Rf { n_estimators, max_depth, max_features, bootstrap } => (0..n)
            .map(|j| {
                let f = Forest::fit(
                    &data.u,
                    &column(data, j),
                    n_estimators,
                    max_depth,
                    max_features,
                    bootstrap,
                    output_seed(seed, j),
                );
                Scalar::Rf(f)
            })
            .collect(),
        Hyperparams::Svr { c, epsilon, gamma, tol } => {
            let g = gamma.resolve(data.q());
            let kern = svr::kernel_matrix(&data.u, g);
            let opts = svr::SvrParams { c, epsilon, gamma: g, tol };
            (0..n).map(|j| Scalar::Svr(SvrModel::fit(&data.u, &column(data, j), &kern, opts, None))).collect()
        }
    };
    Ok(Model { hyperparams: *h, outputs, train_u: data.u.clone(), train_x: data.x.clone(), seed })
}

/// Leave-one-out predictions for every grid point: entry `g` holds, for each
/// observation `k`, the prediction at `u_k` of the model with setting `g`
/// fitted on all other observations, or the reason that setting failed.
///
/// Equivalent to refitting per fold with [`fit_model`]; GP uses the
/// closed form, RF grows each fold's largest forest once and reads the
/// smaller settings off its tree prefixes and depth truncations, and SVR
/// warm-starts each fold from the full-data solution.
pub fn loo_predictions(grid: &[Hyperparams], data: &Dataset, seed: u64) -> Vec<Result<Vec<Vec<f64>>>> {
    let mut out: Vec<Option<Result<Vec<Vec<f64>>>>> = (0..grid.len()).map(|_| None).collect();
    if let Err(e) = check_data(data) {
        return grid.iter().map(|_| Err(Error::InvalidInput(e.to_string()))).collect();
    }
    if data.len() < 2 {
        return grid
            .iter()
            .map(|_| Err(Error::InvalidInput("leave-one-out needs at least 2 observations".into())))
            .collect();
    }
    for (g, h) in grid.iter().enumerate() {
        if let Err(e) = h.validate() {
            out[g] = Some(Err(e));
        }
    }
    let pending = |m: Method, out: &[Option<_>]| -> Vec<usize> {
        (0..grid.len()).filter(|&g| out[g].is_none() && grid[g].method() == m).collect()
    };
    for g in pending(Method::Gp, &out) {
        let Hyperparams::Gp { length_scale, alpha } = grid[g] else { unreachable!() };
        out[g] = Some(gp::loo(data, length_scale, alpha));
    }
    let rf = pending(Method::Rf, &out);
    if !rf.is_empty() {
        for (g, r) in rf.iter().zip(forest::loo(data, &rf.iter().map(|&g| grid[g]).collect::<Vec<_>>(), seed)) {
            out[*g] = Some(r);
        }
    }
    for g in pending(Method::Svr, &out) {
        let Hyperparams::Svr { c, epsilon, gamma, tol } = grid[g] else { unreachable!() };
        out[g] = Some(svr::loo(data, svr::SvrParams { c, epsilon, gamma: gamma.resolve(data.q()), tol }));
    }
    out.into_iter().map(|r| r.expect("every grid point handled")).collect()
}

/// Reference implementation of [`loo_predictions`] for one setting.
pub fn loo_predictions_brute_force(h: &Hyperparams, data: &Dataset, seed: u64) -> Result<Vec<Vec<f64>>> {
    (0..data.len())
        .map(|k| {
            let m = fit_model(h, &data.without(k), seed)?;
            Ok(m.predict(&data.u[k]))
        })
        .collect()
}
