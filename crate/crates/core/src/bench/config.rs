use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::Approach;
use crate::error::{Error, Result};
use crate::inverse::NormKind;
use crate::ml::{Hyperparams, Method};
use crate::pop::reference::{Dependence, Prior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "exp1")]
    Utility,
    /// Training-size sweep on 1- and 3-region boxes.
    #[serde(rename = "exp2a")]
    TrainingSize,
    /// Region-count sweep.
    #[serde(rename = "exp2b")]
    RegionCount,
    /// Ladder of `Ψ(u)` forms on the reference problem.
    #[serde(rename = "exp2c")]
    Dependence,
    /// Ladder of objective priors on the reference problem.
    #[serde(rename = "exp2d")]
    Prior,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Utility,
        Experiment::TrainingSize,
        Experiment::RegionCount,
        Experiment::Dependence,
        Experiment::Prior,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Utility => "exp1",
            Experiment::TrainingSize => "exp2a",
            Experiment::RegionCount => "exp2b",
            Experiment::Dependence => "exp2c",
            Experiment::Prior => "exp2d",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.id() == s).ok_or_else(|| {
            Error::InvalidInput(format!("unknown experiment '{s}' (expected exp1, exp2a, exp2b, exp2c or exp2d)"))
        })
    }
}

/// Grid searched for one ML method; absent methods use
/// [`crate::ml::default_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOverride {
    pub method: Method,
    pub grid: Vec<Hyperparams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub instances: usize,
    pub k_schedule: Vec<usize>,
    /// Test points per cell; `None` means equal to the training size.
    #[serde(default)]
    pub test_size: Option<usize>,
    #[serde(default)]
    pub region_targets: Vec<usize>,
    #[serde(default)]
    pub priors: Vec<String>,
    #[serde(default)]
    pub dependences: Vec<String>,
    pub methods: Vec<Approach>,
    pub master_seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Decision dimension (goods in the utility problem, `n` of random POPs).
    #[serde(default = "default_n")]
    pub n: usize,
    /// Constraint count of random POPs.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Side length of the region-selection boxes.
    #[serde(default = "default_box_side")]
    pub box_side: f64,
    /// Each selected region must hold at least this fraction of `1/target`
    /// of the box.
    #[serde(default = "default_fair_share")]
    pub fair_share: f64,
    /// Instance regenerations allowed when no box fits the targets.
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    #[serde(default)]
    pub norm: NormKind,
    #[serde(default)]
    pub grids: Vec<GridOverride>,
    /// Standard deviation of Gaussian noise added to training decisions;
    /// test decisions stay exact.
    #[serde(default)]
    pub noise: f64,
    /// Record wall-clock seconds; off keeps results.csv reproducible.
    #[serde(default)]
    pub record_seconds: bool,
    /// Worker threads; 0 uses the available parallelism.
    #[serde(default)]
    pub threads: usize,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}
fn default_n() -> usize {
    2
}
fn default_m() -> usize {
    6
}
fn default_box_side() -> f64 {
    2.0
}
fn default_fair_share() -> f64 {
    0.5
}
fn default_retries() -> usize {
    50
}

pub const DEFAULT_SEED: u64 = 20_190_601;

fn all_approaches() -> Vec<Approach> {
    let mut v = vec![Approach::IoPerfect, Approach::IoImperfect];
    v.extend(Method::ALL.into_iter().map(Approach::Ml));
    v
}

impl ExperimentConfig {
    fn base(experiment: Experiment, instances: usize, k_schedule: Vec<usize>) -> Self {
        ExperimentConfig {
            experiment,
            instances,
            k_schedule,
            test_size: None,
            region_targets: Vec::new(),
            priors: Vec::new(),
            dependences: Vec::new(),
            methods: all_approaches(),
            master_seed: DEFAULT_SEED,
            out_dir: default_out(),
            n: default_n(),
            m: default_m(),
            box_side: default_box_side(),
            fair_share: default_fair_share(),
            max_retries: default_retries(),
            norm: NormKind::L1,
            grids: Vec::new(),
            noise: 0.0,
            record_seconds: false,
            threads: 0,
        }
    }

    /// Defaults of each experiment.
    pub fn preset(experiment: Experiment) -> Self {
        match experiment {
            Experiment::Utility => Self::base(experiment, 15, vec![10, 20, 40, 60, 80, 100]),
            Experiment::TrainingSize => ExperimentConfig {
                test_size: Some(200),
                region_targets: vec![1, 3],
                ..Self::base(experiment, 20, vec![1, 5, 10, 25, 50, 100, 200, 350, 500])
            },
            Experiment::RegionCount => ExperimentConfig {
                test_size: Some(200),
                region_targets: vec![1, 3, 5],
                methods: vec![
                    Approach::IoImperfect,
                    Approach::Ml(Method::Gp),
                    Approach::Ml(Method::Rf),
                    Approach::Ml(Method::Svr),
                ],
                ..Self::base(experiment, 20, vec![200])
            },
            Experiment::Dependence => ExperimentConfig {
                dependences: Dependence::ALL.iter().map(|d| d.name().to_string()).collect(),
                ..Self::base(experiment, 20, vec![100, 200])
            },
            Experiment::Prior => ExperimentConfig {
                priors: Prior::ALL.iter().map(|p| p.name().to_string()).collect(),
                methods: vec![Approach::Io],
                ..Self::base(experiment, 20, vec![100])
            },
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.instances == 0 {
            return bad("instances must be at least 1".into());
        }
        if self.k_schedule.is_empty() || self.k_schedule[0] == 0 || self.k_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("K schedule {:?} must be nonempty, positive and strictly increasing", self.k_schedule));
        }
        if self.test_size == Some(0) {
            return bad("test size must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.n == 0 || self.m == 0 {
            return bad("n and m must be at least 1".into());
        }
        if !(self.box_side > 0.0 && self.box_side.is_finite()) || !(self.fair_share > 0.0 && self.fair_share <= 1.0) {
            return bad("box_side must be positive and fair_share in (0, 1]".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise level {} must be finite and nonnegative", self.noise));
        }
        match self.experiment {
            Experiment::TrainingSize | Experiment::RegionCount
                if self.region_targets.iter().any(|&t| t == 0) || self.region_targets.is_empty() =>
            {
                return bad("region targets must be nonempty and positive".into());
            }
            Experiment::Dependence => {
                self.dependence_ladder()?;
            }
            Experiment::Prior => {
                self.prior_ladder()?;
            }
            _ => {}
        }
        for g in &self.grids {
            if g.grid.is_empty() || g.grid.iter().any(|h| h.method() != g.method) {
                return bad(format!("grid override for {} must be nonempty and of that method", g.method));
            }
            for h in &g.grid {
                h.validate()?;
            }
        }
        if self.methods.iter().any(|a| matches!(a, Approach::Io)) != (self.experiment == Experiment::Prior) {
            return bad("method \"IO\" is used by exactly the prior ladder".into());
        }
        Ok(())
    }

    pub fn dependence_ladder(&self) -> Result<Vec<Dependence>> {
        self.dependences
            .iter()
            .map(|s| {
                Dependence::ALL
                    .into_iter()
                    .find(|d| d.name() == s)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown dependence '{s}'")))
            })
            .collect::<Result<Vec<_>>>()
            .and_then(|v| if v.is_empty() { Err(Error::InvalidInput("empty dependence ladder".into())) } else { Ok(v) })
    }

    pub fn prior_ladder(&self) -> Result<Vec<Prior>> {
        self.priors
            .iter()
            .map(|s| {
                Prior::ALL
                    .into_iter()
                    .find(|p| p.name() == s)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown prior '{s}'")))
            })
            .collect::<Result<Vec<_>>>()
            .and_then(|v| if v.is_empty() { Err(Error::InvalidInput("empty prior ladder".into())) } else { Ok(v) })
    }

    pub fn grid(&self, method: Method) -> Vec<Hyperparams> {
        self.grids
            .iter()
            .find(|g| g.method == method)
            .map(|g| g.grid.clone())
            .unwrap_or_else(|| crate::ml::default_grid(method))
    }

    pub fn test_size_for(&self, k: usize) -> usize {
        self.test_size.unwrap_or(k)
    }
}
