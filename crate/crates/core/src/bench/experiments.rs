use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::config::{Experiment, ExperimentConfig};
use super::table::{ResultRow, ResultsTable};
use super::{loocv_select, mre, quoted_setting, Approach};
use crate::error::{Error, Result};
use crate::inverse::{fit, predict};
use crate::ml::{fit_model, Method};
use crate::pop::reference::{ladder_box, reference_constraints, reference_instance, REF_Q};
use crate::pop::{
    generate_dataset, generate_random_pop, Constraints, Dataset, ObjectiveTemplate, ParamBox, PopInstance, TruthModel,
    UtilityInstance,
};
use crate::regions::{BoxScan, LabelGrid};
use crate::seed;

/// Rows and failure count of one instance.
type Job = (Vec<ResultRow>, usize);

/// Runs `job` for every instance id on a pool of workers and merges the
/// rows in a fixed order.
fn run_instances(cfg: &ExperimentConfig, job: impl Fn(usize) -> Job + Sync) -> ResultsTable {
    let threads =
        if cfg.threads == 0 { std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1) } else { cfg.threads }
            .min(cfg.instances)
            .max(1);
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<Job>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cfg.instances {
                    break;
                }
                let r = job(i);
                done.lock().expect("worker panicked").push(r);
            });
        }
    });
    let mut table = ResultsTable::default();
    for (rows, failures) in done.into_inner().expect("worker panicked") {
        table.rows.extend(rows);
        table.failures += failures;
    }
    table.sort();
    if table.failures > 0 {
        log::warn!("{}: {} cells failed and were excluded", cfg.experiment.id(), table.failures);
    }
    table
}

/// Collects rows of one instance, logging and counting failed cells.
struct Recorder<'a> {
    cfg: &'a ExperimentConfig,
    instance: usize,
    rows: Vec<ResultRow>,
    failures: usize,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a ExperimentConfig, instance: usize) -> Self {
        Recorder { cfg, instance, rows: Vec::new(), failures: 0 }
    }

    fn record(
        &mut self,
        method: &str,
        prior: &str,
        k: usize,
        regions: Option<usize>,
        eval: impl FnOnce() -> Result<f64>,
    ) {
        let start = Instant::now();
        let res = eval();
        let seconds = if self.cfg.record_seconds { start.elapsed().as_secs_f64() } else { 0.0 };
        match res {
            Ok(mre) => self.rows.push(ResultRow {
                experiment: self.cfg.experiment.id().to_string(),
                instance: self.instance,
                method: method.to_string(),
                prior: prior.to_string(),
                k,
                regions,
                mre,
                seconds,
            }),
            Err(e) => {
                log::warn!(
                    "{} instance {} {method} {prior} K={k} regions={regions:?}: {e}",
                    self.cfg.experiment.id(),
                    self.instance
                );
                self.failures += 1;
            }
        }
    }

    fn fail(&mut self, what: &str, e: &Error) {
        log::warn!("{} instance {}: {what}: {e}", self.cfg.experiment.id(), self.instance);
        self.failures += 1;
    }

    fn finish(self) -> Job {
        (self.rows, self.failures)
    }
}

fn eval_io(
    t: &ObjectiveTemplate,
    cons: &Constraints,
    train: &Dataset,
    test: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<f64> {
    let r = fit(t, cons, train, cfg.norm)?;
    let preds = test.u.iter().map(|u| predict(t, &r.c_hat, cons, u)).collect::<Result<Vec<_>>>()?;
    mre(&preds, &test.x)
}

fn eval_ml(method: Method, train: &Dataset, test: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let h = if train.len() >= 2 {
        let sel = loocv_select(&cfg.grid(method), train, seed)?;
        log::debug!("{method}: selected {:?} (leave-one-out MRE {:.4})", sel.hyperparams, sel.cv_error);
        sel.hyperparams
    } else {
        quoted_setting(method)
    };
    let model = fit_model(&h, train, seed)?;
    let preds: Vec<Vec<f64>> = test.u.iter().map(|u| model.predict(u)).collect();
    mre(&preds, &test.x)
}

fn instance_seed(cfg: &ExperimentConfig, i: usize) -> u64 {
    seed::derive(cfg.master_seed, &[seed::tag(cfg.experiment.id()), i as u64])
}

fn ml_seed(inst_seed: u64, method: Method, salt: &[u64]) -> u64 {
    let mut path = vec![seed::tag(method.name())];
    path.extend_from_slice(salt);
    seed::derive(inst_seed, &path)
}

fn train_test(
    cfg: &ExperimentConfig,
    model: TruthModel<'_>,
    bx: &[(f64, f64)],
    k: usize,
    s: u64,
) -> Result<(Dataset, Dataset)> {
    let mut train = generate_dataset(model, bx, k, seed::derive(s, &[0]))?;
    if cfg.noise > 0.0 {
        train = train.with_noise(cfg.noise, seed::derive(s, &[2]))?;
    }
    Ok((train, generate_dataset(model, bx, cfg.test_size_for(k), seed::derive(s, &[1]))?))
}

/// Utility estimation from purchases at random prices.
pub fn run_experiment_utility(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    if cfg.experiment != Experiment::Utility {
        return Err(Error::InvalidInput(format!("{} is not the utility experiment", cfg.experiment.id())));
    }
    let inst = UtilityInstance::new(cfg.n);
    let truth_t = inst.perfect_template();
    let truth_c = inst.true_coefficients();
    let cons = inst.constraints();
    let perfect = inst.perfect_template();
    let imperfect = inst.imperfect_template();
    Ok(run_instances(cfg, |i| {
        let s = instance_seed(cfg, i);
        let mut rec = Recorder::new(cfg, i);
        let truth = TruthModel::Template { template: &truth_t, c: &truth_c, constraints: &cons };
        for &k in &cfg.k_schedule {
            let (train, test) = match train_test(cfg, truth, &inst.price_box(), k, seed::derive(s, &[k as u64])) {
                Ok(d) => d,
                Err(e) => {
                    rec.fail(&format!("data at K={k}"), &e);
                    continue;
                }
            };
            for &a in &cfg.methods {
                match a {
                    Approach::IoPerfect => {
                        rec.record(a.name(), "", k, None, || eval_io(&perfect, &cons, &train, &test, cfg))
                    }
                    Approach::IoImperfect => {
                        rec.record(a.name(), "", k, None, || eval_io(&imperfect, &cons, &train, &test, cfg))
                    }
                    Approach::Ml(m) => {
                        rec.record(a.name(), "", k, None, || eval_ml(m, &train, &test, cfg, ml_seed(s, m, &[k as u64])))
                    }
                    Approach::Io => {}
                }
            }
        }
        rec.finish()
    }))
}

fn center(bx: &[(f64, f64)]) -> Vec<f64> {
    bx.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
}

/// Random instance with one box per region target, regenerated until all
/// targets are met.
fn instance_with_boxes(cfg: &ExperimentConfig, s: u64) -> Result<(PopInstance, Vec<(usize, ParamBox)>)> {
    let side = vec![cfg.box_side; 2];
    let mut last = None;
    for attempt in 0..cfg.max_retries.max(1) {
        let pop = generate_random_pop(cfg.n, cfg.m, 2, seed::derive(s, &[u64::MAX, attempt as u64]))?;
        let grid = LabelGrid::new(&pop, &side, BoxScan::default())?;
        let boxes: Result<Vec<(usize, ParamBox)>> =
            cfg.region_targets.iter().map(|&t| grid.find(t, cfg.fair_share / t as f64).map(|b| (t, b))).collect();
        match boxes {
            Ok(b) => return Ok((pop, b)),
            Err(e @ Error::NotFound(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::NotFound("no instance attempt made".into())))
}

fn run_random_pop(cfg: &ExperimentConfig) -> ResultsTable {
    run_instances(cfg, |i| {
        let s = instance_seed(cfg, i);
        let mut rec = Recorder::new(cfg, i);
        let (pop, boxes) = match instance_with_boxes(cfg, s) {
            Ok(v) => v,
            Err(e) => {
                rec.fail("instance generation", &e);
                return rec.finish();
            }
        };
        let cons = pop.constraints();
        let perfect = pop.perfect_template();
        for (target, bx) in &boxes {
            let imperfect = pop.imperfect_template(&center(bx));
            for &k in &cfg.k_schedule {
                let cell = seed::derive(s, &[*target as u64, k as u64]);
                let (train, test) = match train_test(cfg, TruthModel::Pop(&pop), bx, k, cell) {
                    Ok(d) => d,
                    Err(e) => {
                        rec.fail(&format!("data at K={k}, {target} regions"), &e);
                        continue;
                    }
                };
                let r = Some(*target);
                for &a in &cfg.methods {
                    match a {
                        Approach::IoPerfect => {
                            rec.record(a.name(), "", k, r, || eval_io(&perfect, &cons, &train, &test, cfg))
                        }
                        Approach::IoImperfect => {
                            rec.record(a.name(), "", k, r, || eval_io(&imperfect, &cons, &train, &test, cfg))
                        }
                        Approach::Ml(m) => rec.record(a.name(), "", k, r, || {
                            eval_ml(m, &train, &test, cfg, ml_seed(s, m, &[*target as u64, k as u64]))
                        }),
                        Approach::Io => {}
                    }
                }
            }
        }
        rec.finish()
    })
}

fn run_dependence(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    let ladder = cfg.dependence_ladder()?;
    let bx = ladder_box();
    for d in &ladder {
        d.check_box(&bx)?;
    }
    let cons = reference_constraints();
    Ok(run_instances(cfg, |i| {
        let s = instance_seed(cfg, i);
        let mut rec = Recorder::new(cfg, i);
        for (level, dep) in ladder.iter().enumerate() {
            let truth_t = dep.perfect_template();
            let truth = TruthModel::Template { template: &truth_t, c: &REF_Q, constraints: &cons };
            for &k in &cfg.k_schedule {
                let cell = seed::derive(s, &[level as u64, k as u64]);
                let (train, test) = match train_test(cfg, truth, &bx, k, cell) {
                    Ok(d) => d,
                    Err(e) => {
                        rec.fail(&format!("{} data at K={k}", dep.name()), &e);
                        continue;
                    }
                };
                let imperfect = dep.imperfect_template(&train.u);
                for &a in &cfg.methods {
                    match a {
                        Approach::IoPerfect => {
                            rec.record(a.name(), dep.name(), k, None, || eval_io(&truth_t, &cons, &train, &test, cfg))
                        }
                        Approach::IoImperfect => {
                            rec.record(a.name(), dep.name(), k, None, || eval_io(&imperfect, &cons, &train, &test, cfg))
                        }
                        Approach::Ml(m) => rec.record(a.name(), dep.name(), k, None, || {
                            eval_ml(m, &train, &test, cfg, ml_seed(s, m, &[level as u64, k as u64]))
                        }),
                        Approach::Io => {}
                    }
                }
            }
        }
        rec.finish()
    }))
}

fn run_prior(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    let ladder = cfg.prior_ladder()?;
    let pop = reference_instance();
    let cons = reference_constraints();
    let bx = ladder_box();
    Ok(run_instances(cfg, |i| {
        let s = instance_seed(cfg, i);
        let mut rec = Recorder::new(cfg, i);
        for &k in &cfg.k_schedule {
            let (train, test) = match train_test(cfg, TruthModel::Pop(&pop), &bx, k, seed::derive(s, &[k as u64])) {
                Ok(d) => d,
                Err(e) => {
                    rec.fail(&format!("data at K={k}"), &e);
                    continue;
                }
            };
            for p in &ladder {
                let t = p.template(&train.u);
                rec.record(Approach::Io.name(), p.name(), k, None, || eval_io(&t, &cons, &train, &test, cfg));
            }
        }
        rec.finish()
    }))
}

/// Random-POP and reference-problem experiments.
pub fn run_experiment_pop(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::TrainingSize | Experiment::RegionCount => Ok(run_random_pop(cfg)),
        Experiment::Dependence => run_dependence(cfg),
        Experiment::Prior => run_prior(cfg),
        Experiment::Utility => Err(Error::InvalidInput("exp1 is run by run_experiment_utility".into())),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    match cfg.experiment {
        Experiment::Utility => run_experiment_utility(cfg),
        _ => run_experiment_pop(cfg),
    }
}
