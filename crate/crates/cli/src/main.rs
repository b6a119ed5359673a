use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ioml::bench::{
    emit_outputs, loocv_select, mre, run_experiment, Experiment, ExperimentConfig, ResultsTable, DEFAULT_SEED,
};
use ioml::inverse::{fit, predict, NormKind};
use ioml::ml::{default_grid, fit_model, Hyperparams, Method};
use ioml::pop::reference::reference_instance;
use ioml::pop::{generate_dataset, generate_random_pop, Dataset, PopInstance, TruthModel};
use ioml::regions::{enumerate_regions, render_svg, DEFAULT_GRID_DENSITY};
use ioml::solver::{solve_qp, DEFAULT_TOL};
use ioml::Error;

#[derive(Parser)]
#[command(name = "ioml", version, about = "Inverse optimization versus ML regression on parametric QPs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file or directory; stdout when omitted for single documents.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment configuration (JSON) for `bench`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Solver tolerance.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance (JSON) or a dataset (CSV with JSON sidecar).
    Generate {
        #[command(subcommand)]
        what: Generate,
    },
    /// Solve the forward problem of an instance at one parameter value.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated parameter vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
    },
    /// Impute objective coefficients from a dataset.
    FitIo {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = TemplateChoice::Perfect)]
        template: TemplateChoice,
        #[arg(long, default_value = "L1")]
        norm: NormKind,
        /// Report the test MRE on this dataset.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Fit an ML regressor, selecting hyperparameters by leave-one-out.
    FitMl {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: Method,
        /// Fixed hyperparameters as JSON instead of the grid search.
        #[arg(long)]
        hyperparams: Option<String>,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Enumerate critical regions; writes the map JSON and optionally an SVG.
    Regions {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID_DENSITY)]
        density: usize,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run one experiment and write results.csv plus charts into --out.
    Bench {
        experiment: Experiment,
        /// Override the number of instances.
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Redraw the charts of an existing results.csv.
    Plot {
        #[arg(long)]
        results: PathBuf,
    },
}

#[derive(Subcommand)]
enum Generate {
    Instance {
        /// The fixed two-variable reference problem instead of a random one.
        #[arg(long)]
        reference: bool,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
    },
    Dataset {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        k: usize,
        /// Sampling box as lo,hi pairs, e.g. `4,6,-6,-4`; defaults to the instance box.
        #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true)]
        bx: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TemplateChoice {
    /// The instance's own objective form.
    Perfect,
    /// `H u` replaced by `H ū` with `ū` the mean training parameter.
    Imperfect,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_numerical() { 2 } else { 1 }, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<PopInstance, Failure> {
    Ok(PopInstance::from_json(&read(path)?)?)
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    Dataset::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Outcome {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_line(v: serde_json::Value) -> String {
    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
}

fn mean_u(data: &Dataset) -> Vec<f64> {
    (0..data.q()).map(|j| data.u.iter().map(|u| u[j]).sum::<f64>() / data.len() as f64).collect()
}

fn generate(g: &Global, what: Generate) -> Outcome {
    match what {
        Generate::Instance { reference, n, m, q } => {
            let pop = if reference { reference_instance() } else { generate_random_pop(n, m, q, g.seed)? };
            emit(&g.out, &pop.to_json())
        }
        Generate::Dataset { instance, k, bx } => {
            let pop = load_instance(&instance)?;
            let bx = if bx.is_empty() {
                pop.u_box().clone()
            } else if bx.len() == 2 * pop.q() {
                bx.chunks(2).map(|c| (c[0], c[1])).collect()
            } else {
                return Err(usage(format!("--box needs {} values", 2 * pop.q())));
            };
            let data = generate_dataset(TruthModel::Pop(&pop), &bx, k, g.seed)?;
            match &g.out {
                Some(p) => Ok(data.save(p)?),
                None => {
                    data.write_csv(std::io::stdout())?;
                    Ok(())
                }
            }
        }
    }
}

fn solve(g: &Global, instance: &Path, u: &[f64]) -> Outcome {
    let pop = load_instance(instance)?;
    if u.len() != pop.q() {
        return Err(usage(format!("--u needs {} values", pop.q())));
    }
    let res = solve_qp(&pop.instantiate_qp(u)?, g.tol)?;
    let status = serde_json::to_value(res.status).expect("serializable");
    let out = json_line(serde_json::json!({
        "status": status,
        "x": res.x,
        "lambda": res.lambda,
        "active_set": res.active_set,
        "objective": res.objective,
    }));
    emit(&g.out, &out)?;
    if res.status == ioml::solver::Status::Optimal {
        Ok(())
    } else {
        Err(Failure { code: 2, message: format!("forward problem is {status}") })
    }
}

fn fit_io(
    g: &Global,
    instance: &Path,
    data: &Path,
    template: TemplateChoice,
    norm: NormKind,
    test: Option<&Path>,
) -> Outcome {
    let pop = load_instance(instance)?;
    let train = load_dataset(data)?;
    let t = match template {
        TemplateChoice::Perfect => pop.perfect_template(),
        TemplateChoice::Imperfect => pop.imperfect_template(&mean_u(&train)),
    };
    let cons = pop.constraints();
    let r = fit(&t, &cons, &train, norm)?;
    emit(&g.out, &r.to_json())?;
    if let Some(test) = test {
        let test = load_dataset(test)?;
        let preds = test.u.iter().map(|u| predict(&t, &r.c_hat, &cons, u)).collect::<ioml::Result<Vec<_>>>()?;
        eprintln!("test MRE {:.6}", mre(&preds, &test.x)?);
    }
    Ok(())
}

fn fit_ml(g: &Global, data: &Path, method: Method, hyperparams: Option<&str>, test: Option<&Path>) -> Outcome {
    let train = load_dataset(data)?;
    let (h, cv) = match hyperparams {
        Some(s) => {
            let h: Hyperparams = serde_json::from_str(s).map_err(|e| usage(format!("--hyperparams: {e}")))?;
            if h.method() != method {
                return Err(usage(format!("--hyperparams are for {}, not {method}", h.method())));
            }
            (h, None)
        }
        None => {
            let sel = loocv_select(&default_grid(method), &train, g.seed)?;
            (sel.hyperparams, Some(sel.cv_error))
        }
    };
    let model = fit_model(&h, &train, g.seed)?;
    let mut report = serde_json::json!({ "hyperparams": h, "loo_mre": cv });
    if let Some(test) = test {
        let test = load_dataset(test)?;
        let preds: Vec<Vec<f64>> = test.u.iter().map(|u| model.predict(u)).collect();
        report["test_mre"] = serde_json::json!(mre(&preds, &test.x)?);
    }
    emit(&g.out, &json_line(report))
}

fn regions(g: &Global, instance: &Path, density: usize, svg: Option<&Path>) -> Outcome {
    let pop = load_instance(instance)?;
    let map = enumerate_regions(&pop, pop.u_box(), density)?;
    if map.low_coverage {
        log::warn!("regions cover only {:.1}% of the box", 100.0 * map.coverage_fraction);
    }
    emit(&g.out, &map.to_json())?;
    if let Some(p) = svg {
        std::fs::write(p, render_svg(&map)?).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn bench(g: &Global, experiment: Experiment, instances: Option<usize>, threads: Option<usize>) -> Outcome {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::from_json(&read(p)?)?,
        None => ExperimentConfig::preset(experiment),
    };
    if cfg.experiment != experiment {
        return Err(usage(format!("config is for {}, not {}", cfg.experiment.id(), experiment.id())));
    }
    if g.config.is_none() || g.seed != DEFAULT_SEED {
        cfg.master_seed = g.seed;
    }
    if let Some(i) = instances {
        cfg.instances = i;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    let table = run_experiment(&cfg)?;
    if table.rows.is_empty() {
        return Err(Failure { code: 2, message: format!("every cell failed ({} failures)", table.failures) });
    }
    for p in emit_outputs(&table, &cfg.out_dir)? {
        println!("{}", p.display());
    }
    for c in table.means() {
        let regions = c.regions.map(|r| format!(" regions={r}")).unwrap_or_default();
        eprintln!(
            "{} {} {} K={}{regions}: {:.4}% (n={})",
            c.experiment,
            c.method,
            c.prior,
            c.k,
            100.0 * c.mre,
            c.count
        );
    }
    if table.failures > 0 {
        eprintln!("{} cells failed and were excluded", table.failures);
    }
    Ok(())
}

fn plot(g: &Global, results: &Path) -> Outcome {
    let table = ResultsTable::load(results).map_err(|e| usage(format!("{}: {e}", results.display())))?;
    let dir = g.out.clone().unwrap_or_else(|| results.parent().map(Path::to_path_buf).unwrap_or_default());
    std::fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    for (name, svg) in ioml::bench::experiment_charts(&table) {
        let p = dir.join(name);
        std::fs::write(&p, svg).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        println!("{}", p.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    let g = &cli.global;
    if !(g.tol > 0.0 && g.tol.is_finite()) {
        return Err(usage("--tol must be positive"));
    }
    match cli.command {
        Command::Generate { what } => generate(g, what),
        Command::Solve { instance, u } => solve(g, &instance, &u),
        Command::FitIo { instance, data, template, norm, test } => {
            fit_io(g, &instance, &data, template, norm, test.as_deref())
        }
        Command::FitMl { data, method, hyperparams, test } => {
            fit_ml(g, &data, method, hyperparams.as_deref(), test.as_deref())
        }
        Command::Regions { instance, density, svg } => regions(g, &instance, density, svg.as_deref()),
        Command::Bench { experiment, instances, threads } => bench(g, experiment, instances, threads),
        Command::Plot { results } => plot(g, &results),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
