use ioml::bench::{
    bar_chart, emit_outputs, loocv_select, mre, run_experiment, spearman, Approach, Experiment, ExperimentConfig,
    ResultRow, ResultsTable, CSV_HEADER,
};
use ioml::ml::{fit_model, Hyperparams, MaxFeatures, Method};
use ioml::pop::{Dataset, DatasetMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(k: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let x = u.iter().map(|u| vec![2.0 + u[0] - 0.3 * u[1] * u[1], 1.0 + u[0] * u[1]]).collect();
    Dataset::from_pairs(u, x, DatasetMeta { generator: "test".into(), seed, k, bx: None }).unwrap()
}

fn row(instance: usize, method: &str, k: usize, mre: f64) -> ResultRow {
    ResultRow {
        experiment: "exp2b".into(),
        instance,
        method: method.into(),
        prior: String::new(),
        k,
        regions: Some(1),
        mre,
        seconds: 0.0,
    }
}

#[test]
fn mre_examples() {
    let t = vec![vec![3.0, 4.0]];
    assert_eq!(mre(&t, &t).unwrap(), 0.0);
    assert!((mre(&[vec![3.0, 4.5]], &t).unwrap() - 0.1).abs() < 1e-15);
    let truths = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
    let preds = vec![vec![1.1, 0.0], vec![0.0, 2.0]];
    assert!((mre(&preds, &truths).unwrap() - 0.05).abs() < 1e-15);
    assert!(mre(&[vec![1.0]], &[vec![0.0]]).is_err());
    assert!(mre(&[vec![1.0]], &[vec![1.0], vec![2.0]]).is_err());
}

#[test]
fn spearman_of_monotone_and_tied_data() {
    assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 5.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]) - 1.0).abs() < 1e-15);
    // Ranks of y are (1.5, 1.5, 3).
    let r = spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 7.0]);
    assert!((r - 0.75f64.sqrt()).abs() < 1e-12, "{r}");
    assert!(spearman(&[1.0, 2.0], &[3.0, 3.0]).is_nan());
}

#[test]
fn selection_with_one_grid_point_returns_it() {
    let h = Hyperparams::Gp { length_scale: 0.5, alpha: 1e-6 };
    let s = loocv_select(&[h], &data(6, 1), 0).unwrap();
    assert_eq!((s.hyperparams, s.index), (h, 0));
    assert!(loocv_select(&[h], &data(1, 1), 0).is_err());
    assert!(loocv_select(&[], &data(4, 1), 0).is_err());
}

#[test]
fn selection_error_is_mean_of_refitted_folds() {
    let d = data(3, 2);
    let grid = [
        Hyperparams::Gp { length_scale: 0.3, alpha: 1e-10 },
        Hyperparams::Gp { length_scale: 3.0, alpha: 1e-6 },
        Hyperparams::Rf { n_estimators: 4, max_depth: Some(1), max_features: MaxFeatures::All, bootstrap: true },
    ];
    let s = loocv_select(&grid, &d, 9).unwrap();
    for (g, h) in grid.iter().enumerate() {
        let mut total = 0.0;
        for fold in 0..3 {
            let m = fit_model(h, &d.without(fold), 9).unwrap();
            total += mre(&[m.predict(&d.u[fold])], &[d.x[fold].clone()]).unwrap();
        }
        let e = s.errors[g].unwrap();
        assert!((e - total / 3.0).abs() < 1e-9 * (1.0 + e), "grid point {g}: {e} vs {}", total / 3.0);
    }
    let best = s.errors.iter().map(|e| e.unwrap()).fold(f64::INFINITY, f64::min);
    assert_eq!(s.cv_error, best);
}

#[test]
fn selection_ties_go_to_the_first_grid_point() {
    let h = Hyperparams::Rf { n_estimators: 3, max_depth: None, max_features: MaxFeatures::All, bootstrap: false };
    let other = Hyperparams::Rf { n_estimators: 7, max_depth: None, max_features: MaxFeatures::All, bootstrap: false };
    // Without bootstrap every tree is identical, so both settings have the same folds.
    let s = loocv_select(&[h, other], &data(8, 3), 0).unwrap();
    assert_eq!(s.errors[0], s.errors[1]);
    assert_eq!(s.index, 0);
    let s = loocv_select(&[other, h], &data(8, 3), 0).unwrap();
    assert_eq!(s.index, 0);
}

#[test]
fn config_json_round_trip_and_validation() {
    for e in Experiment::ALL {
        let cfg = ExperimentConfig::preset(e);
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
    let base = ExperimentConfig::preset(Experiment::Utility).to_json();
    assert!(ExperimentConfig::from_json(&base.replace("\"instances\": 15", "\"instances\": 0")).is_err());
    assert!(ExperimentConfig::from_json(&base.replacen('{', "{\"bogus\": 1,", 1)).is_err());
    let mut cfg = ExperimentConfig::preset(Experiment::Dependence);
    cfg.dependences = vec!["cubic".into()];
    assert!(cfg.validate().is_err());
    let mut cfg = ExperimentConfig::preset(Experiment::Utility);
    cfg.methods = vec![Approach::Io];
    assert!(cfg.validate().is_err());
    cfg.methods = vec![Approach::Ml(Method::Gp)];
    cfg.k_schedule = vec![10, 5];
    assert!(cfg.validate().is_err());
    assert_eq!("IO-imperfect".parse::<Approach>().unwrap(), Approach::IoImperfect);
    assert_eq!("SVR".parse::<Approach>().unwrap(), Approach::Ml(Method::Svr));
    assert!("XGB".parse::<Approach>().is_err());
}

#[test]
fn csv_round_trip_and_idempotent_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = ResultsTable::default();
    t.rows.push(row(0, "GP", 200, 0.123456789));
    let written = emit_outputs(&t, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines, [CSV_HEADER.join(","), "exp2b,0,GP,,200,1,0.123457,0".to_string()]);
    assert!(written.iter().any(|p| p.extension().is_some_and(|e| e == "svg")));
    emit_outputs(&t, dir.path()).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("results.csv")).unwrap(), csv);

    let back = ResultsTable::load(&dir.path().join("results.csv")).unwrap();
    assert_eq!(back.rows.len(), 1);
    assert!((back.rows[0].mre - 0.123457).abs() < 1e-15);
    assert_eq!(back.to_csv_string(), csv);

    assert!(emit_outputs(&ResultsTable::default(), dir.path()).is_err());
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert!(emit_outputs(&t, &blocker.join("sub")).is_err());
    assert!(ResultsTable::read_csv("experiment,instance\nexp1,0\n".as_bytes()).is_err());
    let bad = format!("{}\nexp1,0,GP,,10,,-1,0\n", CSV_HEADER.join(","));
    assert!(ResultsTable::read_csv(bad.as_bytes()).is_err());
}

#[test]
fn region_sweep_chart_has_three_groups_of_four_bars() {
    let mut t = ResultsTable::default();
    for (r, regions) in [1, 3, 5].into_iter().enumerate() {
        for (m, method) in ["GP", "IO-imperfect", "RF", "SVR"].into_iter().enumerate() {
            let mut x = row(0, method, 200, 0.01 * (1 + r + m) as f64);
            x.regions = Some(regions);
            t.rows.push(x);
        }
    }
    let charts = ioml::bench::experiment_charts(&t);
    assert_eq!(charts.len(), 1);
    let (name, svg) = &charts[0];
    assert_eq!(name, "exp2b_K200.svg");
    assert_eq!(svg.matches("class=\"bar\"").count(), 12);
    for g in ["1 region(s)", "3 region(s)", "5 region(s)"] {
        assert!(svg.contains(g));
    }
    let svg = bar_chart("t", "y", &["a".into()], &["s".into(), "t".into()], &[vec![Some(1.0), None]]);
    assert_eq!(svg.matches("class=\"bar\"").count(), 1);
}

#[test]
fn means_group_instances() {
    let mut t = ResultsTable::default();
    t.rows.push(row(1, "GP", 200, 0.3));
    t.rows.push(row(0, "GP", 200, 0.1));
    t.sort();
    assert_eq!(t.rows[0].instance, 0);
    assert!((t.mean("exp2b", "GP", "", 200, Some(1)).unwrap() - 0.2).abs() < 1e-15);
    assert!(t.mean("exp2b", "RF", "", 200, Some(1)).is_none());
}

fn small(exp: Experiment) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(exp);
    cfg.instances = 2;
    match exp {
        Experiment::Utility => cfg.k_schedule = vec![1, 4],
        Experiment::TrainingSize | Experiment::RegionCount => {
            cfg.k_schedule = vec![1, 4];
            cfg.test_size = Some(5);
            cfg.region_targets = vec![1, 2];
        }
        Experiment::Dependence => cfg.k_schedule = vec![4],
        Experiment::Prior => cfg.k_schedule = vec![6],
    }
    if exp != Experiment::Prior {
        cfg.grids = Method::ALL
            .iter()
            .map(|&m| ioml::bench::GridOverride { method: m, grid: vec![ioml::bench::quoted_setting(m)] })
            .collect();
    }
    cfg
}

#[test]
fn small_experiments_are_deterministic() {
    for exp in Experiment::ALL {
        let cfg = small(exp);
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.failures, 0, "{}", exp.id());
        assert!(!a.rows.is_empty());
        let mut threaded = cfg.clone();
        threaded.threads = 2;
        let b = run_experiment(&threaded).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string(), "{}", exp.id());
    }
}

#[test]
fn noise_hook_is_off_by_default_and_reaches_training_data() {
    for e in Experiment::ALL {
        assert_eq!(ExperimentConfig::preset(e).noise, 0.0);
    }
    let mut cfg = small(Experiment::Prior);
    cfg.priors = vec!["perfect".into()];
    let mean = |t: &ResultsTable| t.rows.iter().map(|r| r.mre).sum::<f64>() / t.rows.len() as f64;
    let clean = mean(&run_experiment(&cfg).unwrap());
    cfg.noise = 0.5;
    let noisy = mean(&run_experiment(&cfg).unwrap());
    assert!(noisy > clean + 0.01, "{clean} vs {noisy}");
    cfg.noise = f64::NAN;
    assert!(cfg.validate().is_err());
}

#[test]
fn adding_instances_keeps_existing_rows() {
    let cfg = small(Experiment::Dependence);
    let a = run_experiment(&cfg).unwrap();
    let mut more = cfg.clone();
    more.instances = 3;
    let b = run_experiment(&more).unwrap();
    let kept: Vec<_> = b.rows.iter().filter(|r| r.instance < 2).cloned().collect();
    assert_eq!(kept, a.rows);
}
