//! Every checked-in fuzz seed must decode and survive a round trip.

use std::path::{Path, PathBuf};

use ioml::bench::{ExperimentConfig, ResultsTable};
use ioml::inverse::FitResult;
use ioml::pop::{Dataset, DatasetMeta, PopInstance};
use ioml::regions::RegionMap;

fn seeds(target: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut v: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    assert!(!v.is_empty(), "no seeds in {}", dir.display());
    v
}

fn text(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn instance_seeds() {
    for p in seeds("instance_json") {
        let pop = PopInstance::from_json(&text(&p)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(PopInstance::from_json(&pop.to_json()).unwrap().to_json(), pop.to_json());
    }
}

#[test]
fn dataset_seeds() {
    let meta = DatasetMeta { generator: "seed".into(), seed: 0, k: 0, bx: None };
    for p in seeds("dataset_csv") {
        let d = Dataset::read_csv(text(&p).as_bytes(), meta.clone()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text(&p));
    }
}

#[test]
fn fit_result_seeds() {
    for p in seeds("fit_result_json") {
        let r = FitResult::from_json(&text(&p)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(FitResult::from_json(&r.to_json()).unwrap().c_hat, r.c_hat);
    }
}

#[test]
fn region_map_seeds() {
    for p in seeds("region_map_json") {
        let map = RegionMap::from_json(&text(&p)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(map.len() >= 1);
        assert_eq!(RegionMap::from_json(&map.to_json()).unwrap().len(), map.len());
    }
}

#[test]
fn config_seeds() {
    for p in seeds("config_json") {
        let cfg = ExperimentConfig::from_json(&text(&p)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}

#[test]
fn results_seeds() {
    for p in seeds("results_csv") {
        let t = ResultsTable::read_csv(text(&p).as_bytes()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(t.to_csv_string(), text(&p));
    }
}
