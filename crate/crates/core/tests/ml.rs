use ioml::ml::{
    default_grid, fit_model, loo_predictions, loo_predictions_brute_force, Forest, Gamma, Hyperparams, MaxFeatures,
    Method, DEFAULT_SVR_TOL,
};
use ioml::pop::{Dataset, DatasetMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(k: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
    let x = u.iter().map(|u| vec![(u[0] * 1.3).sin() + 0.5 * u[1], u[0] * u[1] - 0.2]).collect();
    Dataset::from_pairs(u, x, DatasetMeta { generator: "test".into(), seed, k, bx: None }).unwrap()
}

fn rf(n: usize, depth: Option<usize>, bootstrap: bool) -> Hyperparams {
    Hyperparams::Rf { n_estimators: n, max_depth: depth, max_features: MaxFeatures::All, bootstrap }
}

#[test]
fn gp_interpolates_training_points() {
    let d = data(30, 1);
    let m = fit_model(&Hyperparams::Gp { length_scale: 1.0, alpha: 1e-10 }, &d, 0).unwrap();
    for (u, x) in d.u.iter().zip(&d.x) {
        let p = m.predict(u);
        assert!((p[0] - x[0]).abs() < 1e-4 && (p[1] - x[1]).abs() < 1e-4);
    }
}

#[test]
fn gp_single_point_closed_form() {
    let d = Dataset::from_pairs(
        vec![vec![0.5, -1.0]],
        vec![vec![2.0, -3.0]],
        DatasetMeta { generator: "t".into(), seed: 0, k: 1, bx: None },
    )
    .unwrap();
    let (ell, alpha) = (0.7, 1e-3);
    let m = fit_model(&Hyperparams::Gp { length_scale: ell, alpha }, &d, 0).unwrap();
    let u = [1.1, -0.4];
    let kv = (-(0.6f64.powi(2) + 0.6f64.powi(2)) / (2.0 * ell * ell)).exp();
    let p = m.predict(&u);
    assert!((p[0] - 2.0 * kv / (1.0 + alpha)).abs() < 1e-14);
    assert!((p[1] + 3.0 * kv / (1.0 + alpha)).abs() < 1e-14);
}

#[test]
fn gp_is_invariant_to_training_order() {
    let d = data(15, 2);
    let mut idx: Vec<usize> = (0..15).collect();
    idx.reverse();
    idx.swap(2, 9);
    let perm = d.subset(&idx);
    let h = Hyperparams::Gp { length_scale: 1.0, alpha: 1e-6 };
    let (a, b) = (fit_model(&h, &d, 0).unwrap(), fit_model(&h, &perm, 0).unwrap());
    for u in [[0.3, 0.1], [-1.7, 1.2], [2.5, -2.5]] {
        let (pa, pb) = (a.predict(&u), b.predict(&u));
        assert!((pa[0] - pb[0]).abs() < 1e-12 && (pa[1] - pb[1]).abs() < 1e-12, "{pa:?} {pb:?}");
    }
}

#[test]
fn gp_rejects_singular_kernel() {
    let d = Dataset::from_pairs(
        vec![vec![1.0], vec![1.0]],
        vec![vec![0.0], vec![1.0]],
        DatasetMeta { generator: "t".into(), seed: 0, k: 2, bx: None },
    )
    .unwrap();
    assert!(fit_model(&Hyperparams::Gp { length_scale: 1.0, alpha: 0.0 }, &d, 0).is_err());
    assert!(fit_model(&Hyperparams::Gp { length_scale: 1.0, alpha: 1e-6 }, &d, 0).is_ok());
}

#[test]
fn single_tree_without_bootstrap_fits_training_data() {
    let d = data(40, 3);
    let m = fit_model(&rf(1, None, false), &d, 9).unwrap();
    for (u, x) in d.u.iter().zip(&d.x) {
        assert_eq!(&m.predict(u), x);
    }
}

#[test]
fn forest_is_deterministic_in_seed() {
    let d = data(40, 4);
    let a = fit_model(&rf(20, None, true), &d, 5).unwrap();
    let b = fit_model(&rf(20, None, true), &d, 5).unwrap();
    let c = fit_model(&rf(20, None, true), &d, 6).unwrap();
    let u = [0.4, -0.9];
    assert_eq!(a.predict(&u), b.predict(&u));
    assert_ne!(a.predict(&u), c.predict(&u));
}

#[test]
fn split_ties_prefer_lowest_feature() {
    let u = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
    let f = Forest::fit(&u, &[0.0, 1.0], 1, None, MaxFeatures::All, false, 0);
    // both features separate the points; feature 0 at 0.5 wins
    assert_eq!(f.predict(&[0.2, 0.9]), 0.0);
    assert_eq!(f.predict(&[0.8, 0.1]), 1.0);
    assert_eq!(f.trees()[0].depth(), 1);
}

#[test]
fn depth_limit_caps_tree_depth() {
    let d = data(60, 5);
    let y: Vec<f64> = d.x.iter().map(|x| x[0]).collect();
    let f = Forest::fit(&d.u, &y, 3, Some(2), MaxFeatures::All, true, 1);
    assert!(f.trees().iter().all(|t| t.depth() <= 2));
}

#[test]
fn svr_dual_feasibility_and_complementarity() {
    let d = data(40, 6);
    for (c, eps, gamma) in [(0.1, 0.01, Gamma::Auto), (1.0, 0.1, Gamma::Value(1.0)), (10.0, 0.01, Gamma::Value(0.1))] {
        let m = fit_model(&Hyperparams::Svr { c, epsilon: eps, gamma, tol: 1e-9 }, &d, 0).unwrap();
        for (j, s) in m.svr_outputs().enumerate() {
            let beta = s.dual_coefficients();
            assert!(beta.iter().all(|b| b.abs() <= c + 1e-12));
            assert!(beta.iter().sum::<f64>().abs() < 1e-9);
            assert!(s.complementarity_residual() <= 1e-6, "C={c}: {}", s.complementarity_residual());
            for (k, u) in d.u.iter().enumerate() {
                let r = d.x[k][j] - s.predict(u);
                if r.abs() < eps - 1e-6 {
                    assert_eq!(beta[k], 0.0);
                }
            }
        }
    }
}

#[test]
fn svr_with_wide_tube_is_constant() {
    let d = data(25, 7);
    let m = fit_model(&Hyperparams::Svr { c: 1.0, epsilon: 100.0, gamma: Gamma::Auto, tol: DEFAULT_SVR_TOL }, &d, 0)
        .unwrap();
    for s in m.svr_outputs() {
        assert!(s.dual_coefficients().iter().all(|&b| b == 0.0));
    }
    let p0 = m.predict(&[0.0, 0.0]);
    let p1 = m.predict(&[1.5, -1.0]);
    assert_eq!(p0, p1);
    for x in &d.x {
        assert!((x[0] - p0[0]).abs() <= 100.0 && (x[1] - p0[1]).abs() <= 100.0);
    }
}

#[test]
fn fast_leave_one_out_matches_refitting() {
    let d = data(12, 8);
    let mut grid = vec![
        rf(1, None, false),
        rf(3, Some(2), true),
        rf(5, None, true),
        Hyperparams::Rf { n_estimators: 4, max_depth: Some(3), max_features: MaxFeatures::Sqrt, bootstrap: true },
    ];
    grid.extend(
        default_grid(Method::Gp).into_iter().filter(|h| matches!(h, Hyperparams::Gp { alpha, .. } if *alpha == 1e-6)),
    );
    grid.push(Hyperparams::Svr { c: 1.0, epsilon: 0.05, gamma: Gamma::Auto, tol: 1e-10 });
    grid.push(Hyperparams::Svr { c: 10.0, epsilon: 0.01, gamma: Gamma::Value(0.1), tol: 1e-10 });
    let fast = loo_predictions(&grid, &d, 31);
    for (h, f) in grid.iter().zip(fast) {
        let f = f.unwrap();
        let slow = loo_predictions_brute_force(h, &d, 31).unwrap();
        let tol = match h.method() {
            Method::Rf => 0.0,
            Method::Gp => 1e-7,
            Method::Svr => 1e-6,
        };
        for (a, b) in f.iter().zip(&slow) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= tol, "{h:?}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn hyperparams_json() {
    let h: Hyperparams = serde_json::from_str(r#"{"method":"SVR","c":0.1,"epsilon":0.1,"gamma":"auto"}"#).unwrap();
    assert_eq!(h, Hyperparams::Svr { c: 0.1, epsilon: 0.1, gamma: Gamma::Auto, tol: DEFAULT_SVR_TOL });
    let h: Hyperparams = serde_json::from_str(r#"{"method":"RF","n_estimators":50}"#).unwrap();
    assert_eq!(h, rf(50, None, true));
    for m in Method::ALL {
        for h in default_grid(m) {
            let back: Hyperparams = serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
            assert_eq!(back, h);
        }
    }
    assert_eq!(default_grid(Method::Gp).len(), 10);
    assert_eq!(default_grid(Method::Rf).len(), 9);
    assert_eq!(default_grid(Method::Svr).len(), 18);
    assert!(fit_model(
        &Hyperparams::Svr { c: -1.0, epsilon: 0.1, gamma: Gamma::Auto, tol: DEFAULT_SVR_TOL },
        &data(3, 1),
        0
    )
    .is_err());
}
