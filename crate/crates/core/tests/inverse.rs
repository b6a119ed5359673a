use ioml::inverse::{assemble_kkt_system, fit, fit_objective, predict, residual_norm, NormKind};
use ioml::pop::reference::{ladder_box, reference_constraints, reference_instance, Prior, UtilityInstance};
use ioml::pop::{
    generate_dataset, generate_random_pop, Constraints, Dataset, DatasetMeta, LinearCoef, ObjectiveTemplate, Term,
    TruthModel,
};
use ioml::solver::linalg::Mat;

fn utility_data(n: usize, k: usize, seed: u64) -> (UtilityInstance, Dataset) {
    let inst = UtilityInstance::new(n);
    let t = inst.perfect_template();
    let c = inst.true_coefficients();
    let cons = inst.constraints();
    let d =
        generate_dataset(TruthModel::Template { template: &t, c: &c, constraints: &cons }, &inst.price_box(), k, seed)
            .unwrap();
    (inst, d)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    num / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn utility_system_has_expected_row_counts() {
    let (inst, d) = utility_data(3, 7, 1);
    let sys = assemble_kkt_system(&inst.perfect_template(), &inst.constraints(), &d).unwrap();
    assert_eq!(sys.stationarity.len(), 3 * 7);
    assert_eq!(sys.comp.len(), 7);
    assert!(sys.comp.iter().all(|g| g.len() == 3));
    assert_eq!(sys.normalization, None);
}

#[test]
fn true_parameters_zero_the_residuals() {
    let pop = generate_random_pop(2, 6, 2, 5).unwrap();
    let d = generate_dataset(TruthModel::Pop(&pop), pop.u_box(), 40, 9).unwrap();
    let sys = assemble_kkt_system(&pop.perfect_template(), &pop.constraints(), &d).unwrap();
    let lambda = d.duals.clone().unwrap();
    let stat = sys.stationarity_residuals(pop.c(), &lambda);
    assert!(stat.iter().all(|r| r.abs() < 1e-6), "{stat:?}");
    for row in sys.complementarity_residuals(&lambda) {
        assert!(row.iter().all(|r| r.abs() < 1e-6));
    }
}

#[test]
fn perfect_utility_fit_recovers_truth() {
    for &k in &[10, 60, 100] {
        let (inst, d) = utility_data(2, k, 40 + k as u64);
        let t = inst.perfect_template();
        let r = fit(&t, &inst.constraints(), &d, NormKind::L1).unwrap();
        assert!(r.residual_norm <= 1e-6, "K={k}: {}", r.residual_norm);
        let (_, test) = utility_data(2, 50, 999);
        let mre: f64 = test
            .u
            .iter()
            .zip(&test.x)
            .map(|(u, x)| rel_err(&predict(&t, &r.c_hat, &inst.constraints(), u).unwrap(), x))
            .sum::<f64>()
            / 50.0;
        assert!(mre < 1e-3, "K={k}: mre {mre}");
    }
}

#[test]
fn reported_norm_matches_recomputation_for_every_norm() {
    let pop = reference_instance();
    let d = generate_dataset(TruthModel::Pop(&pop), &ladder_box(), 12, 4).unwrap();
    let t = Prior::DropU2.template(&d.u);
    let sys = assemble_kkt_system(&t, &reference_constraints(), &d).unwrap();
    for kind in [NormKind::L1, NormKind::LInf, NormKind::L2Squared] {
        let r = fit_objective(&sys, kind).unwrap();
        assert!(r.lambda_hat.iter().flatten().all(|&l| l >= -1e-8));
        let again = residual_norm(&sys, &r.c_hat, &r.lambda_hat, kind);
        assert!((again - r.residual_norm).abs() <= 1e-8, "{kind:?}");
    }
}

#[test]
fn fit_never_exceeds_residual_of_truth() {
    let pop = reference_instance();
    let d = generate_dataset(TruthModel::Pop(&pop), &ladder_box(), 30, 8).unwrap();
    let t = Prior::MeanBased.template(&d.u);
    let sys = assemble_kkt_system(&t, &reference_constraints(), &d).unwrap();
    let truth = residual_norm(&sys, &[1.3040, 19.4545], d.duals.as_ref().unwrap(), NormKind::L1);
    let r = fit_objective(&sys, NormKind::L1).unwrap();
    assert!(r.residual_norm <= truth + 1e-9);
}

#[test]
fn l1_and_linf_agree_at_zero_residual() {
    let pop = generate_random_pop(2, 4, 2, 2).unwrap();
    let d = generate_dataset(TruthModel::Pop(&pop), pop.u_box(), 25, 3).unwrap();
    let sys = assemble_kkt_system(&pop.perfect_template(), &pop.constraints(), &d).unwrap();
    let l1 = fit_objective(&sys, NormKind::L1).unwrap();
    assert!(l1.residual_norm <= 1e-6);
    assert!(residual_norm(&sys, &l1.c_hat, &l1.lambda_hat, NormKind::LInf) <= 1e-6);
    assert!(fit_objective(&sys, NormKind::LInf).unwrap().residual_norm <= 1e-6);
}

#[test]
fn single_observation_single_coefficient_closed_form() {
    // f = c x² − 3x on x ∈ ℝ with no constraints; observed x = 0.5 ⇒ 2c·0.5 − 3 = 0 ⇒ c = 3.
    let t = ObjectiveTemplate::new(
        "one",
        1,
        vec![Term::Linear(LinearCoef::constant(vec![-3.0]))],
        vec![Term::Quadratic(Mat::from_element(1, 1, 1.0))],
        vec![(0.0, f64::INFINITY)],
    )
    .unwrap();
    let cons = Constraints::affine(Mat::zeros(0, 1), vec![], Mat::zeros(0, 1)).unwrap();
    let meta = DatasetMeta { generator: "hand".into(), seed: 0, k: 1, bx: None };
    let d = Dataset::from_pairs(vec![vec![0.0]], vec![vec![0.5]], meta).unwrap();
    for kind in [NormKind::L1, NormKind::LInf, NormKind::L2Squared] {
        let r = fit(&t, &cons, &d, kind).unwrap();
        assert!((r.c_hat[0] - 3.0).abs() < 1e-7, "{kind:?}: {:?}", r.c_hat);
    }
}

#[test]
fn homogeneous_template_is_normalized_and_scale_invariant() {
    let pop = reference_instance();
    let d = generate_dataset(TruthModel::Pop(&pop), &ladder_box(), 20, 6).unwrap();
    let t = Prior::NoLinear.template(&d.u);
    let cons = reference_constraints();
    let r = fit(&t, &cons, &d, NormKind::L1).unwrap();
    assert!(r.normalized);
    assert!((r.c_hat.iter().sum::<f64>() - 2.0).abs() < 1e-9);
    let u = [5.0, -5.0];
    let x1 = predict(&t, &r.c_hat, &cons, &u).unwrap();
    let scaled: Vec<f64> = r.c_hat.iter().map(|c| 3.7 * c).collect();
    let x2 = predict(&t, &scaled, &cons, &u).unwrap();
    assert!(x1.iter().zip(&x2).all(|(a, b)| (a - b).abs() < 1e-8));
    assert!(predict(&t, &[0.0, 0.0], &cons, &u).is_err());
}

#[test]
fn fit_result_json_round_trip() {
    let pop = generate_random_pop(2, 4, 2, 2).unwrap();
    let d = generate_dataset(TruthModel::Pop(&pop), pop.u_box(), 5, 3).unwrap();
    let r = fit(&pop.perfect_template(), &pop.constraints(), &d, NormKind::L1).unwrap();
    let back = ioml::inverse::FitResult::from_json(&r.to_json()).unwrap();
    assert_eq!(back.c_hat, r.c_hat);
    assert_eq!(back.norm_kind, NormKind::L1);
    assert!(r.to_json().contains("\"norm_kind\": \"L1\""));
}
