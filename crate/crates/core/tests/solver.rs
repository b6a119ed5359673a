mod common;

use common::{edge_scan_minimum, random_lp3, random_qp, vertex_minimum};
use ioml::solver::linalg::{Mat, Vector};
use ioml::solver::{check_kkt, solve_lp, solve_qp, LpProblem, PricingRule, QpProblem, Status, DEFAULT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_two_variable_qps_match_edge_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in 0..50 {
        let qp = random_qp(&mut rng, 2, 5);
        let res = solve_qp(&qp, DEFAULT_TOL).unwrap();
        assert_eq!(res.status, Status::Optimal);
        let oracle = edge_scan_minimum(&qp);
        assert!(
            (res.objective - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()),
            "case {t}: {} vs {oracle}",
            res.objective
        );
    }
}

#[test]
fn random_qps_satisfy_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.gen_range(1..6);
        let m = rng.gen_range(0..10);
        let qp = random_qp(&mut rng, n, m);
        let res = solve_qp(&qp, DEFAULT_TOL).unwrap();
        let rep = check_kkt(&qp, &res.x, &res.lambda, 1e-7);
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn infeasible_qp_is_reported() {
    let a = Mat::from_row_slice(2, 1, &[1.0, -1.0]);
    let qp = QpProblem::new(Mat::identity(1, 1), Vector::zeros(1), a, Vector::from_vec(vec![-1.0, -1.0])).unwrap();
    assert_eq!(solve_qp(&qp, DEFAULT_TOL).unwrap().status, Status::Infeasible);
}

#[test]
fn indefinite_hessian_is_rejected() {
    let p = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    assert!(QpProblem::unconstrained(p, Vector::zeros(2)).is_err());
}

#[test]
fn random_three_variable_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for t in 0..20 {
        let (cost, rows, rhs) = random_lp3(&mut rng);
        let a = Mat::from_fn(rows.len(), 3, |i, j| rows[i][j]);
        for rule in [PricingRule::Bland, PricingRule::Dantzig] {
            let lp = LpProblem::from_dense(&cost, &a, &rhs).unwrap().with_pricing(rule);
            let res = solve_lp(&lp).unwrap();
            assert_eq!(res.status, Status::Optimal);

            let best = vertex_minimum(&cost, &rows, &rhs);
            assert!((res.objective - best).abs() < 1e-8, "case {t} {rule:?}: {} vs {best}", res.objective);
        }
    }
}

#[test]
fn unbounded_and_infeasible_lps() {
    let mut lp = LpProblem::new(vec![-1.0, 0.0]);
    lp.add_le(vec![(0, -1.0)], 0.0).unwrap();
    assert_eq!(solve_lp(&lp).unwrap().status, Status::Unbounded);

    let mut lp = LpProblem::new(vec![1.0]);
    lp.add_le(vec![(0, 1.0)], -1.0).unwrap();
    lp.add_le(vec![(0, -1.0)], -1.0).unwrap();
    assert_eq!(solve_lp(&lp).unwrap().status, Status::Infeasible);
}

#[test]
fn lp_equality_rows_and_duals() {
    // min x + 2y s.t. x + y = 1, x, y ≥ 0  ⇒  (1, 0)
    let mut lp = LpProblem::new(vec![1.0, 2.0]).nonnegative();
    lp.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0).unwrap();
    let res = solve_lp(&lp).unwrap();
    assert!((res.x[0] - 1.0).abs() < 1e-12 && res.x[1].abs() < 1e-12);
    assert!((res.objective - 1.0).abs() < 1e-12);
    assert!((res.lambda_eq[0].abs() - 1.0).abs() < 1e-9);
}

#[test]
fn solves_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let qp = random_qp(&mut rng, 4, 8);
    let a = solve_qp(&qp, DEFAULT_TOL).unwrap();
    let b = solve_qp(&qp, DEFAULT_TOL).unwrap();
    assert_eq!(a, b);
}
