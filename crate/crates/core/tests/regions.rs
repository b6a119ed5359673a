mod common;

use common::{oracle_labels, uniform};
use std::collections::BTreeSet;

use ioml::pop::reference::reference_instance;
use ioml::pop::{generate_random_pop, PopInstance};
use ioml::regions::{
    composite_law, enumerate_regions, label_histogram, locate_region, region_from_active_set, render_svg,
    select_box_with_region_count, RegionMap, DEFAULT_GRID_DENSITY,
};
use ioml::solver::linalg::Mat;
use ioml::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn empty_active_set_is_the_unconstrained_law() {
    let pop = reference_instance();
    let r = region_from_active_set(&pop, &[]).unwrap();
    // x = −P⁻¹(H u + c) with P = diag(2.608, 38.909)
    let u = [0.3, -0.7];
    let x = r.x_star(&u);
    assert!((x[0] + (1.0 + u[0]) / 2.608).abs() < 1e-12);
    assert!((x[1] + (u[1] - u[0] + 1.0) / 38.909).abs() < 1e-12);
}

#[test]
fn constant_problem_has_one_region() {
    let q = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
    let a = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let pop = PopInstance::new(
        q,
        Mat::zeros(2, 2),
        vec![-4.0, 1.0],
        a,
        vec![1.0, 1.0],
        Mat::zeros(2, 2),
        vec![(-1.0, 1.0); 2],
    )
    .unwrap();
    let map = enumerate_regions(&pop, pop.u_box(), 10).unwrap();
    assert_eq!(map.len(), 1);
    assert!(map.coverage_fraction >= 0.99);
}

#[test]
fn reference_active_constraint_four_law() {
    let pop = reference_instance();
    let r = region_from_active_set(&pop, &[3]).unwrap();
    let pts = [[5.0, -5.0], [4.5, -4.2], [5.8, -5.9]];
    for u in pts {
        let x = r.x_star(&u);
        assert!((x[0] - (3.2535 - 0.9753 * u[0]) / 0.2210).abs() < 1e-10);
        let fwd = pop.forward_solve(&u).unwrap();
        assert_eq!(fwd.active_set, vec![3]);
        assert!((fwd.x[0] - x[0]).abs() < 1e-8 && (fwd.x[1] - x[1]).abs() < 1e-8);
    }
    // affine law keeps collinear points collinear
    let (a, b) = ([4.2, -4.4], [5.6, -5.6]);
    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let (xa, xb, xm) = (r.x_star(&a), r.x_star(&b), r.x_star(&mid));
    for j in 0..2 {
        assert!((xm[j] - (xa[j] + xb[j]) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn dependent_active_set_is_rejected() {
    let pop = reference_instance();
    // constraints 1 and 4 both bound x₁ alone
    assert!(matches!(region_from_active_set(&pop, &[0, 3]), Err(Error::Degenerate(_))));
}

#[test]
fn reference_map_agrees_with_forward_solves() {
    let pop = reference_instance();
    let map = enumerate_regions(&pop, pop.u_box(), DEFAULT_GRID_DENSITY).unwrap();
    assert!(map.coverage_fraction >= 0.99);
    let oracle = oracle_labels(&pop, 200);
    let found: BTreeSet<Vec<usize>> = map.regions.iter().map(|r| r.active_set.clone()).collect();
    assert_eq!(found, oracle);

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let u = uniform(&mut rng, pop.u_box());
        let x = composite_law(&map, &u).unwrap();
        let fwd = pop.forward_solve(&u).unwrap();
        for j in 0..2 {
            assert!((x[j] - fwd.x[j]).abs() < 1e-6, "u = {u:?}");
        }
    }
}

#[test]
fn dual_law_nonnegative_and_chebyshev_center_located() {
    let pop = generate_random_pop(2, 6, 2, 21).unwrap();
    let map = enumerate_regions(&pop, pop.u_box(), 40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (k, r) in map.regions.iter().enumerate() {
        let (c, radius) = r.chebyshev_center().unwrap();
        assert!(radius > 0.0);
        assert_eq!(locate_region(&map, &c).unwrap(), k);
        // rejection-sample interior points of the region
        let mut hits = 0;
        for _ in 0..20_000 {
            if hits == 100 {
                break;
            }
            let u = uniform(&mut rng, pop.u_box());
            if !r.contains(&u, -1e-9) {
                continue;
            }
            hits += 1;
            assert!(r.lambda_active(&u).iter().all(|&l| l >= -1e-7));
            let fwd = pop.forward_solve(&u).unwrap();
            let x = r.x_star(&u);
            assert!((0..2).all(|j| (x[j] - fwd.x[j]).abs() <= 1e-6));
        }
    }
}

#[test]
fn map_json_round_trip_and_svg() {
    let pop = reference_instance();
    let map = enumerate_regions(&pop, pop.u_box(), 30).unwrap();
    let back = RegionMap::from_json(&map.to_json()).unwrap();
    assert_eq!(back.len(), map.len());
    for (a, b) in back.regions.iter().zip(&map.regions) {
        assert_eq!(a.active_set, b.active_set);
        assert!((&a.g_mat - &b.g_mat).amax() < 1e-12);
    }
    let svg = render_svg(&map).unwrap();
    assert_eq!(svg.matches("<polygon").count(), map.len());
}

#[test]
fn box_selection_hits_target_counts() {
    let pop = generate_random_pop(2, 6, 2, 3).unwrap();
    for target in [1, 3] {
        let bx = select_box_with_region_count(&pop, target, &[2.0, 2.0], 0.10).unwrap();
        assert!((bx[0].1 - bx[0].0 - 2.0).abs() < 1e-12);
        let hist = label_histogram(&pop, &bx, 50).unwrap();
        assert_eq!(hist.len(), target, "{hist:?}");
        assert!(hist.iter().all(|(_, s)| *s >= 0.05), "{hist:?}");
    }
    let err = select_box_with_region_count(&pop, 3, &[2.0, 2.0], 0.5);
    assert!(matches!(err, Err(Error::NotFound(_))));
}
