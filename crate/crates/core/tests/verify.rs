use std::f64::consts::{PI, TAU};

use optquad::error_profile::{grid_floor, residual, worst_case_error};
use optquad::kernels::{make_bernoulli, make_rational};
use optquad::optimal::optimal_error;
use optquad::quadrature::{ConvolutionFunction, IntervalQuadrature};
use optquad::simplex::SimplexOptions;
use optquad::verify::*;

#[test]
fn perturbation_examples() {
    let k = make_bernoulli(2).unwrap();
    let r = perturbation_test(&k, 3, 0.2, 200, 0, grid_floor(3)).unwrap();
    assert!(r.min_ratio >= 1.0 - 1e-9 && r.failures.is_empty(), "{}", r.min_ratio);
    assert_eq!(r.trials, 200);

    let k = make_rational(&[1.0, -1.0]).unwrap();
    let r = perturbation_test(&k, 2, 0.3, 200, 0, grid_floor(2)).unwrap();
    assert!(r.min_ratio >= 1.0 - 1e-9 && r.failures.is_empty(), "{}", r.min_ratio);
}

#[test]
fn perturbation_is_deterministic() {
    let k = make_bernoulli(3).unwrap();
    let a = perturbation_test(&k, 2, 0.5, 20, 42, grid_floor(2)).unwrap();
    let b = perturbation_test(&k, 2, 0.5, 20, 42, grid_floor(2)).unwrap();
    assert_eq!(a.min_ratio, b.min_ratio);
}

#[test]
fn search_from_equidistant_point() {
    let k = make_bernoulli(2).unwrap();
    let opts = SimplexOptions { max_iter: 200, ..Default::default() };
    let r = local_search_with(&k, 3, 0.3, 1, 0, grid_floor(3), &opts).unwrap();
    assert!(r.gap.abs() <= 1e-9, "{}", r.gap);
}

#[test]
fn search_sawtooth_recovers_equidistant_knots() {
    let k = make_bernoulli(1).unwrap();
    let r = local_search(&k, 2, 0.4, 20, 7, grid_floor(2)).unwrap();
    assert!(r.gap >= -1e-6, "{}", r.gap);
    let e = IntervalQuadrature::equidistant(2, 0.4, PI).unwrap();
    for (a, b) in gap_multiset(&r.best_q).iter().zip(gap_multiset(&e)) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn search_higher_order() {
    let k = make_bernoulli(3).unwrap();
    let r = local_search(&k, 5, 0.1, 20, 0, grid_floor(5)).unwrap();
    assert!(r.gap >= -1e-6, "{}", r.gap);
}

#[test]
fn near_extremal_converges() {
    let cases: Vec<(&str, IntervalQuadrature)> = vec![
        ("bernoulli:2", random_feasible(3, 0.3, true, 1).unwrap()),
        ("bernoulli:1", random_feasible(2, 0.5, true, 2).unwrap()),
        ("bernoulli:3", IntervalQuadrature::equidistant(4, 0.2, TAU / 4.0).unwrap()),
        ("poly:1,-1", random_feasible(3, 0.4, false, 3).unwrap()),
        ("poly:1,-1", optimal_error(&make_rational(&[1.0, -1.0]).unwrap(), 2, 0.3, 4096).unwrap().quadrature),
    ];
    for (spec, q) in cases {
        let k = spec.parse().unwrap();
        let value = worst_case_error(&k, &q, 4096).unwrap().value();
        for (delta, rel) in [(1e-3, 1e-2), (1e-4, 1e-3)] {
            let f: ConvolutionFunction = near_extremal(&k, &q, delta, 4096).unwrap();
            if k.has_zero_mean() {
                assert!(f.phi().integral().abs() < 1e-14);
            }
            assert!((f.phi().l1_norm() - 1.0).abs() < 1e-14);
            let r = residual(&k, &q, &f);
            assert!((value - r).abs() <= rel * value, "{spec}, delta {delta}: {r} vs {value}");
        }
    }
}

#[test]
fn near_extremal_rejects_bad_delta() {
    let k = make_bernoulli(2).unwrap();
    let q = IntervalQuadrature::equidistant(2, 0.1, PI).unwrap();
    assert!(matches!(near_extremal(&k, &q, 0.0, 4096), Err(VerifyError::InvalidDelta(_))));
    assert!(matches!(near_extremal(&k, &q, 0.1, 4096), Err(VerifyError::InvalidDelta(_))));
}

#[test]
fn sign_changes_are_grid_stable() {
    let k = make_bernoulli(2).unwrap();
    for j in 1..=3usize {
        let mut sin = vec![0.0; j];
        sin[j - 1] = 1.0;
        let p = TrigPoly { cos: vec![0.0; j], sin };
        let row = nu_check(&k, &p, "sin", 8192).unwrap();
        assert_eq!(row.nu_phi, 2 * j);
        assert!(row.ok());
        let finer = nu_check(&k, &p, "sin", 16384).unwrap();
        assert!(finer.nu_conv >= row.nu_conv);
    }
    assert_eq!(count_sign_changes(|t| (3.0 * t).sin(), 4096).unwrap(), 6);
    assert_eq!(count_sign_changes(|_| 1.0, 4096).unwrap(), 0);
}

#[test]
fn random_patterns_have_even_counts() {
    let k = make_rational(&[1.0, -1.0]).unwrap();
    for row in nu_table(&k, 10, 5, 8192).unwrap() {
        assert!(row.nu_phi % 2 == 0 && row.nu_conv % 2 == 0);
        assert!([2, 4, 6].contains(&row.nu_phi), "{row:?}");
        assert!(row.ok(), "{row:?}");
    }
}
