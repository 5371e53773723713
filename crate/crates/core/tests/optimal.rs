use std::f64::consts::{PI, TAU};

use optquad::error_profile::{grid_floor, profile, worst_case_error};
use optquad::kernels::{make_bernoulli, make_rational, FourierKernel};
use optquad::optimal::{optimal_error, solve_lambda_star};
use optquad::quadrature::IntervalQuadrature;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `max M + min M` for the equidistant formula with weight `lambda`.
fn equioscillation_gap(k: &FourierKernel, n: usize, h: f64, lambda: f64) -> f64 {
    let q = IntervalQuadrature::equidistant(n, h, lambda).unwrap();
    let p = profile(k, &q, grid_floor(n)).unwrap();
    p.max.value + p.min.value
}

/// Root of the equioscillation gap by bisection, bracket found by doubling.
fn bisect_lambda(k: &FourierKernel, n: usize, h: f64) -> f64 {
    let g = |l: f64| equioscillation_gap(k, n, h, l);
    let (mut lo, mut hi) = (1e-3, 1e-3);
    let s = g(lo).signum();
    while g(hi).signum() == s {
        lo = hi;
        hi *= 2.0;
        assert!(hi < 1e6, "no sign change");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid).signum() == s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn lambda_star_matches_bisection() {
    let k = make_rational(&[1.0, -1.0]).unwrap();
    for (n, h) in [(3, 0.2), (2, 0.3 * PI / 2.0), (2, 0.6 * PI / 2.0), (3, 0.3 * PI / 3.0), (3, 0.6 * PI / 3.0)] {
        let closed = solve_lambda_star(&k, n, h, grid_floor(n)).unwrap().lambda;
        let oracle = bisect_lambda(&k, n, h);
        assert!((closed - oracle).abs() < 1e-10, "n = {n}, h = {h}: {closed} vs {oracle}");
        assert!(closed > 0.0);
    }
}

#[test]
fn lambda_star_is_optimal_in_lambda() {
    let k = make_rational(&[1.0, -1.0]).unwrap();
    let (n, h) = (2, 0.3);
    let best = optimal_error(&k, n, h, grid_floor(n)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let lambda = best.lambda_star * rng.gen_range(0.0..3.0);
        let q = IntervalQuadrature::equidistant(n, h, lambda).unwrap();
        let v = worst_case_error(&k, &q, grid_floor(n)).unwrap().value();
        assert!(v >= best.value - 1e-12, "lambda = {lambda}: {v} < {}", best.value);
        if (lambda - best.lambda_star).abs() > 1e-3 {
            assert!(v > best.value);
        }
    }
}

#[test]
fn value_identity_for_lambda_star() {
    let k = make_rational(&[1.0, -1.0]).unwrap();
    for n in [2, 3, 5] {
        let h = 0.4 * PI / n as f64;
        let ls = solve_lambda_star(&k, n, h, grid_floor(n)).unwrap();
        let r = optimal_error(&k, n, h, grid_floor(n)).unwrap();
        assert!((ls.value - r.value).abs() < 1e-12);
        assert!(r.equioscillation_residual <= 1e-9);
    }
}

#[test]
fn mean_free_optimum_uses_uniform_weight() {
    for r in 1..=4 {
        let k = make_bernoulli(r).unwrap();
        for n in [1, 3, 6] {
            let rep = optimal_error(&k, n, 0.5 * PI / n as f64, grid_floor(n)).unwrap();
            assert_eq!(rep.lambda_star, TAU / n as f64);
            assert!((rep.quadrature.weight_sum() - TAU).abs() < 1e-12);
            assert!(rep.equioscillation_residual <= 1e-9);
        }
    }
}

#[test]
fn n_monotonicity_is_recorded() {
    // not a claim of the theory; violations are reported, not failed
    let mut flagged = Vec::new();
    for r in 1..=3 {
        let k = make_bernoulli(r).unwrap();
        for ratio in [0.0, 0.3, 0.6] {
            let values: Vec<f64> = (1..=6)
                .map(|n| optimal_error(&k, n, ratio * PI / n as f64, grid_floor(n)).unwrap().value)
                .collect();
            for (n, w) in values.windows(2).enumerate() {
                if w[1] > w[0] + 1e-12 {
                    flagged.push((r, ratio, n + 1, w[0], w[1]));
                }
            }
        }
    }
    for f in &flagged {
        println!("n-monotonicity flag: r = {}, h n / pi = {}, n = {}: {} -> {}", f.0, f.1, f.2, f.3, f.4);
    }
}

#[test]
fn sawtooth_values_over_n() {
    let k = make_bernoulli(1).unwrap();
    for n in 1..=8 {
        let r = optimal_error(&k, n, 0.0, grid_floor(n)).unwrap();
        assert!((r.value - PI / n as f64).abs() < 1e-9);
        for frac in [0.2, 0.5, 0.9] {
            let h = frac * PI / n as f64;
            let r = optimal_error(&k, n, h, grid_floor(n)).unwrap();
            assert!((r.value - (PI / n as f64 - h)).abs() < 1e-9, "n = {n}, h = {h}");
        }
    }
}
