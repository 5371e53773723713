//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use optquad::error_profile::{error_kernel, grid_floor, profile, residual, worst_case_error};
use optquad::integrate::integrate_with_breaks;
use optquad::kernels::{make_bernoulli, make_rational, FourierKernel};
use optquad::optimal::{optimal_error, rectangle_limit, solve_lambda_star};
use optquad::quadrature::{reduce, IntervalQuadrature};
use optquad::verify::{local_search, near_extremal, nu_check, perturbation_test, random_feasible, TrigPoly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, title: &str, started: Instant, outcome: &Outcome) {
    println!(
        "{} criterion {id} ({title}): {} [{:.1}s]",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.detail,
        started.elapsed().as_secs_f64()
    );
}

fn mean_free_cases() -> Vec<(FourierKernel, usize, f64)> {
    let mut cases = Vec::new();
    for r in 1..=3 {
        for n in [2, 3, 5] {
            for frac in [0.1, 0.5, 0.9] {
                cases.push((make_bernoulli(r).unwrap(), n, frac * PI / n as f64));
            }
        }
    }
    cases
}

fn signed_cases() -> Vec<(FourierKernel, usize, f64)> {
    let k = make_rational(&[1.0, -1.0]).unwrap();
    let mut cases = Vec::new();
    for n in [2, 3] {
        for frac in [0.3, 0.6] {
            cases.push((k.clone(), n, frac * PI / n as f64));
        }
    }
    cases
}

/// Perturbation (200 trials) and local search (20 starts) for each case.
fn dominance(cases: &[(FourierKernel, usize, f64)], failures: &mut Vec<String>) -> (f64, f64) {
    let mut worst_ratio = f64::INFINITY;
    let mut worst_gap = f64::INFINITY;
    for (i, (k, n, h)) in cases.iter().enumerate() {
        let grid = grid_floor(*n);
        let seed = 1000 * i as u64;
        let p = perturbation_test(k, *n, *h, 200, seed, grid).unwrap();
        worst_ratio = worst_ratio.min(p.min_ratio);
        if p.min_ratio < 1.0 - 1e-9 {
            failures.push(format!("{k} n={n} h={h:.4}: min_ratio {}", p.min_ratio));
        }
        let s = local_search(k, *n, *h, 20, seed, grid).unwrap();
        worst_gap = worst_gap.min(s.gap);
        if s.gap < -1e-6 || s.gap > 1e-6 * s.optimal_value {
            failures.push(format!("{k} n={n} h={h:.4}: gap {}", s.gap));
        }
    }
    (worst_ratio, worst_gap)
}

fn criterion_1() -> Outcome {
    let cases = mean_free_cases();
    let mut failures = Vec::new();
    let (ratio, gap) = dominance(&cases, &mut failures);
    Outcome {
        pass: failures.is_empty(),
        detail: format!("{} cases, min ratio {ratio:.12}, min gap {gap:.3e}; {}", cases.len(), failures.join("; ")),
    }
}

/// `max M + min M` along the equidistant family, bisected in `lambda`.
fn bisect_lambda(k: &FourierKernel, n: usize, h: f64) -> f64 {
    let g = |l: f64| {
        let q = IntervalQuadrature::equidistant(n, h, l).unwrap();
        let p = profile(k, &q, grid_floor(n)).unwrap();
        p.max.value + p.min.value
    };
    let (mut lo, mut hi) = (1e-3, 1e-3);
    let s = g(lo).signum();
    while g(hi).signum() == s {
        lo = hi;
        hi *= 2.0;
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

fn criterion_2() -> Outcome {
    let cases = signed_cases();
    let mut failures = Vec::new();
    let (ratio, gap) = dominance(&cases, &mut failures);
    let mut worst_eq: f64 = 0.0;
    let mut worst_lambda: f64 = 0.0;
    for (k, n, h) in &cases {
        let r = optimal_error(k, *n, *h, grid_floor(*n)).unwrap();
        worst_eq = worst_eq.max(r.equioscillation_residual);
        if r.equioscillation_residual > 1e-9 {
            failures.push(format!("n={n} h={h:.4}: equioscillation {}", r.equioscillation_residual));
        }
        let closed = solve_lambda_star(k, *n, *h, grid_floor(*n)).unwrap().lambda;
        let diff = (closed - bisect_lambda(k, *n, *h)).abs();
        worst_lambda = worst_lambda.max(diff);
        if diff > 1e-10 {
            failures.push(format!("n={n} h={h:.4}: lambda* off bisection by {diff}"));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{} cases, min ratio {ratio:.12}, min gap {gap:.3e}, equioscillation {worst_eq:.2e}, lambda* vs bisection {worst_lambda:.2e}; {}",
            cases.len(),
            failures.join("; ")
        ),
    }
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let mut min_sat = f64::INFINITY;
    let mut worst_direct: f64 = 0.0;
    let cases: Vec<_> = mean_free_cases().into_iter().chain(signed_cases()).collect();
    for (k, n, h) in &cases {
        let grid = grid_floor(*n);
        let opt = optimal_error(k, *n, *h, grid).unwrap();
        let q = &opt.quadrature;
        let value = worst_case_error(k, q, grid).unwrap().value();
        let f = near_extremal(k, q, 1e-3, grid).unwrap();
        let res = residual(k, q, &f);
        let sat = res / value;
        min_sat = min_sat.min(sat);
        if sat < 0.99 {
            failures.push(format!("{k} n={n} h={h:.4}: saturation {sat}"));
        }
        let direct = f.integral() - q.apply_with_breaks(|t| f.eval(t), f.phi().breaks(), 1e-11).unwrap();
        worst_direct = worst_direct.max((res - direct).abs());
        if (res - direct).abs() > 1e-7 {
            failures.push(format!("{k} n={n} h={h:.4}: residual {res} vs direct {direct}"));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{} cases, min saturation {min_sat:.6}, max |residual - direct| {worst_direct:.2e}; {}",
            cases.len(),
            failures.join("; ")
        ),
    }
}

fn criterion_4() -> Outcome {
    let k = make_bernoulli(1).unwrap();
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for n in [1, 2, 4] {
        let r = rectangle_limit(&k, n, &[1e-2, 1e-3], grid_floor(n)).unwrap();
        let limit_err = (r.limit - PI / n as f64).abs();
        if limit_err > 1e-9 {
            failures.push(format!("n={n}: value(0) off pi/n by {limit_err}"));
        }
        let drift = (r.points[1].1 - r.limit).abs();
        if drift > 1e-4 {
            failures.push(format!("n={n}: |value(1e-3) - value(0)| = {drift:.6e} > 1e-4"));
        }
        parts.push(format!("n={n}: value(0)-pi/n {limit_err:.1e}, drift {drift:.3e}"));
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("{}; {}", parts.join(", "), failures.join("; ")),
    }
}

/// `integral K(t - u) [1 - H(q; t)] dt` by adaptive quadrature.
fn direct_m(k: &FourierKernel, q: &IntervalQuadrature, u: f64) -> f64 {
    let mut breaks: Vec<f64> = q
        .knots()
        .iter()
        .flat_map(|x| [reduce(x - q.h() - u), reduce(x + q.h() - u)])
        .collect();
    breaks.push(0.0);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // substitute s = t - u so the kernel singularity sits at the endpoints
    integrate_with_breaks(
        &|s: f64| k.eval(s) * (1.0 - q.step_function(s + u).unwrap()),
        0.0,
        TAU,
        &breaks,
        1e-12,
    )
    .unwrap()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let kernels = ["bernoulli:1", "bernoulli:2", "bernoulli:3", "bernoulli:4", "poly:1,-1", "poly:0,2", "poly:0.5,-0.5,2"];
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for case in 0..6 {
        let k: FourierKernel = kernels[rng.gen_range(0..kernels.len())].parse().unwrap();
        let n = rng.gen_range(1..6);
        let h = rng.gen_range(0.05..0.95) * PI / n as f64;
        let q = random_feasible(n, h, k.has_zero_mean(), rng.gen()).unwrap();
        for _ in 0..200 {
            let u = rng.gen_range(0.0..TAU);
            let d = (error_kernel(&k, &q, u) - direct_m(&k, &q, u)).abs();
            worst = worst.max(d);
            if d > 1e-8 {
                failures.push(format!("case {case} ({k}, n={n}) u={u}: {d:.2e}"));
            }
        }
    }
    let mut worst_period: f64 = 0.0;
    for spec in ["bernoulli:1", "bernoulli:2", "bernoulli:3", "poly:1,-1"] {
        let k: FourierKernel = spec.parse().unwrap();
        for n in [2, 3, 5] {
            let q = IntervalQuadrature::equidistant(n, 0.4 * PI / n as f64, TAU / n as f64).unwrap();
            for _ in 0..50 {
                let u = rng.gen_range(0.0..TAU);
                let d = (error_kernel(&k, &q, u) - error_kernel(&k, &q, u + TAU / n as f64)).abs();
                worst_period = worst_period.max(d);
                if d > 1e-10 {
                    failures.push(format!("{spec} n={n}: period defect {d:.2e} at {u}"));
                }
            }
        }
    }
    failures.truncate(10);
    Outcome {
        pass: failures.is_empty(),
        detail: format!("max |M - direct| {worst:.2e}, max period defect {worst_period:.2e}; {}", failures.join("; ")),
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    for case in 0..10 {
        let k = make_bernoulli(rng.gen_range(1..4)).unwrap();
        let n = rng.gen_range(1..6);
        let h = rng.gen_range(0.05..0.95) * PI / n as f64;
        let q = random_feasible(n, h, true, rng.gen()).unwrap();
        // push the sum away from 2 pi by at least 1e-9
        let off = rng.gen_range(2e-9..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut w = q.weights().to_vec();
        w[0] += off;
        let q = q.with_weights(w).unwrap();
        let wc = worst_case_error(&k, &q, grid_floor(n)).unwrap();
        let text = serde_json::to_string(&wc.to_json()).unwrap();
        if !(wc.value().is_infinite() && text.starts_with(r#"{"value":"inf""#)) {
            failures.push(format!("case {case}: sum off by {off:.2e} gave {text}"));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("10 cases; {}", failures.join("; ")),
    }
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let mut counts = [0usize; 4];
    for spec in ["bernoulli:2", "poly:1,-1"] {
        let k: FourierKernel = spec.parse().unwrap();
        let mut seed = 0u64;
        let mut used = 0;
        while used < 50 {
            let p = TrigPoly::random(1 + (seed as usize % 3), 7000 + seed);
            seed += 1;
            let row = nu_check(&k, &p, "random", 8192).unwrap();
            if ![2, 4, 6].contains(&row.nu_phi) {
                continue;
            }
            used += 1;
            counts[row.nu_phi / 2] += 1;
            if !row.ok() {
                failures.push(format!("{spec} pattern {}: nu(K*phi) = {} > nu(phi) = {}", seed - 1, row.nu_conv, row.nu_phi));
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "100 patterns, nu(phi) = 2/4/6: {}/{}/{}; {}",
            counts[1],
            counts[2],
            counts[3],
            failures.join("; ")
        ),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("optimality, mean-free kernels", criterion_1),
        ("optimality, signed kernel", criterion_2),
        ("duality saturation", criterion_3),
        ("rectangle-rule limit", criterion_4),
        ("error kernel correctness", criterion_5),
        ("infinity gate", criterion_6),
        ("sign-change diminishing", criterion_7),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let outcome = run();
        report(id, title, started, &outcome);
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
