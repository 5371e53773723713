//! Numerical checks of optimality: random and locally optimised competitors,
//! near-extremal class functions, and the sign-change counter.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error_profile::{residual, worst_case_error, ProfileError};
use crate::kernels::{FourierKernel, Side};
use crate::optimal::{optimal_error, optimal_lambda, OptimalError, OptimalReport};
use crate::quadrature::{cyclic_offset, ConvolutionFunction, IntervalQuadrature, PiecewiseConstant, QuadratureError, Violation};
use crate::simplex::{minimize, SimplexOptions};

/// Ratios below `1 - RATIO_TOL` would contradict optimality.
pub const RATIO_TOL: f64 = 1e-9;
/// Search gaps below `-GAP_TOL` would contradict optimality.
pub const GAP_TOL: f64 = 1e-6;
/// Samples smaller than this in magnitude are skipped when counting sign changes.
pub const NU_THRESHOLD: f64 = 1e-12;
pub const MIN_NU_GRID: usize = 256;
/// Every gap gets at least this share of the free length `2 pi - 2 n h`, so
/// decoded knots stay strictly separated after rounding.
pub const SLACK_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("{0}")]
    Infeasible(#[from] Violation),
    #[error("{0}")]
    Profile(#[from] ProfileError),
    #[error("{0}")]
    Optimal(#[from] OptimalError),
    #[error("{0}")]
    Quadrature(#[from] QuadratureError),
    #[error("half-width must satisfy 0 < h < pi/n for random formulas (h = {0})")]
    ZeroWidth(f64),
    #[error("spike half-width must lie in (0, 0.1), got {0}")]
    InvalidDelta(f64),
    #[error("spikes at {0} and {1} overlap for this delta")]
    Overlap(f64, f64),
    #[error("sign-change grid must have at least {MIN_NU_GRID} points, got {0}")]
    GridTooSmall(usize),
    #[error("need at least one {0}")]
    NoTrials(&'static str),
}

/// Maps unconstrained coordinates onto `Q_{n,h}` with the first knot at 0.
///
/// Gap `k` is `2h + w_k (2 pi - 2 n h)` where the shares `w_k` come from the
/// slacks; weights are all free, or the first `n - 1` with
/// `c_n = 2 pi - sum c_k` for zero-mean kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleParametrization {
    pub n: usize,
    pub h: f64,
    pub zero_mean: bool,
}

impl FeasibleParametrization {
    pub fn new(n: usize, h: f64, zero_mean: bool) -> Result<Self, Violation> {
        crate::optimal::check_half_width(n, h)?;
        Ok(FeasibleParametrization { n, h, zero_mean })
    }

    pub fn free_weights(&self) -> usize {
        if self.zero_mean {
            self.n - 1
        } else {
            self.n
        }
    }

    /// Length of a search point: `n` slack coordinates then the free weights.
    pub fn dim(&self) -> usize {
        self.n + self.free_weights()
    }

    pub fn decode(&self, slacks: &[f64], free: &[f64]) -> Result<IntervalQuadrature, Violation> {
        let n = self.n;
        let total: f64 = slacks.iter().map(|s| s.max(0.0)).sum();
        let shares: Vec<f64> = if total > 0.0 && total.is_finite() {
            slacks
                .iter()
                .map(|s| (1.0 - n as f64 * SLACK_FLOOR) * s.max(0.0) / total + SLACK_FLOOR)
                .collect()
        } else {
            vec![1.0 / n as f64; n]
        };
        let free_len = TAU - 2.0 * n as f64 * self.h;
        let mut knots = Vec::with_capacity(n);
        let mut x = 0.0;
        for share in shares.iter().take(n) {
            knots.push(x);
            x += 2.0 * self.h + share * free_len;
        }
        let mut weights = free[..self.free_weights()].to_vec();
        if self.zero_mean {
            weights.push(TAU - weights.iter().sum::<f64>());
        }
        IntervalQuadrature::new(self.h, knots, weights)
    }

    /// Search coordinates: slacks are squared so any real point is admissible.
    pub fn decode_point(&self, y: &[f64]) -> Result<IntervalQuadrature, Violation> {
        let slacks: Vec<f64> = y[..self.n].iter().map(|v| v * v).collect();
        self.decode(&slacks, &y[self.n..])
    }

    /// Search point of the equidistant formula with common weight `lambda`.
    pub fn equidistant_point(&self, lambda: f64) -> Vec<f64> {
        let mut y = vec![1.0; self.n];
        y.extend(std::iter::repeat_n(lambda, self.free_weights()));
        y
    }

    fn random_parts(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let slacks = (0..self.n).map(|_| rng.gen::<f64>()).collect();
        let bound = 4.0 * PI / self.n as f64;
        let weights = (0..self.free_weights()).map(|_| rng.gen_range(-bound..=bound)).collect();
        (slacks, weights)
    }
}

/// A random member of `Q_{n,h}`, deterministic in `seed`.
pub fn random_feasible(n: usize, h: f64, zero_mean: bool, seed: u64) -> Result<IntervalQuadrature, VerifyError> {
    if !(h > 0.0) {
        return Err(VerifyError::ZeroWidth(h));
    }
    let param = FeasibleParametrization::new(n, h, zero_mean)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (slacks, weights) = param.random_parts(&mut rng);
    Ok(param.decode(&slacks, &weights)?)
}

#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub optimal_value: f64,
    pub min_ratio: f64,
    pub trials: usize,
    pub seed: u64,
    /// Competitors beating the optimal value by more than the ratio tolerance.
    pub failures: Vec<IntervalQuadrature>,
}

impl PerturbationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.min_ratio >= 1.0 - RATIO_TOL
    }
}

/// Worst-case error ratios of the given competitors to the optimal formula.
pub fn compare_to_optimal<I>(
    kernel: &FourierKernel,
    optimal: &OptimalReport,
    competitors: I,
    grid_size: usize,
    seed: u64,
) -> Result<PerturbationReport, VerifyError>
where
    I: IntoIterator<Item = IntervalQuadrature>,
{
    let mut min_ratio = f64::INFINITY;
    let mut failures = Vec::new();
    let mut trials = 0;
    for q in competitors {
        trials += 1;
        let value = worst_case_error(kernel, &q, grid_size)?.value();
        let ratio = value / optimal.value;
        if ratio < 1.0 - RATIO_TOL {
            failures.push(q);
        }
        min_ratio = min_ratio.min(ratio);
    }
    if trials == 0 {
        return Err(VerifyError::NoTrials("trial"));
    }
    Ok(PerturbationReport {
        optimal_value: optimal.value,
        min_ratio,
        trials,
        seed,
        failures,
    })
}

/// Compares `trials` random formulas (seeds `seed + i`) with the optimal one.
pub fn perturbation_test(
    kernel: &FourierKernel,
    n: usize,
    h: f64,
    trials: usize,
    seed: u64,
    grid_size: usize,
) -> Result<PerturbationReport, VerifyError> {
    if trials == 0 {
        return Err(VerifyError::NoTrials("trial"));
    }
    let optimal = optimal_error(kernel, n, h, grid_size)?;
    let competitors = (0..trials as u64)
        .map(|i| random_feasible(n, h, kernel.has_zero_mean(), seed.wrapping_add(i)))
        .collect::<Result<Vec<_>, _>>()?;
    compare_to_optimal(kernel, &optimal, competitors, grid_size, seed)
}

#[derive(Debug, Clone)]
pub struct SearchReport {
    pub optimal_value: f64,
    pub best_value: f64,
    /// Anchored with its first knot at 0.
    pub best_q: IntervalQuadrature,
    pub gap: f64,
    pub starts: usize,
    pub seed: u64,
}

impl SearchReport {
    pub fn passed(&self) -> bool {
        self.gap >= -GAP_TOL
    }
}

/// Simplex descent on the worst-case error from the equidistant point and
/// from `starts` random points (seeds `seed + i`).
pub fn local_search(
    kernel: &FourierKernel,
    n: usize,
    h: f64,
    starts: usize,
    seed: u64,
    grid_size: usize,
) -> Result<SearchReport, VerifyError> {
    local_search_with(kernel, n, h, starts, seed, grid_size, &SimplexOptions::default())
}

pub fn local_search_with(
    kernel: &FourierKernel,
    n: usize,
    h: f64,
    starts: usize,
    seed: u64,
    grid_size: usize,
    opts: &SimplexOptions,
) -> Result<SearchReport, VerifyError> {
    if starts == 0 {
        return Err(VerifyError::NoTrials("start"));
    }
    let optimal = optimal_error(kernel, n, h, grid_size)?;
    let param = FeasibleParametrization::new(n, h, kernel.has_zero_mean())?;
    let lambda = optimal_lambda(kernel, n, h, grid_size)?;

    let objective = |y: &[f64]| match param.decode_point(y) {
        Ok(q) => worst_case_error(kernel, &q, grid_size)
            .map(|w| w.value())
            .unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    };

    let mut points = vec![param.equidistant_point(lambda)];
    for i in 0..starts as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
        let (slacks, weights) = param.random_parts(&mut rng);
        let mut y: Vec<f64> = slacks.iter().map(|s| s.sqrt()).collect();
        y.extend(weights);
        points.push(y);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for y0 in &points {
        let m = minimize(objective, y0, opts);
        // ties keep the earlier start, so the equidistant point wins them
        if best.as_ref().is_none_or(|(v, _)| m.value < *v - 1e-12 * v.abs()) {
            best = Some((m.value, m.x));
        }
    }
    let (best_value, best_y) = best.expect("at least one start");
    let best_q = param.decode_point(&best_y)?;
    Ok(SearchReport {
        optimal_value: optimal.value,
        best_value,
        best_q,
        gap: best_value - optimal.value,
        starts,
        seed,
    })
}

/// Sorted cyclic gaps between consecutive knots; equal for equidistant formulas
/// up to rotation.
pub fn gap_multiset(q: &IntervalQuadrature) -> Vec<f64> {
    let knots = q.knots();
    let n = knots.len();
    let mut gaps: Vec<f64> = (0..n)
        .map(|k| {
            if k + 1 < n {
                knots[k + 1] - knots[k]
            } else {
                knots[0] + TAU - knots[k]
            }
        })
        .collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gaps
}

/// A class function whose error nearly attains the worst case: unit-mass
/// spikes of half-width `delta` at the extrema of `M(q, .)`.
pub fn near_extremal(
    kernel: &FourierKernel,
    q: &IntervalQuadrature,
    delta: f64,
    grid_size: usize,
) -> Result<ConvolutionFunction, VerifyError> {
    if !(delta > 0.0 && delta < 0.1) {
        return Err(VerifyError::InvalidDelta(delta));
    }
    let p = crate::error_profile::profile(kernel, q, grid_size)?;
    // A one-sided extremum at a jump gets its spike on that side.
    let center = |point: f64, side: Side| match side {
        Side::Right => point + delta,
        Side::Left => point - delta,
        Side::Mid => point,
    };
    let boxes = if kernel.has_zero_mean() {
        let up = center(p.max.point, p.max.side);
        let down = center(p.min.point, p.min.side);
        if cyclic_offset(up, down).abs() < 2.0 * delta * (1.0 - 1e-9) {
            return Err(VerifyError::Overlap(up, down));
        }
        vec![(up, delta, 1.0), (down, delta, -1.0)]
    } else {
        let ext = if p.max.value.abs() >= p.min.value.abs() { p.max } else { p.min };
        vec![(center(ext.point, ext.side), delta, ext.value.signum())]
    };
    let phi = unit_mass(&PiecewiseConstant::from_boxes(&boxes)?)?;
    Ok(ConvolutionFunction::new(kernel.clone(), 0.0, phi)?)
}

/// Rescales positive and negative parts to mass 1/2 each, or a one-signed
/// function to mass 1, using the stored piece widths.
fn unit_mass(phi: &PiecewiseConstant) -> Result<PiecewiseConstant, VerifyError> {
    let mass = |sign: f64| -> f64 {
        phi.pieces()
            .filter(|&(_, _, v)| v * sign > 0.0)
            .map(|(a, b, v)| v.abs() * (b - a))
            .sum()
    };
    let (pos, neg) = (mass(1.0), mass(-1.0));
    let target = if pos > 0.0 && neg > 0.0 { 0.5 } else { 1.0 };
    let values = phi
        .pieces()
        .map(|(_, _, v)| {
            if v > 0.0 {
                v * target / pos
            } else if v < 0.0 {
                v * target / neg
            } else {
                0.0
            }
        })
        .collect();
    Ok(PiecewiseConstant::new(phi.breaks().to_vec(), values)?)
}

/// `residual / worst-case error` for the near-extremal function.
pub fn saturation(
    kernel: &FourierKernel,
    q: &IntervalQuadrature,
    delta: f64,
    grid_size: usize,
) -> Result<f64, VerifyError> {
    let f = near_extremal(kernel, q, delta, grid_size)?;
    let value = worst_case_error(kernel, q, grid_size)?.value();
    Ok(residual(kernel, q, &f) / value)
}

/// Sign changes of `f` around the circle, sampled on a uniform grid.
pub fn count_sign_changes<F>(f: F, grid_size: usize) -> Result<usize, VerifyError>
where
    F: Fn(f64) -> f64,
{
    if grid_size < MIN_NU_GRID {
        return Err(VerifyError::GridTooSmall(grid_size));
    }
    let signs: Vec<bool> = (0..grid_size)
        .map(|i| f(TAU * i as f64 / grid_size as f64))
        .filter(|v| v.abs() >= NU_THRESHOLD)
        .map(|v| v > 0.0)
        .collect();
    if signs.is_empty() {
        return Ok(0);
    }
    let m = signs.len();
    Ok((0..m).filter(|&i| signs[i] != signs[(i + 1) % m]).count())
}

/// `sum_j a_j cos(jt) + b_j sin(jt)`, `j >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn eval(&self, t: f64) -> f64 {
        let c: f64 = self.cos.iter().enumerate().map(|(j, a)| a * ((j + 1) as f64 * t).cos()).sum();
        let s: f64 = self.sin.iter().enumerate().map(|(j, b)| b * ((j + 1) as f64 * t).sin()).sum();
        c + s
    }

    /// Random polynomial whose top harmonic dominates, so it has exactly
    /// `2 degree` sign changes per period.
    pub fn random(degree: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cos: Vec<f64> = (0..degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut sin: Vec<f64> = (0..degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if degree > 0 {
            let lower: f64 = (0..degree - 1).map(|j| cos[j].abs() + sin[j].abs()).sum();
            let shrink = if lower > 0.0 { 0.9 / lower } else { 0.0 };
            for j in 0..degree - 1 {
                cos[j] *= shrink.min(1.0);
                sin[j] *= shrink.min(1.0);
            }
            let phase = rng.gen_range(0.0..TAU);
            cos[degree - 1] = phase.cos();
            sin[degree - 1] = phase.sin();
        }
        TrigPoly { cos, sin }
    }
}

/// `sign(p) / (2 pi)` as a step function, roots located on `grid_size`
/// samples and refined by bisection.
pub fn sign_pattern(p: &TrigPoly, grid_size: usize) -> Result<PiecewiseConstant, VerifyError> {
    let step = TAU / grid_size as f64;
    // half-step offset keeps samples off roots at multiples of the step
    let samples: Vec<(f64, f64)> = (0..grid_size)
        .map(|i| {
            let t = (i as f64 + 0.5) * step;
            (t, p.eval(t))
        })
        .collect();
    let mut breaks = Vec::new();
    let mut values = Vec::new();
    for i in 0..grid_size {
        let (a, fa) = samples[i];
        let (b, fb) = if i + 1 < grid_size {
            samples[i + 1]
        } else {
            (samples[0].0 + TAU, samples[0].1)
        };
        if fa == 0.0 || fb == 0.0 || fa.signum() == fb.signum() {
            continue;
        }
        let (mut lo, mut hi) = (a, b);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if p.eval(mid).signum() == fa.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        breaks.push(0.5 * (lo + hi));
        values.push(fb.signum() / TAU);
    }
    if breaks.is_empty() {
        return Ok(PiecewiseConstant::new(vec![0.0], vec![samples[0].1.signum() / TAU])?);
    }
    Ok(PiecewiseConstant::new(breaks, values)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuRow {
    pub label: String,
    pub nu_phi: usize,
    pub nu_conv: usize,
}

impl NuRow {
    pub fn ok(&self) -> bool {
        self.nu_conv <= self.nu_phi
    }
}

/// `nu(phi)` and `nu(K * phi)` for `phi = sign(p)` (centred for zero-mean kernels).
pub fn nu_check(kernel: &FourierKernel, p: &TrigPoly, label: &str, grid_size: usize) -> Result<NuRow, VerifyError> {
    let mut phi = sign_pattern(p, grid_size)?;
    if kernel.has_zero_mean() {
        phi = phi.centered();
    }
    let nu_phi = count_sign_changes(|t| phi.value_at(t), grid_size)?;
    let f = ConvolutionFunction::new(kernel.clone(), 0.0, phi)?;
    let nu_conv = count_sign_changes(|t| f.eval(t), grid_size)?;
    Ok(NuRow {
        label: label.to_string(),
        nu_phi,
        nu_conv,
    })
}

/// `sign(sin(jt))` for `j = 1, 2, 3` followed by `random` random patterns.
pub fn nu_table(kernel: &FourierKernel, random: usize, seed: u64, grid_size: usize) -> Result<Vec<NuRow>, VerifyError> {
    let mut rows = Vec::new();
    for j in 1..=3 {
        let mut sin = vec![0.0; j];
        sin[j - 1] = 1.0;
        let p = TrigPoly { cos: vec![0.0; j], sin };
        rows.push(nu_check(kernel, &p, &format!("sin({j}t)"), grid_size)?);
    }
    for i in 0..random as u64 {
        let p = TrigPoly::random(1 + (i as usize % 3), seed.wrapping_add(i));
        rows.push(nu_check(kernel, &p, &format!("random#{}", seed.wrapping_add(i)), grid_size)?);
    }
    Ok(rows)
}
