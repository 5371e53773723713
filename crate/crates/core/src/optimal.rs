//! The optimal interval formula: equidistant knots with a common weight,
//! `2 pi / n` for zero-mean kernels and the equioscillating `lambda*` otherwise.

use std::f64::consts::{PI, TAU};

use serde::Serialize;
use thiserror::Error;

use crate::error_profile::{profile, worst_case_error, ErrorProfile, ProfileError, ProfileJson};
use crate::kernels::FourierKernel;
use crate::quadrature::{IntervalQuadrature, Violation};
use crate::report::sig17;

/// Grid used to check that a kernel keeps one sign.
pub const SIGN_CHECK_GRID: usize = 4096;

/// Rectangle-limit tolerance: `|value(h) - value(0)|` for `h <= 1e-3`.
pub const LIMIT_TOL: f64 = 1e-4;
pub const LIMIT_H: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimalError {
    #[error("{0}")]
    Quadrature(#[from] Violation),
    #[error("{0}")]
    Profile(#[from] ProfileError),
    #[error("lambda* is only defined for kernels with nonzero mean")]
    ZeroMeanKernel,
    #[error("kernel changes sign (at x = {at}); lambda* needs a one-signed kernel")]
    SignChanging { at: f64 },
}

/// Result of the affine `lambda*` solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaStar {
    pub lambda: f64,
    /// Extrema of `psi(t) = integral K(u - t) H(q_{n,h,1}; u) du`.
    pub psi_max: f64,
    pub psi_min: f64,
    /// `|integral K| (psi_max - psi_min) / |psi_max + psi_min|`.
    pub value: f64,
}

/// Strict one-sign check of `K` on a uniform grid; returns the sign.
pub fn kernel_sign(kernel: &FourierKernel) -> Result<f64, OptimalError> {
    let first = kernel.eval(0.0);
    let sign = first.signum();
    if first == 0.0 {
        return Err(OptimalError::SignChanging { at: 0.0 });
    }
    for i in 1..SIGN_CHECK_GRID {
        let x = TAU * i as f64 / SIGN_CHECK_GRID as f64;
        let v = kernel.eval(x);
        if !(v * sign > 0.0) {
            return Err(OptimalError::SignChanging { at: x });
        }
    }
    Ok(sign)
}

/// `lambda*` for a kernel of nonzero mean.
///
/// `M(q_{n,h,lambda}; t) = integral K - lambda psi(t)` is affine in `lambda`
/// and `psi` keeps the sign of `K`, so `max M + min M = 0` at
/// `lambda* = 2 integral K / (psi_max + psi_min)`, which is positive for
/// either sign of `K`.
pub fn solve_lambda_star(
    kernel: &FourierKernel,
    n: usize,
    h: f64,
    grid_size: usize,
) -> Result<LambdaStar, OptimalError> {
    if kernel.has_zero_mean() {
        return Err(OptimalError::ZeroMeanKernel);
    }
    kernel_sign(kernel)?;
    let unit = IntervalQuadrature::equidistant(n, h, 1.0)?;
    let p = profile(kernel, &unit, grid_size)?;
    let mean = kernel.mean();
    let psi_max = mean - p.min.value;
    let psi_min = mean - p.max.value;
    let lambda = 2.0 * mean / (psi_max + psi_min);
    let value = mean.abs() * (psi_max - psi_min) / (psi_max + psi_min).abs();
    Ok(LambdaStar {
        lambda,
        psi_max,
        psi_min,
        value,
    })
}

#[derive(Debug, Clone)]
pub struct OptimalReport {
    pub kernel: String,
    pub mu: u8,
    pub n: usize,
    pub h: f64,
    pub lambda_star: f64,
    pub value: f64,
    pub quadrature: IntervalQuadrature,
    pub profile: ErrorProfile,
    pub equioscillation_residual: f64,
}

impl OptimalReport {
    pub fn to_json(&self) -> OptimalJson {
        OptimalJson {
            kernel: self.kernel.clone(),
            n: self.n,
            h: self.h,
            lambda_star: self.lambda_star,
            value: self.value,
            equioscillation_residual: self.equioscillation_residual,
            profile: ProfileJson::new(&self.profile, self.value),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalJson {
    pub kernel: String,
    pub n: usize,
    #[serde(serialize_with = "sig17")]
    pub h: f64,
    #[serde(serialize_with = "sig17")]
    pub lambda_star: f64,
    #[serde(serialize_with = "sig17")]
    pub value: f64,
    #[serde(serialize_with = "sig17")]
    pub equioscillation_residual: f64,
    pub profile: ProfileJson,
}

/// Checks `0 <= h < pi / n`.
pub fn check_half_width(n: usize, h: f64) -> Result<(), Violation> {
    if n == 0 {
        return Err(Violation::Empty);
    }
    let bound = PI / n as f64;
    if !(h >= 0.0 && h < bound) {
        return Err(Violation::HalfWidth { h, bound });
    }
    Ok(())
}

/// Common weight of the optimal formula.
pub fn optimal_lambda(kernel: &FourierKernel, n: usize, h: f64, grid_size: usize) -> Result<f64, OptimalError> {
    if kernel.has_zero_mean() {
        check_half_width(n, h)?;
        Ok(TAU / n as f64)
    } else {
        Ok(solve_lambda_star(kernel, n, h, grid_size)?.lambda)
    }
}

/// `R_{n,h}(K * F_1)` together with the formula attaining it.
pub fn optimal_error(
    kernel: &FourierKernel,
    n: usize,
    h: f64,
    grid_size: usize,
) -> Result<OptimalReport, OptimalError> {
    check_half_width(n, h)?;
    let lambda_star = optimal_lambda(kernel, n, h, grid_size)?;
    let quadrature = IntervalQuadrature::equidistant(n, h, lambda_star)?;
    let wc = worst_case_error(kernel, &quadrature, grid_size)?;
    let profile = wc.profile;
    let equioscillation_residual = if kernel.has_zero_mean() {
        profile.equioscillation_residual()
    } else {
        (profile.max.value + profile.min.value).abs()
    };
    Ok(OptimalReport {
        kernel: kernel.to_string(),
        mu: kernel.mu(),
        n,
        h,
        lambda_star,
        value: profile.value,
        quadrature,
        profile,
        equioscillation_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectangleLimit {
    /// `(h, value)` for every requested `h`, then `h = 0`.
    pub points: Vec<(f64, f64)>,
    pub limit: f64,
    /// `Some(|value(h_last) - value(0)| <= 1e-4)` when `h_last <= 1e-3`.
    pub converged: Option<bool>,
}

/// Optimal values along a sequence of half-widths and at the point-formula limit.
pub fn rectangle_limit(
    kernel: &FourierKernel,
    n: usize,
    hs: &[f64],
    grid_size: usize,
) -> Result<RectangleLimit, OptimalError> {
    for &h in hs {
        check_half_width(n, h)?;
    }
    let mut points = Vec::with_capacity(hs.len() + 1);
    for &h in hs.iter().chain(std::iter::once(&0.0)) {
        points.push((h, optimal_error(kernel, n, h, grid_size)?.value));
    }
    let limit = points.last().expect("h = 0 entry").1;
    let converged = hs
        .last()
        .filter(|&&h| h <= LIMIT_H)
        .map(|_| (points[points.len() - 2].1 - limit).abs() <= LIMIT_TOL);
    Ok(RectangleLimit {
        points,
        limit,
        converged,
    })
}
