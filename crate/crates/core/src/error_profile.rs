//! The error kernel `M(q, u)` of an interval quadrature, its extrema and the
//! worst-case error over `K * F_1`.
//!
//! With `f = a mu + K * phi`,
//! `integral f - q(f) = a mu (2 pi - sum c_k) + integral phi(u) M(q, u) du`
//! where `M(q, u) = integral K(t - u) [1 - H(q; t)] dt`. By duality the
//! supremum over the unit ball of `L_1` is the uniform distance from `M` to
//! the constants (zero-mean kernels) or the uniform norm of `M` itself.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::kernels::{truncation_index, FourierKernel, Side};
use crate::quadrature::{ConvolutionFunction, IntervalQuadrature};
use crate::report::sig17;

/// Abscissa tolerance of the golden-section refinement.
pub const REFINE_TOL: f64 = 1e-12;

/// Weight sums farther than this from `2 pi` make a zero-mean kernel's error unbounded.
pub const NORMALIZATION_TOL: f64 = 1e-9;

const MAX_SERIES_TERMS: u64 = 200_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("grid size {given} is below the floor {floor} = max(4096, 512 n)")]
    GridTooSmall { given: usize, floor: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("series route needs {0} modes; use the closed form")]
    SeriesTooLong(u64),
    #[error("the Fourier route for h = 0 needs decay order >= 2")]
    ConditionallyConvergent,
}

/// Smallest admissible profile grid for `n` knots.
pub fn grid_floor(n: usize) -> usize {
    4096.max(512 * n)
}

/// Closed-form evaluator of `M(q, .)` for a fixed kernel and formula.
#[derive(Debug, Clone)]
pub struct ErrorKernel<'a> {
    kernel: &'a FourierKernel,
    quad: &'a IntervalQuadrature,
    primitive: FourierKernel,
    a0: f64,
    /// `2 pi a_0 - a_0 sum c_k` (interval case) or `2 pi a_0` (point case).
    constant: f64,
}

impl<'a> ErrorKernel<'a> {
    pub fn new(kernel: &'a FourierKernel, quad: &'a IntervalQuadrature) -> Self {
        let a0 = kernel.a0().re;
        let constant = if quad.h() > 0.0 {
            TAU * a0 - a0 * quad.weight_sum()
        } else {
            TAU * a0
        };
        ErrorKernel {
            kernel,
            quad,
            primitive: kernel.antiderivative(),
            a0,
            constant,
        }
    }

    pub fn kernel(&self) -> &FourierKernel {
        self.kernel
    }

    pub fn quadrature(&self) -> &IntervalQuadrature {
        self.quad
    }

    /// True when `M` itself jumps (point formula with a kernel of decay order 1).
    pub fn has_jumps(&self) -> bool {
        self.quad.h() == 0.0 && self.kernel.has_jump()
    }

    /// Points where `M` may fail to be smooth: `x_k` for point formulas,
    /// `x_k +- h` otherwise.
    pub fn singular_points(&self) -> Vec<f64> {
        let h = self.quad.h();
        if h == 0.0 {
            self.quad.knots().to_vec()
        } else {
            self.quad
                .knots()
                .iter()
                .flat_map(|&x| [x - h, x + h])
                .collect()
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        self.value_side(u, Side::Mid)
    }

    /// `M(u)`, or its one-sided limit as `u` approaches from `side`.
    pub fn value_side(&self, u: f64, side: Side) -> f64 {
        let h = self.quad.h();
        let knots = self.quad.knots();
        let weights = self.quad.weights();
        let mut sum = 0.0;
        if h == 0.0 {
            // u -> u0+ means x_k - u -> (x_k - u0)-
            let ks = side.flip();
            for (&x, &c) in knots.iter().zip(weights) {
                sum += c * self.kernel.eval_side(x - u, ks);
            }
        } else {
            for (&x, &c) in knots.iter().zip(weights) {
                let d = self.primitive.eval(x + h - u) - self.primitive.eval(x - h - u);
                sum += c * d;
            }
            sum /= 2.0 * h;
        }
        self.constant - sum
    }

    /// `integral_a^b M(u) du`, exact through a second antiderivative.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let h = self.quad.h();
        let knots = self.quad.knots();
        let weights = self.quad.weights();
        let mut sum = 0.0;
        if h == 0.0 {
            for (&x, &c) in knots.iter().zip(weights) {
                let part =
                    self.a0 * (b - a) + self.primitive.eval(x - a) - self.primitive.eval(x - b);
                sum += c * part;
            }
        } else {
            let second = self.primitive.antiderivative();
            for (&x, &c) in knots.iter().zip(weights) {
                let part = second.eval(x + h - a) - second.eval(x + h - b) - second.eval(x - h - a)
                    + second.eval(x - h - b);
                sum += c * part;
            }
            sum /= 2.0 * h;
        }
        self.constant * (b - a) - sum
    }
}

/// `M(q, u)` in closed form.
pub fn error_kernel(kernel: &FourierKernel, quad: &IntervalQuadrature, u: f64) -> f64 {
    ErrorKernel::new(kernel, quad).value(u)
}

/// `M(q, u)` from its Fourier expansion
/// `2 pi a_0 - a_0 sum c_k - sum'_{0 < |m| <= N} a_m e^{-imu} (sum_k c_k e^{imx_k}) sinc(mh)`,
/// with `N` chosen from the coefficient decay so the dropped tail is below `tol`.
pub fn error_kernel_series(
    kernel: &FourierKernel,
    quad: &IntervalQuadrature,
    u: f64,
    tol: f64,
) -> Result<f64, ProfileError> {
    if !(tol > 0.0) {
        return Err(ProfileError::InvalidTolerance(tol));
    }
    let d = kernel.decay_order();
    let h = quad.h();
    let weight_l1: f64 = quad.weights().iter().map(|c| c.abs()).sum();
    let c = kernel.decay_constant() * weight_l1.max(f64::MIN_POSITIVE);
    let n = if h > 0.0 {
        let bound = (2.0 * c / (h * d as f64 * tol)).powf(1.0 / d as f64).ceil();
        if bound.is_finite() {
            bound as u64
        } else {
            u64::MAX
        }
    } else {
        if d < 2 {
            return Err(ProfileError::ConditionallyConvergent);
        }
        truncation_index(c, d, tol)
    };
    if n > MAX_SERIES_TERMS {
        return Err(ProfileError::SeriesTooLong(n));
    }
    let a0 = kernel.a0().re;
    let mut sum = Complex64::new(0.0, 0.0);
    for m in (1..=n as i64).rev() {
        for m in [m, -m] {
            let mf = m as f64;
            let exp_sum: Complex64 = quad
                .knots()
                .iter()
                .zip(quad.weights())
                .map(|(&x, &c)| Complex64::from_polar(c, mf * x))
                .sum();
            let sinc = if h > 0.0 { (mf * h).sin() / (mf * h) } else { 1.0 };
            sum += kernel.coefficient(m) * Complex64::from_polar(1.0, -mf * u) * exp_sum * sinc;
        }
    }
    Ok(TAU * a0 - a0 * quad.weight_sum() - sum.re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub point: f64,
    pub value: f64,
    /// `Left`/`Right` when the extremum is a one-sided limit at a jump of `M`.
    pub side: Side,
}

/// Sampled `M(q, .)` with refined extrema and the resulting class error.
#[derive(Debug, Clone)]
pub struct ErrorProfile {
    pub mu: u8,
    pub samples: Vec<(f64, f64)>,
    pub max: Extremum,
    pub min: Extremum,
    /// Midpoint of the range of `M`, the best uniform constant approximation.
    /// It enters `value` only for zero-mean kernels.
    pub lambda_q: f64,
    pub value: f64,
    pub grid_size: usize,
}

impl ErrorProfile {
    /// Profile of an arbitrary periodic function; `eval(u, side)` must return
    /// one-sided limits when `jumps` is set.
    pub fn from_fn<F>(mu: u8, grid_size: usize, offset: f64, singular: &[f64], jumps: bool, eval: F) -> Self
    where
        F: Fn(f64, Side) -> f64,
    {
        let step = TAU / grid_size as f64;
        let samples: Vec<(f64, f64)> = (0..grid_size)
            .map(|i| {
                let u = offset + i as f64 * step;
                (u, eval(u, Side::Mid))
            })
            .collect();

        let f = |u: f64| eval(u, Side::Mid);
        let neg = |u: f64| -eval(u, Side::Mid);
        let mut max = best_sample(&samples, 1.0);
        let mut min = best_sample(&samples, -1.0);
        let m = samples.len();
        for i in 0..m {
            let prev = samples[(i + m - 1) % m].1;
            let next = samples[(i + 1) % m].1;
            let (u, v) = samples[i];
            if v >= prev && v > next {
                let (pu, pv) = golden_max(&f, u - step, u + step, u, v);
                if pv > max.value {
                    max = Extremum { point: pu, value: pv, side: Side::Mid };
                }
            }
            if v <= prev && v < next {
                let (pu, pv) = golden_max(&neg, u - step, u + step, u, -v);
                if -pv < min.value {
                    min = Extremum { point: pu, value: -pv, side: Side::Mid };
                }
            }
        }
        for &s in singular {
            let sides: &[Side] = if jumps { &[Side::Left, Side::Right] } else { &[Side::Mid] };
            for &side in sides {
                let v = eval(s, side);
                if v > max.value {
                    max = Extremum { point: s, value: v, side };
                }
                if v < min.value {
                    min = Extremum { point: s, value: v, side };
                }
            }
        }
        let max = Extremum { point: crate::quadrature::reduce(max.point), ..max };
        let min = Extremum { point: crate::quadrature::reduce(min.point), ..min };

        let lambda_q = 0.5 * (max.value + min.value);
        let value = if mu == 1 {
            0.5 * (max.value - min.value)
        } else {
            max.value.abs().max(min.value.abs())
        };
        ErrorProfile {
            mu,
            samples,
            max,
            min,
            lambda_q,
            value,
            grid_size,
        }
    }

    /// `|max(M - lambda_q) + min(M - lambda_q)|`.
    pub fn equioscillation_residual(&self) -> f64 {
        ((self.max.value - self.lambda_q) + (self.min.value - self.lambda_q)).abs()
    }
}

fn best_sample(samples: &[(f64, f64)], sign: f64) -> Extremum {
    let &(point, value) = samples
        .iter()
        .max_by(|a, b| (sign * a.1).partial_cmp(&(sign * b.1)).unwrap())
        .expect("non-empty grid");
    Extremum { point, value, side: Side::Mid }
}

/// Golden-section search for a maximum of `f` on `[a, b]`; never returns less
/// than the seed value.
fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, seed_u: f64, seed_v: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > REFINE_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (u, v) = if fc >= fd { (c, fc) } else { (d, fd) };
    if v >= seed_v {
        (u, v)
    } else {
        (seed_u, seed_v)
    }
}

pub fn profile(kernel: &FourierKernel, quad: &IntervalQuadrature, grid_size: usize) -> Result<ErrorProfile, ProfileError> {
    profile_with_offset(kernel, quad, grid_size, 0.0)
}

/// Profile sampled on the grid `offset + 2 pi i / grid_size`.
pub fn profile_with_offset(
    kernel: &FourierKernel,
    quad: &IntervalQuadrature,
    grid_size: usize,
    offset: f64,
) -> Result<ErrorProfile, ProfileError> {
    let floor = grid_floor(quad.n());
    if grid_size < floor {
        return Err(ProfileError::GridTooSmall { given: grid_size, floor });
    }
    let m = ErrorKernel::new(kernel, quad);
    Ok(ErrorProfile::from_fn(
        kernel.mu(),
        grid_size,
        offset,
        &m.singular_points(),
        m.has_jumps(),
        |u, side| m.value_side(u, side),
    ))
}

/// Worst-case error of a formula over `K * F_1`.
#[derive(Debug, Clone)]
pub struct WorstCase {
    pub profile: ErrorProfile,
    /// Zero-mean kernel with `sum c_k != 2 pi`: constants are not integrated
    /// exactly and the error is infinite.
    pub unbounded: bool,
}

impl WorstCase {
    pub fn value(&self) -> f64 {
        if self.unbounded {
            f64::INFINITY
        } else {
            self.profile.value
        }
    }

    pub fn to_json(&self) -> ProfileJson {
        ProfileJson::new(&self.profile, self.value())
    }
}

pub fn worst_case_error(
    kernel: &FourierKernel,
    quad: &IntervalQuadrature,
    grid_size: usize,
) -> Result<WorstCase, ProfileError> {
    let profile = profile(kernel, quad, grid_size)?;
    let unbounded = kernel.has_zero_mean() && (quad.weight_sum() - TAU).abs() > NORMALIZATION_TOL;
    Ok(WorstCase { profile, unbounded })
}

/// `a mu (2 pi - sum c_k) + integral phi M`, integrating `M` exactly over each
/// constant piece of `phi`.
pub fn residual(kernel: &FourierKernel, quad: &IntervalQuadrature, f: &ConvolutionFunction) -> f64 {
    let m = ErrorKernel::new(kernel, quad);
    let constant = f.a() * f64::from(kernel.mu()) * (TAU - quad.weight_sum());
    constant
        + f.phi()
            .pieces()
            .filter(|&(_, _, v)| v != 0.0)
            .map(|(a, b, v)| v * m.integral(a, b))
            .sum::<f64>()
}

/// `{"value", "lambda", "max_point", "min_point", "max", "min", "grid_size"}`.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileJson {
    #[serde(serialize_with = "sig17")]
    pub value: f64,
    #[serde(serialize_with = "sig17")]
    pub lambda: f64,
    #[serde(serialize_with = "sig17")]
    pub max_point: f64,
    #[serde(serialize_with = "sig17")]
    pub min_point: f64,
    #[serde(serialize_with = "sig17")]
    pub max: f64,
    #[serde(serialize_with = "sig17")]
    pub min: f64,
    pub grid_size: usize,
}

impl ProfileJson {
    pub fn new(p: &ErrorProfile, value: f64) -> Self {
        ProfileJson {
            value,
            lambda: p.lambda_q,
            max_point: p.max.point,
            min_point: p.min.point,
            max: p.max.value,
            min: p.min.value,
            grid_size: p.grid_size,
        }
    }
}
