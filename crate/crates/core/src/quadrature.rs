//! Interval quadrature functionals and the convolution functions they act on.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{integrate_with_breaks, NonFinite};
use crate::kernels::FourierKernel;
use crate::report::{sig17, sig17_vec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Violation {
    #[error("quadrature needs at least one knot")]
    Empty,
    #[error("knots and weights differ in length ({knots} vs {weights})")]
    LengthMismatch { knots: usize, weights: usize },
    #[error("n = {declared} but {actual} knots were given")]
    CountMismatch { declared: usize, actual: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("knot {index} = {value} is outside [0, 2pi)")]
    OutOfWindow { index: usize, value: f64 },
    #[error("h must satisfy 0 <= h < pi/n (h = {h}, pi/n = {bound})")]
    HalfWidth { h: f64, bound: f64 },
    #[error("x_{k} + h < x_{next} - h fails ({left} >= {right})", next = k + 1)]
    Separation { k: usize, left: f64, right: f64 },
    #[error("x_n + h < x_1 + 2pi - h fails ({left} >= {right})")]
    Wraparound { left: f64, right: f64 },
}

impl Violation {
    /// Malformed input, as opposed to a well-formed but infeasible formula.
    pub fn is_schema(&self) -> bool {
        matches!(
            self,
            Violation::Empty
                | Violation::LengthMismatch { .. }
                | Violation::CountMismatch { .. }
                | Violation::NonFinite(_)
                | Violation::OutOfWindow { .. }
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("step function is undefined for point quadrature (h = 0)")]
    ZeroWidth,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("integrand is not finite at {at}: {value}")]
    NonFinite { at: f64, value: f64 },
    #[error("{0}")]
    Infeasible(#[from] Violation),
    #[error("piecewise-constant function: {0}")]
    BadPieces(String),
    #[error("density has L1 norm {0} > 1")]
    NotInUnitBall(f64),
    #[error("density has mean {0}, must be orthogonal to constants for a zero-mean kernel")]
    NotOrthogonal(f64),
}

impl From<NonFinite> for QuadratureError {
    fn from(e: NonFinite) -> Self {
        QuadratureError::NonFinite {
            at: e.at,
            value: e.value,
        }
    }
}

/// Reduce an angle to `[0, 2 pi)`.
pub fn reduce(x: f64) -> f64 {
    let t = x.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Signed distance from `b` to `a` on the circle, in `[-pi, pi)`.
pub fn cyclic_offset(a: f64, b: f64) -> f64 {
    (a - b + PI).rem_euclid(TAU) - PI
}

/// Checks the constraints of `Q_{n,h}` on knots taken in the given order.
pub fn validate(h: f64, knots: &[f64], weights: &[f64]) -> Result<(), Violation> {
    let n = knots.len();
    if n == 0 {
        return Err(Violation::Empty);
    }
    if n != weights.len() {
        return Err(Violation::LengthMismatch {
            knots: n,
            weights: weights.len(),
        });
    }
    if !h.is_finite() {
        return Err(Violation::NonFinite("half-width"));
    }
    if knots.iter().any(|x| !x.is_finite()) {
        return Err(Violation::NonFinite("knot"));
    }
    if weights.iter().any(|c| !c.is_finite()) {
        return Err(Violation::NonFinite("weight"));
    }
    let bound = PI / n as f64;
    if !(h >= 0.0 && h < bound) {
        return Err(Violation::HalfWidth { h, bound });
    }
    for k in 0..n - 1 {
        let (left, right) = (knots[k] + h, knots[k + 1] - h);
        if !(left < right) {
            return Err(Violation::Separation { k: k + 1, left, right });
        }
    }
    let (left, right) = (knots[n - 1] + h, knots[0] + TAU - h);
    if !(left < right) {
        return Err(Violation::Wraparound { left, right });
    }
    Ok(())
}

/// A member of `Q_{n,h}`: `q(f) = sum_k c_k (1/2h) integral_{x_k-h}^{x_k+h} f`,
/// or the point formula `sum_k c_k f(x_k)` when `h = 0`.
///
/// Knots are kept sorted in `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalQuadrature {
    h: f64,
    knots: Vec<f64>,
    weights: Vec<f64>,
}

impl IntervalQuadrature {
    /// Reduces knots modulo `2 pi`, sorts them with their weights and validates.
    pub fn new(h: f64, knots: Vec<f64>, weights: Vec<f64>) -> Result<Self, Violation> {
        if knots.len() != weights.len() {
            return Err(Violation::LengthMismatch {
                knots: knots.len(),
                weights: weights.len(),
            });
        }
        if knots.iter().any(|x| !x.is_finite()) {
            return Err(Violation::NonFinite("knot"));
        }
        let mut pairs: Vec<(f64, f64)> = knots.into_iter().map(reduce).zip(weights).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (knots, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        validate(h, &knots, &weights)?;
        Ok(IntervalQuadrature { h, knots, weights })
    }

    /// `q_{n,h,lambda}`: knots `2 k pi / n`, all weights `lambda`.
    pub fn equidistant(n: usize, h: f64, lambda: f64) -> Result<Self, Violation> {
        if n == 0 {
            return Err(Violation::Empty);
        }
        let knots = (1..=n).map(|k| TAU * k as f64 / n as f64).collect();
        Self::new(h, knots, vec![lambda; n])
    }

    pub fn n(&self) -> usize {
        self.knots.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn validate(&self) -> Result<(), Violation> {
        validate(self.h, &self.knots, &self.weights)
    }

    /// Rotate every knot by `tau`.
    pub fn shifted(&self, tau: f64) -> Result<Self, Violation> {
        let knots = self.knots.iter().map(|x| x + tau).collect();
        Self::new(self.h, knots, self.weights.clone())
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, Violation> {
        Self::new(self.h, self.knots.clone(), weights)
    }

    /// `H(q; t) = (1/2h) sum_k c_k chi_{(x_k - h, x_k + h)}(t)`, with half the
    /// box height on the box edges.
    pub fn step_function(&self, t: f64) -> Result<f64, QuadratureError> {
        if self.h == 0.0 {
            return Err(QuadratureError::ZeroWidth);
        }
        let height = |c: f64| c / (2.0 * self.h);
        for (&x, &c) in self.knots.iter().zip(&self.weights) {
            let d = cyclic_offset(t, x).abs();
            if d < self.h {
                return Ok(height(c));
            }
            if d == self.h {
                return Ok(0.5 * height(c));
            }
        }
        Ok(0.0)
    }

    /// `q(f)`, each window average computed adaptively.
    pub fn apply<F>(&self, f: F, tol: f64) -> Result<f64, QuadratureError>
    where
        F: Fn(f64) -> f64,
    {
        self.apply_with_breaks(f, &[], tol)
    }

    /// `q(f)` for an `f` that is smooth between the given points (taken mod `2 pi`).
    pub fn apply_with_breaks<F>(&self, f: F, breaks: &[f64], tol: f64) -> Result<f64, QuadratureError>
    where
        F: Fn(f64) -> f64,
    {
        if !(tol > 0.0) {
            return Err(QuadratureError::InvalidTolerance(tol));
        }
        if self.h == 0.0 {
            let mut sum = 0.0;
            for (&x, &c) in self.knots.iter().zip(&self.weights) {
                let v = f(x);
                if !v.is_finite() {
                    return Err(QuadratureError::NonFinite { at: x, value: v });
                }
                sum += c * v;
            }
            return Ok(sum);
        }
        let cmax = self.weights.iter().fold(f64::MIN_POSITIVE, |m, c| m.max(c.abs()));
        let window_tol = tol * 2.0 * self.h / (self.n() as f64 * cmax);
        let mut sum = 0.0;
        for (&x, &c) in self.knots.iter().zip(&self.weights) {
            let (a, b) = (x - self.h, x + self.h);
            let local: Vec<f64> = breaks.iter().map(|&t| a + reduce(t - a)).collect();
            let integral = integrate_with_breaks(&f, a, b, &local, window_tol)?;
            sum += c * integral / (2.0 * self.h);
        }
        Ok(sum)
    }

    pub fn to_file(&self) -> QuadratureFile {
        QuadratureFile {
            n: self.n(),
            h: self.h,
            knots: self.knots.clone(),
            weights: self.weights.clone(),
        }
    }
}

/// On-disk form: `{"n": int, "h": float, "knots": [...], "weights": [...]}`,
/// knots in `[0, 2 pi)` strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureFile {
    pub n: usize,
    #[serde(serialize_with = "sig17")]
    pub h: f64,
    #[serde(serialize_with = "sig17_vec")]
    pub knots: Vec<f64>,
    #[serde(serialize_with = "sig17_vec")]
    pub weights: Vec<f64>,
}

impl TryFrom<QuadratureFile> for IntervalQuadrature {
    type Error = Violation;

    fn try_from(file: QuadratureFile) -> Result<Self, Violation> {
        if file.knots.is_empty() {
            return Err(Violation::Empty);
        }
        if file.n != file.knots.len() {
            return Err(Violation::CountMismatch {
                declared: file.n,
                actual: file.knots.len(),
            });
        }
        if file.knots.iter().any(|x| !x.is_finite()) {
            return Err(Violation::NonFinite("knot"));
        }
        if let Some((index, &value)) = file
            .knots
            .iter()
            .enumerate()
            .find(|(_, &x)| !(0.0..TAU).contains(&x))
        {
            return Err(Violation::OutOfWindow { index, value });
        }
        validate(file.h, &file.knots, &file.weights)?;
        Ok(IntervalQuadrature {
            h: file.h,
            knots: file.knots,
            weights: file.weights,
        })
    }
}

/// A `2 pi`-periodic step function. Piece `i` covers `[breaks[i], breaks[i+1])`,
/// the last piece wraps around to `breaks[0] + 2 pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, QuadratureError> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(QuadratureError::BadPieces(format!(
                "{} breaks for {} values",
                breaks.len(),
                values.len()
            )));
        }
        if breaks.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(QuadratureError::BadPieces("non-finite entry".into()));
        }
        let mut pairs: Vec<(f64, f64)> = breaks.into_iter().map(reduce).zip(values).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(QuadratureError::BadPieces("repeated breakpoint".into()));
        }
        let (breaks, values) = pairs.into_iter().unzip();
        Ok(PiecewiseConstant { breaks, values })
    }

    pub fn zero() -> Self {
        PiecewiseConstant {
            breaks: vec![0.0],
            values: vec![0.0],
        }
    }

    /// Sum of boxes `value * chi_{(center - half, center + half)}`.
    pub fn from_boxes(boxes: &[(f64, f64, f64)]) -> Result<Self, QuadratureError> {
        if boxes.iter().any(|&(_, w, _)| !(w > 0.0 && w <= PI)) {
            return Err(QuadratureError::BadPieces("box half-width outside (0, pi]".into()));
        }
        let mut cuts: Vec<f64> = boxes
            .iter()
            .flat_map(|&(c, w, _)| [reduce(c - w), reduce(c + w)])
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        if cuts.is_empty() {
            return Ok(Self::zero());
        }
        let values = (0..cuts.len())
            .map(|i| {
                let end = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + TAU };
                let mid = 0.5 * (cuts[i] + end);
                boxes
                    .iter()
                    .filter(|&&(c, w, _)| cyclic_offset(mid, c).abs() < w)
                    .map(|&(_, _, v)| v)
                    .sum()
            })
            .collect();
        Self::new(cuts, values)
    }

    /// `(start, end, value)` with `end` possibly past `2 pi` for the last piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let m = self.breaks.len();
        (0..m).map(move |i| {
            let end = if i + 1 < m { self.breaks[i + 1] } else { self.breaks[0] + TAU };
            (self.breaks[i], end, self.values[i])
        })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let t = reduce(t);
        let idx = self.breaks.partition_point(|&b| b <= t);
        if idx == 0 {
            *self.values.last().unwrap()
        } else {
            self.values[idx - 1]
        }
    }

    pub fn integral(&self) -> f64 {
        self.pieces().map(|(a, b, v)| v * (b - a)).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.pieces().map(|(a, b, v)| v.abs() * (b - a)).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        PiecewiseConstant {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Subtract the mean so the function is orthogonal to constants.
    pub fn centered(&self) -> Self {
        let mean = self.integral() / TAU;
        PiecewiseConstant {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| v - mean).collect(),
        }
    }
}

/// `f = a mu(K) + K * phi` with `||phi||_1 <= 1` and `phi ⊥ 1` when `mu(K) = 1`.
#[derive(Debug, Clone)]
pub struct ConvolutionFunction {
    kernel: FourierKernel,
    primitive: FourierKernel,
    a: f64,
    phi: PiecewiseConstant,
}

impl ConvolutionFunction {
    pub fn new(kernel: FourierKernel, a: f64, phi: PiecewiseConstant) -> Result<Self, QuadratureError> {
        let l1 = phi.l1_norm();
        if l1 > 1.0 + 1e-12 {
            return Err(QuadratureError::NotInUnitBall(l1));
        }
        let mean = phi.integral();
        if kernel.has_zero_mean() && mean.abs() > 1e-12 {
            return Err(QuadratureError::NotOrthogonal(mean));
        }
        let primitive = kernel.antiderivative();
        Ok(ConvolutionFunction {
            kernel,
            primitive,
            a,
            phi,
        })
    }

    pub fn kernel(&self) -> &FourierKernel {
        &self.kernel
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn phi(&self) -> &PiecewiseConstant {
        &self.phi
    }

    /// `a mu + sum_i v_i integral_{piece i} K(x - t) dt`, exact through the
    /// kernel antiderivative.
    pub fn eval(&self, x: f64) -> f64 {
        let a0 = self.kernel.a0().re;
        let mut sum = self.a * f64::from(self.kernel.mu());
        for (start, end, v) in self.phi.pieces() {
            if v == 0.0 {
                continue;
            }
            let conv = a0 * (end - start) + self.primitive.eval(x - start) - self.primitive.eval(x - end);
            sum += v * conv;
        }
        sum
    }

    /// `integral_0^{2 pi} f = 2 pi a mu + 2 pi a_0 integral phi`.
    pub fn integral(&self) -> f64 {
        TAU * (self.a * f64::from(self.kernel.mu()) + self.kernel.a0().re * self.phi.integral())
    }
}

pub fn eval_convolution(f: &ConvolutionFunction, x: f64, tol: f64) -> Result<f64, QuadratureError> {
    if !(tol > 0.0) {
        return Err(QuadratureError::InvalidTolerance(tol));
    }
    Ok(f.eval(x))
}
