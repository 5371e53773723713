//! Periodic convolution kernels described by their Fourier symbols.
//!
//! A kernel is `K(x) = s * sum' a_k e^{ikx}` with `a_k = 1 / (2 pi P(ik))`,
//! where `P` is a monic polynomial with real zeros and the primed sum skips
//! every `k` with `P(ik) = 0` (only `k = 0`, when zero is a root). Bernoulli
//! kernels are the special case `P(z) = z^r`.
//!
//! Values are computed in closed form from the partial-fraction expansion of
//! `1/P`: each pole contributes a periodised exponential (or a periodic
//! Bernoulli polynomial for the pole at zero). The truncated Fourier series is
//! kept as an independent evaluation route with an explicit tail bound.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// Largest pole order at zero evaluated through Bernoulli polynomials;
/// higher orders use the (fast converging) Fourier series.
const MAX_BERNOULLI_POLY: usize = 10;

/// Hard cap on the number of Fourier modes a truncated series may use.
const MAX_SERIES_TERMS: u64 = 200_000_000;

/// Bernoulli numbers `B_0..=B_10` with `B_1 = -1/2`.
const BERNOULLI_NUMBERS: [f64; MAX_BERNOULLI_POLY + 1] = [
    1.0,
    -0.5,
    1.0 / 6.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    1.0 / 42.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    5.0 / 66.0,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("Bernoulli order must be a positive integer, got {0}")]
    InvalidOrder(i64),
    #[error("polynomial kernel needs at least one root")]
    EmptyRoots,
    #[error("polynomial roots must be finite, got {0}")]
    NonFiniteRoot(f64),
    #[error("kernel scale must be finite and nonzero, got {0}")]
    InvalidScale(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("argument must be finite, got {0}")]
    NonFiniteArgument(f64),
    #[error("series of decay order {0} converges only conditionally; use the closed form")]
    ConditionallyConvergent(usize),
    #[error("truncated series would need {0} modes")]
    SeriesTooLong(u64),
    #[error("invalid kernel spec {0:?}: expected \"bernoulli:<r>\" or \"poly:<root>,<root>,...\"")]
    Parse(String),
}

/// Which one-sided limit to take at the jump of a kernel with decay order 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Limit from below, i.e. `x -> 2 pi -`.
    Left,
    /// Limit from above, i.e. `x -> 0 +`.
    Right,
    /// Average of both limits (the value of the symmetric partial sums).
    Mid,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Mid => Side::Mid,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSymbol {
    Bernoulli(u32),
    RationalPoly(Vec<f64>),
}

impl KernelSymbol {
    fn roots(&self) -> Vec<f64> {
        match self {
            KernelSymbol::Bernoulli(r) => vec![0.0; *r as usize],
            KernelSymbol::RationalPoly(roots) => roots.clone(),
        }
    }
}

impl fmt::Display for KernelSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSymbol::Bernoulli(r) => write!(f, "bernoulli:{r}"),
            KernelSymbol::RationalPoly(roots) => {
                let parts: Vec<String> = roots.iter().map(|r| r.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
        }
    }
}

/// A CVD kernel `s * B_P` (scale `s = 1` unless changed with [`FourierKernel::scaled`]).
#[derive(Debug, Clone)]
pub struct FourierKernel {
    symbol: KernelSymbol,
    scale: f64,
    closed: ClosedForm,
}

impl FourierKernel {
    pub fn bernoulli(r: i64) -> Result<Self, KernelError> {
        if r < 1 || r > u32::MAX as i64 {
            return Err(KernelError::InvalidOrder(r));
        }
        Ok(Self::from_symbol(KernelSymbol::Bernoulli(r as u32)))
    }

    pub fn rational(roots: &[f64]) -> Result<Self, KernelError> {
        if roots.is_empty() {
            return Err(KernelError::EmptyRoots);
        }
        if let Some(&bad) = roots.iter().find(|r| !r.is_finite()) {
            return Err(KernelError::NonFiniteRoot(bad));
        }
        // -0.0 and 0.0 are the same root.
        let roots = roots.iter().map(|&r| if r == 0.0 { 0.0 } else { r }).collect();
        Ok(Self::from_symbol(KernelSymbol::RationalPoly(roots)))
    }

    fn from_symbol(symbol: KernelSymbol) -> Self {
        let closed = ClosedForm::new(&symbol.roots());
        FourierKernel {
            symbol,
            scale: 1.0,
            closed,
        }
    }

    /// The same kernel with every Fourier coefficient multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self, KernelError> {
        if !s.is_finite() || s == 0.0 {
            return Err(KernelError::InvalidScale(s));
        }
        Ok(FourierKernel {
            scale: self.scale * s,
            ..self.clone()
        })
    }

    pub fn symbol(&self) -> &KernelSymbol {
        &self.symbol
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Zeros of `P`, with multiplicity.
    pub fn roots(&self) -> Vec<f64> {
        self.symbol.roots()
    }

    fn has_zero_root(&self) -> bool {
        self.closed.zero_order > 0
    }

    /// Fourier coefficient `a_k`; zero for the modes excluded from the primed sum.
    pub fn coefficient(&self, k: i64) -> Complex64 {
        if k == 0 && self.has_zero_root() {
            return Complex64::new(0.0, 0.0);
        }
        let z = Complex64::new(0.0, k as f64);
        let p = match &self.symbol {
            KernelSymbol::Bernoulli(r) => z.powu(*r),
            KernelSymbol::RationalPoly(roots) => roots.iter().fold(Complex64::new(1.0, 0.0), |acc, &r| acc * (z - r)),
        };
        Complex64::new(self.scale / TAU, 0.0) / p
    }

    pub fn a0(&self) -> Complex64 {
        self.coefficient(0)
    }

    /// 1 when the kernel integrates to zero over a period, 0 otherwise.
    pub fn mu(&self) -> u8 {
        u8::from(self.has_zero_root())
    }

    pub fn has_zero_mean(&self) -> bool {
        self.has_zero_root()
    }

    /// `d` such that `|a_k| <= C / |k|^d` with `C = decay_constant()`.
    pub fn decay_order(&self) -> usize {
        self.closed.degree
    }

    /// Since `|ik - rho| >= |k|` for real `rho`, `|a_k| <= |s| / (2 pi |k|^d)`.
    pub fn decay_constant(&self) -> f64 {
        self.scale.abs() / TAU
    }

    /// A kernel of decay order 1 jumps at `x = 0 (mod 2 pi)`.
    pub fn has_jump(&self) -> bool {
        self.decay_order() == 1
    }

    /// `integral_0^{2 pi} K = 2 pi a_0`.
    pub fn mean(&self) -> f64 {
        TAU * self.a0().re
    }

    /// Closed-form value, midpoint convention at a jump.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_side(x, Side::Mid)
    }

    pub fn eval_side(&self, x: f64, side: Side) -> f64 {
        let mut t = x.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        let v = if t == 0.0 {
            match side {
                Side::Right => self.closed.at(0.0),
                Side::Left => self.closed.at(TAU),
                Side::Mid => 0.5 * (self.closed.at(0.0) + self.closed.at(TAU)),
            }
        } else {
            self.closed.at(t)
        };
        self.scale * v
    }

    /// Symmetric partial sum `sum_{|k| <= N} a_k e^{ikx}`, with `N` the
    /// smallest index whose tail bound `2 C N^{1-d} / (d - 1)` is within `tol`.
    ///
    /// Returned as a complex number so callers can check that it is real.
    pub fn series(&self, x: f64, tol: f64) -> Result<Complex64, KernelError> {
        if !(tol > 0.0) {
            return Err(KernelError::InvalidTolerance(tol));
        }
        if !x.is_finite() {
            return Err(KernelError::NonFiniteArgument(x));
        }
        let d = self.decay_order();
        if d < 2 {
            return Err(KernelError::ConditionallyConvergent(d));
        }
        let n = truncation_index(self.decay_constant(), d, tol);
        if n > MAX_SERIES_TERMS {
            return Err(KernelError::SeriesTooLong(n));
        }
        Ok(self.partial_sum(x, n as i64))
    }

    /// `sum_{|k| <= n} a_k e^{ikx}`, pairing `k` with `-k`.
    pub fn partial_sum(&self, x: f64, n: i64) -> Complex64 {
        let mut sum = self.a0();
        for k in (1..=n).rev() {
            let e = Complex64::from_polar(1.0, k as f64 * x);
            sum += self.coefficient(k) * e + self.coefficient(-k) * e.conj();
        }
        sum
    }

    /// The zero-mean periodic antiderivative `sum' a_k e^{ikx} / (ik)`; the
    /// `k = 0` mode is dropped, so `integral_a^b K = a_0 (b - a) + K1(b) - K1(a)`.
    pub fn antiderivative(&self) -> FourierKernel {
        let symbol = match &self.symbol {
            KernelSymbol::Bernoulli(r) => KernelSymbol::Bernoulli(r + 1),
            KernelSymbol::RationalPoly(roots) => {
                let mut roots = roots.clone();
                roots.push(0.0);
                KernelSymbol::RationalPoly(roots)
            }
        };
        FourierKernel {
            scale: self.scale,
            ..Self::from_symbol(symbol)
        }
    }

    /// `integral_a^b K(t) dt`.
    pub fn integral(&self, antiderivative: &FourierKernel, a: f64, b: f64) -> f64 {
        self.a0().re * (b - a) + antiderivative.eval(b) - antiderivative.eval(a)
    }
}

impl fmt::Display for FourierKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.symbol.fmt(f)
    }
}

impl FromStr for FourierKernel {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_err = || KernelError::Parse(s.to_string());
        let (kind, rest) = s.split_once(':').ok_or_else(parse_err)?;
        match kind {
            "bernoulli" => {
                if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit() || b == b'-') {
                    return Err(parse_err());
                }
                let r: i64 = rest.parse().map_err(|_| parse_err())?;
                FourierKernel::bernoulli(r)
            }
            "poly" => {
                if rest.chars().any(char::is_whitespace) {
                    return Err(parse_err());
                }
                let roots = rest
                    .split(',')
                    .map(|p| p.parse::<f64>().map_err(|_| parse_err()))
                    .collect::<Result<Vec<_>, _>>()?;
                FourierKernel::rational(&roots)
            }
            _ => Err(parse_err()),
        }
    }
}

/// `make_bernoulli`.
pub fn make_bernoulli(r: i64) -> Result<FourierKernel, KernelError> {
    FourierKernel::bernoulli(r)
}

/// `make_rational`.
pub fn make_rational(roots: &[f64]) -> Result<FourierKernel, KernelError> {
    FourierKernel::rational(roots)
}

/// Kernel value at `x`. The closed form is exact up to rounding, so it meets
/// any positive `tol`.
pub fn eval_kernel(kernel: &FourierKernel, x: f64, tol: f64) -> Result<f64, KernelError> {
    if !(tol > 0.0) {
        return Err(KernelError::InvalidTolerance(tol));
    }
    if !x.is_finite() {
        return Err(KernelError::NonFiniteArgument(x));
    }
    Ok(kernel.eval(x))
}

pub fn kernel_mean(kernel: &FourierKernel) -> f64 {
    kernel.mean()
}

/// Smallest `N` with `2 C N^{1-d} / (d - 1) <= tol`. Requires `d >= 2`.
pub fn truncation_index(c: f64, d: usize, tol: f64) -> u64 {
    let e = (d - 1) as f64;
    let n = (2.0 * c / (e * tol)).powf(1.0 / e).ceil();
    if n.is_finite() && n >= 1.0 {
        n.min(u64::MAX as f64) as u64
    } else {
        1
    }
}

/// Partial-fraction form of `(1 / 2 pi) sum' e^{ikx} / P(ik)` on `[0, 2 pi]`.
#[derive(Debug, Clone)]
struct ClosedForm {
    degree: usize,
    zero_order: usize,
    /// Combined polynomial in `t` for the Bernoulli parts of order <= 10.
    zero_poly: Vec<f64>,
    /// `(order, coefficient)` for Bernoulli parts of order > 10.
    zero_series: Vec<(usize, f64)>,
    poles: Vec<Pole>,
    offset: f64,
}

#[derive(Debug, Clone)]
struct Pole {
    rho: f64,
    /// `coeffs[s - 1]` multiplies `1 / (z - rho)^s`.
    coeffs: Vec<f64>,
}

impl ClosedForm {
    fn new(roots: &[f64]) -> Self {
        let mut sorted = roots.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
        let mut groups: Vec<(f64, usize)> = Vec::new();
        for r in sorted {
            match groups.last_mut() {
                Some((v, m)) if *v == r => *m += 1,
                _ => groups.push((r, 1)),
            }
        }

        let mut zero_coeffs = Vec::new();
        let mut poles = Vec::new();
        for (j, &(rho, mult)) in groups.iter().enumerate() {
            // Taylor expansion of prod_{l != j} (eps + rho_j - rho_l)^{m_l}.
            let mut q = vec![1.0];
            for (l, &(other, m)) in groups.iter().enumerate() {
                if l == j {
                    continue;
                }
                for _ in 0..m {
                    q = poly_mul(&q, &[rho - other, 1.0], mult);
                }
            }
            let inv = series_div(&[1.0], &q, mult);
            let coeffs: Vec<f64> = (1..=mult).map(|s| inv[mult - s]).collect();
            if rho == 0.0 {
                zero_coeffs = coeffs;
            } else {
                poles.push(Pole { rho, coeffs });
            }
        }

        let zero_order = zero_coeffs.len();
        let mut offset = 0.0;
        if zero_order > 0 {
            // The full-sum pole terms include k = 0, which the primed sum drops.
            for pole in &poles {
                for (i, a) in pole.coeffs.iter().enumerate() {
                    offset -= a / (TAU * (-pole.rho).powi(i as i32 + 1));
                }
            }
        }

        let mut zero_poly = vec![0.0; zero_order.min(MAX_BERNOULLI_POLY) + 1];
        let mut zero_series = Vec::new();
        for (i, &a) in zero_coeffs.iter().enumerate() {
            let s = i + 1;
            if a == 0.0 {
                continue;
            }
            if s <= MAX_BERNOULLI_POLY {
                for (p, c) in bernoulli_kernel_poly(s).into_iter().enumerate() {
                    zero_poly[p] += a * c;
                }
            } else {
                zero_series.push((s, a));
            }
        }

        ClosedForm {
            degree: roots.len(),
            zero_order,
            zero_poly,
            zero_series,
            poles,
            offset,
        }
    }

    /// Value at `t` in `[0, 2 pi]`; `t = 0` and `t = 2 pi` give the one-sided limits.
    fn at(&self, t: f64) -> f64 {
        let mut sum = self.offset;
        sum += self.zero_poly.iter().rev().fold(0.0, |acc, c| acc * t + c);
        for &(s, a) in &self.zero_series {
            sum += a * bernoulli_kernel_series(s, t);
        }
        for pole in &self.poles {
            let order = pole.coeffs.len();
            if order == 1 {
                sum += pole.coeffs[0] * pole_term(pole.rho, t);
            } else {
                let taylor = pole_taylor(pole.rho, t, order);
                sum += pole
                    .coeffs
                    .iter()
                    .zip(&taylor)
                    .map(|(a, v)| a * v)
                    .sum::<f64>();
            }
        }
        sum
    }
}

/// `(1 / 2 pi) sum_k e^{ikt} / (ik - rho)` for `t` in `[0, 2 pi]`, `rho != 0`.
fn pole_term(rho: f64, t: f64) -> f64 {
    if rho > 0.0 {
        -(rho * (t - TAU)).exp() / (-(-TAU * rho).exp_m1())
    } else {
        (rho * t).exp() / (-(TAU * rho).exp_m1())
    }
}

/// Taylor coefficients in `eps` of `pole_term(rho + eps, t)` up to `eps^{order-1}`;
/// coefficient `s - 1` is `(1 / 2 pi) sum_k e^{ikt} / (ik - rho)^s`.
fn pole_taylor(rho: f64, t: f64, order: usize) -> Vec<f64> {
    let (y, sign, w) = if rho > 0.0 {
        (t - TAU, -1.0, -TAU)
    } else {
        (t, 1.0, TAU)
    };
    // numerator: sign * exp((rho + eps) y); denominator: 1 - exp((rho + eps) w)
    let ey = (rho * y).exp();
    let ew = (rho * w).exp();
    let mut num = Vec::with_capacity(order);
    let mut den = Vec::with_capacity(order);
    let (mut py, mut pw, mut fact) = (1.0, 1.0, 1.0);
    for j in 0..order {
        if j > 0 {
            py *= y;
            pw *= w;
            fact *= j as f64;
        }
        num.push(sign * ey * py / fact);
        den.push(if j == 0 {
            -(rho * w).exp_m1()
        } else {
            -ew * pw / fact
        });
    }
    series_div(&num, &den, order)
}

/// Coefficients in `t` of `-(2 pi)^{s-1} / s! * B_s(t / 2 pi)`, which equals
/// `(1 / 2 pi) sum_{k != 0} e^{ikt} / (ik)^s` on `(0, 2 pi)`.
fn bernoulli_kernel_poly(s: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; s + 1];
    for (p, c) in coeffs.iter_mut().enumerate() {
        let j = s - p;
        *c = -BERNOULLI_NUMBERS[j] * TAU.powi(j as i32 - 1) / (factorial(j) * factorial(p));
    }
    coeffs
}

/// `(1 / pi) sum_{k >= 1} cos(kt - s pi / 2) / k^s`, truncated below 1e-18.
fn bernoulli_kernel_series(s: usize, t: f64) -> f64 {
    let n = truncation_index(0.5 / PI, s, 1e-18).max(1);
    let phase = s as f64 * PI / 2.0;
    (1..=n)
        .rev()
        .map(|k| {
            let k = k as f64;
            (k * t - phase).cos() / k.powi(s as i32)
        })
        .sum::<f64>()
        / PI
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Product of two polynomials, truncated to `len` coefficients.
fn poly_mul(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len.min(a.len() + b.len() - 1)];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if i + j < out.len() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

/// Power-series quotient `num / den` to `len` terms; `den[0]` must be nonzero.
fn series_div(num: &[f64], den: &[f64], len: usize) -> Vec<f64> {
    let mut q = vec![0.0; len];
    for j in 0..len {
        let mut acc = num.get(j).copied().unwrap_or(0.0);
        for i in 1..=j {
            acc -= den.get(i).copied().unwrap_or(0.0) * q[j - i];
        }
        q[j] = acc / den[0];
    }
    q
}
