//! The extremum-seeking control law.
//!
//! The closed loop moves `x̂` along
//!
//! ```text
//! f(x̂, t) = −Σ_i a_i sin(ω ω̄_i t) · J(exp_x̂(Σ_j a_j sin(ω ω̄_j t) ∂/∂x_j)) · ∂/∂x_i
//! ```
//!
//! which needs one cost measurement per evaluation and no gradient information.
//! Frequency multipliers `ω̄_i` are exact rationals so the non-resonance conditions
//! can be checked as equalities.

use std::cell::Cell;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedMul, Signed};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie;
use crate::space::{MatrixGroup, Space};

/// Step of the central differences used for directional derivatives of the cost.
pub const GRADIENT_FD_STEP: f64 = 1e-5;

/// Parses `"4.1"`, `"-0.25"`, `"7"` or `"41/10"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational64> {
    let s = text.trim();
    let bad = || Error::Argument(format!("cannot parse {text:?} as a rational number"));
    if s.is_empty() {
        return Err(bad());
    }
    if s.contains('/') {
        return Rational64::from_str(s).map_err(|_| bad());
    }
    let (neg, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i64 = digits.parse().map_err(|_| {
        Error::Overflow(format!("{text:?} has too many digits for 64-bit rationals"))
    })?;
    let denom = 10i64
        .checked_pow(frac_part.len() as u32)
        .ok_or_else(|| Error::Overflow(format!("{text:?} has too many decimals")))?;
    let r = Rational64::new(numer, denom);
    Ok(if neg { -r } else { r })
}

/// A violated non-resonance condition (indices are 0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FrequencyViolation {
    /// `ω̄_i = ω̄_j`, `i < j`.
    Equal { i: usize, j: usize },
    /// `2ω̄_i = ω̄_j`, `i ≠ j`.
    Double { i: usize, j: usize },
    /// `ω̄_i = ω̄_j + ω̄_k` for distinct `i, j, k`, `j < k`.
    Sum { i: usize, j: usize, k: usize },
}

impl fmt::Display for FrequencyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FrequencyViolation::Equal { i, j } => write!(f, "w{} = w{}", i + 1, j + 1),
            FrequencyViolation::Double { i, j } => write!(f, "2*w{} = w{}", i + 1, j + 1),
            FrequencyViolation::Sum { i, j, k } => {
                write!(f, "w{} + w{} = w{}", j + 1, k + 1, i + 1)
            }
        }
    }
}

fn overflow() -> Error {
    Error::Overflow("frequency multipliers exceed 64-bit rational range".into())
}

/// Returns every violated pair/triple condition; an empty list means the multipliers
/// are admissible.
pub fn validate_frequencies(multipliers: &[Rational64]) -> Result<Vec<FrequencyViolation>> {
    if let Some(bad) = multipliers.iter().find(|m| !m.is_positive()) {
        return Err(Error::Argument(format!("frequency multiplier {bad} is not positive")));
    }
    let two = Rational64::from_integer(2);
    let n = multipliers.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if i < j && multipliers[i] == multipliers[j] {
                out.push(FrequencyViolation::Equal { i, j });
            }
            let doubled = multipliers[i].checked_mul(&two).ok_or_else(overflow)?;
            if doubled == multipliers[j] {
                out.push(FrequencyViolation::Double { i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in (j + 1)..n {
                if i == j || i == k {
                    continue;
                }
                let sum = multipliers[j].checked_add(&multipliers[k]).ok_or_else(overflow)?;
                if sum == multipliers[i] {
                    out.push(FrequencyViolation::Sum { i, j, k });
                }
            }
        }
    }
    Ok(out)
}

/// Smallest `T > 0` with every `sin(ω̄_i τ)` `T`-periodic: `2π · L / gcd_i(p_i L / q_i)`
/// where `ω̄_i = p_i/q_i` and `L = lcm(q_i)`.
pub fn common_period(multipliers: &[Rational64]) -> Result<f64> {
    if multipliers.is_empty() {
        return Err(Error::Argument("no frequency multipliers".into()));
    }
    if let Some(bad) = multipliers.iter().find(|m| !m.is_positive()) {
        return Err(Error::Argument(format!("frequency multiplier {bad} is not positive")));
    }
    let mut l: i64 = 1;
    for m in multipliers {
        let q = *m.denom();
        let g = l.gcd(&q);
        l = (l / g).checked_mul(q).ok_or_else(overflow)?;
    }
    let mut g: i64 = 0;
    for m in multipliers {
        let n = i64::checked_mul(*m.numer(), l / *m.denom()).ok_or_else(overflow)?;
        g = g.gcd(&n);
    }
    Ok(2.0 * PI * l as f64 / g as f64)
}

/// Dither amplitudes and frequencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DitherSpec {
    amplitudes: Vec<f64>,
    #[serde(serialize_with = "serialize_rationals")]
    multipliers: Vec<Rational64>,
    omega: f64,
    /// Common period in the fast time scale `τ = ω t`.
    tau_period: f64,
}

fn serialize_rationals<S: serde::Serializer>(v: &[Rational64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|r| r.to_string()))
}

impl DitherSpec {
    /// Validates amplitudes (> 0), base frequency (> 0) and the multipliers.
    pub fn new(amplitudes: Vec<f64>, multipliers: Vec<Rational64>, omega: f64) -> Result<Self> {
        if amplitudes.len() != multipliers.len() {
            return Err(Error::Argument(format!(
                "{} amplitudes but {} frequency multipliers",
                amplitudes.len(),
                multipliers.len()
            )));
        }
        if amplitudes.is_empty() {
            return Err(Error::Argument("dither needs at least one component".into()));
        }
        if let Some(a) = amplitudes.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::Argument(format!("amplitude {a} is not positive")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::Argument(format!("base frequency {omega} is not positive")));
        }
        let violations = validate_frequencies(&multipliers)?;
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Argument(format!(
                "frequency multipliers violate non-resonance: {}",
                list.join(", ")
            )));
        }
        let tau_period = common_period(&multipliers)?;
        Ok(Self { amplitudes, multipliers, omega, tau_period })
    }

    /// Parses decimal multiplier strings, then validates as [`DitherSpec::new`].
    pub fn from_text<S: AsRef<str>>(amplitudes: Vec<f64>, multipliers: &[S], omega: f64) -> Result<Self> {
        let parsed = multipliers
            .iter()
            .map(|m| parse_rational(m.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(amplitudes, parsed, omega)
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn multipliers(&self) -> &[Rational64] {
        &self.multipliers
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Angular frequencies `ω_i = ω ω̄_i`.
    pub fn frequencies(&self) -> Vec<f64> {
        self.multipliers.iter().map(|m| self.omega * rational_to_f64(m)).collect()
    }

    /// Common period in the fast time scale `τ = ω t`.
    pub fn tau_period(&self) -> f64 {
        self.tau_period
    }

    /// Common period of the dither in `t`.
    pub fn period(&self) -> f64 {
        self.tau_period / self.omega
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.amplitudes.clone(), self.multipliers.clone(), omega)
    }

    pub fn with_amplitudes(&self, amplitudes: Vec<f64>) -> Result<Self> {
        Self::new(amplitudes, self.multipliers.clone(), self.omega)
    }

    /// Rescales the amplitudes so that the largest equals `max_amplitude`.
    pub fn with_max_amplitude(&self, max_amplitude: f64) -> Result<Self> {
        let top = self.amplitudes.iter().cloned().fold(0.0, f64::max);
        self.with_amplitudes(self.amplitudes.iter().map(|a| a / top * max_amplitude).collect())
    }
}

pub fn rational_to_f64(r: &Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Tangent coefficients `(a_i sin(ω ω̄_i t))_i` of the dither at time `t`.
pub fn dither_vector(t: f64, spec: &DitherSpec) -> Vec<f64> {
    spec.amplitudes
        .iter()
        .zip(&spec.multipliers)
        .map(|(a, m)| a * (spec.omega * rational_to_f64(m) * t).sin())
        .collect()
}

/// Black-box cost `J ≥ 0`. Only values are available, never derivatives.
pub trait CostOracle<P> {
    fn eval(&self, x: &P) -> f64;
}

impl<P, F> CostOracle<P> for F
where
    F: Fn(&P) -> f64,
{
    fn eval(&self, x: &P) -> f64 {
        self(x)
    }
}

/// Wraps an oracle and counts evaluations. Single-threaded use only.
pub struct CountingOracle<O> {
    inner: O,
    calls: Cell<usize>,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, calls: Cell::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    pub fn reset(&self) {
        self.calls.set(0);
    }
}

impl<P, O: CostOracle<P>> CostOracle<P> for CountingOracle<O> {
    fn eval(&self, x: &P) -> f64 {
        self.calls.set(self.calls.get() + 1);
        self.inner.eval(x)
    }
}

/// The extremum-seeking vector field bound to a space, a cost and a dither.
/// The gain is fixed to `k = −1` (minimization).
pub struct EsField<'a, S: Space, C: ?Sized> {
    space: &'a S,
    cost: &'a C,
    spec: DitherSpec,
}

impl<'a, S: Space, C: CostOracle<S::Point> + ?Sized> EsField<'a, S, C> {
    /// Binds the field; fails if the dither dimension does not match the space or the
    /// amplitudes are unsafe for its injectivity radius.
    pub fn new(space: &'a S, cost: &'a C, spec: DitherSpec) -> Result<Self> {
        if spec.len() != space.dim() {
            return Err(Error::Argument(format!(
                "dither has {} components but {} has dimension {}",
                spec.len(),
                space.label(),
                space.dim()
            )));
        }
        let report = space.validate_amplitudes(spec.amplitudes());
        if !report.passed {
            return Err(Error::Argument(format!(
                "dither amplitude bound {} is not below the injectivity radius {}",
                report.bound, report.injectivity_radius
            )));
        }
        Ok(Self { space, cost, spec })
    }

    pub fn space(&self) -> &'a S {
        self.space
    }

    pub fn cost(&self) -> &'a C {
        self.cost
    }

    pub fn spec(&self) -> &DitherSpec {
        &self.spec
    }

    /// `exp_x(Σ a_i sin(ω_i t) ∂/∂x_i)` on a chart, `g · exp(Σ a_i sin(ω_i t) ∂/∂g_i)` on a group.
    pub fn dithered_point(&self, x: &S::Point, t: f64) -> Result<S::Point> {
        self.space.exp(x, &dither_vector(t, &self.spec))
    }

    /// Field coefficients `(−a_i sin(ω_i t) J(x_p))_i`; exactly one cost evaluation.
    pub fn eval(&self, x: &S::Point, t: f64) -> Result<Vec<f64>> {
        let d = dither_vector(t, &self.spec);
        let xp = self.space.exp(x, &d)?;
        let j = self.cost.eval(&xp);
        if !(j >= 0.0) {
            return Err(Error::OracleContract { value: j });
        }
        Ok(d.into_iter().map(|c| -c * j).collect())
    }
}

impl<C: CostOracle<lie::GroupElement> + ?Sized> EsField<'_, MatrixGroup, C> {
    /// The field as a tangent matrix at `g`: `g · Σ c_i ∂/∂g_i`.
    pub fn eval_translated(&self, g: &lie::GroupElement, t: f64) -> Result<nalgebra::DMatrix<f64>> {
        let c = self.eval(g, t)?;
        lie::left_translate(g, &lie::algebra_from_coords(&c, self.space.tag)?)
    }
}

/// Central-difference directional derivative of `J` along `exp_x(±h e_i)`.
pub fn directional_derivative<S: Space, C: CostOracle<S::Point> + ?Sized>(
    space: &S,
    cost: &C,
    x: &S::Point,
    i: usize,
    h: f64,
) -> Result<f64> {
    let n = space.dim();
    let mut e = vec![0.0; n];
    e[i] = h;
    let plus = space.exp(x, &e)?;
    e[i] = -h;
    let minus = space.exp(x, &e)?;
    Ok((cost.eval(&plus) - cost.eval(&minus)) / (2.0 * h))
}

/// Scaled gradient field `−(a_i²/2) D_i J(x)` on each basis direction.
pub fn scaled_gradient<S: Space, C: CostOracle<S::Point> + ?Sized>(
    space: &S,
    cost: &C,
    x: &S::Point,
    amplitudes: &[f64],
) -> Result<Vec<f64>> {
    if amplitudes.len() != space.dim() {
        return Err(Error::Argument("one amplitude per basis direction is required".into()));
    }
    amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| Ok(-0.5 * a * a * directional_derivative(space, cost, x, i, GRADIENT_FD_STEP)?))
        .collect()
}
