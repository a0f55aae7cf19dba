//! Dual-mode arithmetic.
//!
//! Every computation in this crate runs in one of two scalar modes:
//!
//! * **rational** — exact arithmetic over arbitrary-precision rationals; all
//!   comparisons are exact and operations whose result would be irrational
//!   (such as eigenvalues of a matrix with non-square discriminant) are
//!   refused with a clear error;
//! * **float** — `f64` arithmetic with explicit tolerances.
//!
//! The mode is fixed for the duration of a computation by instantiating the
//! generic operations at [`BigRational`] or `f64`, and is recorded in every
//! serialized output.

use std::cmp::Ordering;
use std::fmt;

use num::bigint::BigInt;
use num::{BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arithmetic mode of a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Rational,
    Float,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Rational => "rational",
            Mode::Float => "float",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scalar field used by the generic algorithms.
///
/// Implemented by `f64` (float mode) and [`BigRational`] (rational mode).
/// Tolerance arguments are honored in float mode and ignored in rational
/// mode, where every comparison is exact.
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + Zero
    + One
    + 'static
{
    fn mode() -> Mode;

    fn from_int(n: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// Exact conversion from `f64`: in rational mode the dyadic value of the
    /// float is represented exactly. Panics on non-finite input.
    fn from_f64(x: f64) -> Self;

    /// Nearest `f64` value (used for diagnostics, pivoting heuristics and
    /// float-mode interop; never feeds back into rational arithmetic).
    fn to_f64(&self) -> f64;

    /// Square root when representable in the mode: float mode returns the
    /// usual square root of a non-negative value, rational mode succeeds only
    /// for perfect squares.
    fn sqrt_checked(&self, context: &str) -> Result<Self>;

    /// Mode-aware equality: exact in rational mode, `|a-b| <= tol` in float.
    fn eq_within(&self, other: &Self, tol: f64) -> bool;

    /// Mode-aware strict positivity: `> 0` in rational mode, `> tol` in float.
    fn positive_within(&self, tol: f64) -> bool;

    /// Total order for deterministic sorting (valid data contains no NaN).
    fn cmp_total(&self, other: &Self) -> Ordering;

    /// Eigenvalues of a square row-major matrix of size `n > 2`. Float mode
    /// delegates to a Schur decomposition; rational mode refuses.
    fn general_eigenvalues(n: usize, data: &[Self], context: &str) -> Result<Vec<Self>>;

    /// Inject an exact rational (used by the JSON parser).
    fn from_big_rational(q: &BigRational) -> Self;

    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
}

impl Scalar for f64 {
    fn mode() -> Mode {
        Mode::Float
    }

    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn sqrt_checked(&self, context: &str) -> Result<Self> {
        if *self < 0.0 {
            return Err(Error::ComplexEigenvalues {
                context: context.to_string(),
            });
        }
        Ok(f64::sqrt(*self))
    }

    fn eq_within(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }

    fn positive_within(&self, tol: f64) -> bool {
        *self > tol
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).expect("NaN in scalar comparison")
    }

    fn general_eigenvalues(n: usize, data: &[Self], context: &str) -> Result<Vec<Self>> {
        crate::linalg::float_eigenvalues(n, data, context)
    }

    fn from_big_rational(q: &BigRational) -> Self {
        Scalar::to_f64(q)
    }
}

fn bigint_is_square(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    if &r * &r == *n {
        Some(r)
    } else {
        None
    }
}

impl Scalar for BigRational {
    fn mode() -> Mode {
        Mode::Rational
    }

    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("non-finite float cannot become a rational")
    }

    fn to_f64(&self) -> f64 {
        // Direct conversion of numerator and denominator overflows for the
        // large integers produced by chains of exact operations; shift both
        // down to a safe width first.
        let numer = self.numer();
        let denom = self.denom();
        let nf = numer.to_f64().unwrap_or(f64::INFINITY);
        let df = denom.to_f64().unwrap_or(f64::INFINITY);
        if nf.is_finite() && df.is_finite() && df != 0.0 {
            return nf / df;
        }
        let bits = numer.bits().max(denom.bits());
        let shift = bits.saturating_sub(64);
        let n = (numer >> shift).to_f64().unwrap_or(0.0);
        let d = (denom >> shift).to_f64().unwrap_or(0.0);
        if d == 0.0 {
            if n == 0.0 {
                0.0
            } else if n > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        } else {
            n / d
        }
    }

    fn sqrt_checked(&self, context: &str) -> Result<Self> {
        if self.is_negative() {
            return Err(Error::ComplexEigenvalues {
                context: context.to_string(),
            });
        }
        let numer = bigint_is_square(self.numer());
        let denom = bigint_is_square(self.denom());
        match (numer, denom) {
            (Some(n), Some(d)) => Ok(BigRational::new(n, d)),
            _ => Err(Error::IrrationalResult {
                context: context.to_string(),
            }),
        }
    }

    fn eq_within(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }

    fn positive_within(&self, _tol: f64) -> bool {
        self.is_positive()
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn general_eigenvalues(_n: usize, _data: &[Self], context: &str) -> Result<Vec<Self>> {
        Err(Error::Unsupported(format!(
            "eigenvalues of matrices larger than 2x2 require float mode ({context})"
        )))
    }

    fn from_big_rational(q: &BigRational) -> Self {
        q.clone()
    }
}

/// Serialize a scalar as a JSON value: rationals as `"p/q"` strings, floats
/// as plain numbers (serialized losslessly).
pub fn scalar_to_json<S: Scalar>(s: &S) -> serde_json::Value {
    match S::mode() {
        Mode::Float => serde_json::Number::from_f64(s.to_f64())
            .map(serde_json::Value::Number)
            .unwrap_or_else(|| serde_json::Value::String(s.to_string())),
        Mode::Rational => serde_json::Value::String(format!("{s}")),
    }
}

/// Parse a scalar from a JSON value. Accepts numbers and `"p/q"` (or bare
/// integer) strings in either mode; float-to-rational conversion is exact.
pub fn scalar_from_json<S: Scalar>(v: &serde_json::Value) -> Result<S> {
    match v {
        serde_json::Value::Number(n) => {
            let x = n
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("number out of range: {n}")))?;
            if !x.is_finite() {
                return Err(Error::Parse(format!("non-finite number: {n}")));
            }
            Ok(S::from_f64(x))
        }
        serde_json::Value::String(s) => parse_scalar(s),
        other => Err(Error::Parse(format!("expected number or string, got {other}"))),
    }
}

/// Parse `"p/q"`, `"p"` or a decimal literal into a scalar.
pub fn parse_scalar<S: Scalar>(s: &str) -> Result<S> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in `{s}`")))?;
        let den: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in `{s}`")))?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        let q = BigRational::new(num, den);
        return Ok(S::from_big_rational(&q));
    }
    if let Ok(n) = s.parse::<i64>() {
        return Ok(S::from_int(n));
    }
    let x: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse scalar `{s}`")))?;
    if !x.is_finite() {
        return Err(Error::Parse(format!("non-finite scalar `{s}`")));
    }
    Ok(S::from_f64(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_sqrt_perfect_square() {
        let x = <BigRational as Scalar>::from_ratio(9, 16);
        let r = x.sqrt_checked("test").unwrap();
        assert_eq!(r, <BigRational as Scalar>::from_ratio(3, 4));
    }

    #[test]
    fn rational_sqrt_rejects_irrational() {
        let x = <BigRational as Scalar>::from_ratio(2, 1);
        assert!(matches!(
            x.sqrt_checked("test"),
            Err(Error::IrrationalResult { .. })
        ));
    }

    #[test]
    fn dyadic_float_conversion_is_exact() {
        let x = 0.1_f64;
        let q = <BigRational as Scalar>::from_f64(x);
        assert_eq!(Scalar::to_f64(&q), x);
    }

    #[test]
    fn json_round_trip() {
        let q = <BigRational as Scalar>::from_ratio(-7, 50);
        let v = scalar_to_json(&q);
        assert_eq!(v, serde_json::Value::String("-7/50".into()));
        let back: BigRational = scalar_from_json(&v).unwrap();
        assert_eq!(back, q);
    }
}
