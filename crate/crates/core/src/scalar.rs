//! Exact rational or tolerant binary64 numbers used for every weight and
//! table entry.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Default relative tolerance used by [`Equality::tolerant`].
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// A weight or table value.
///
/// `Exact` holds a normalized big rational (positive denominator, reduced);
/// `Real` holds a binary64 value compared through an [`Equality`] with a
/// tolerance. Arithmetic between an exact and a real operand yields a real.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(BigRational),
    Real(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarParseError {
    #[error("empty numeric literal")]
    Empty,
    #[error("malformed numeric literal `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(BigRational::zero())
    }

    pub fn from_int(value: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        Scalar::Exact(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            Scalar::Real(x) => *x,
        }
    }

    /// Converts to the tolerant representation.
    pub fn to_real(&self) -> Scalar {
        Scalar::Real(self.to_f64())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.is_zero(),
            Scalar::Real(x) => *x == 0.0,
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.is_positive(),
            Scalar::Real(x) => *x > 0.0,
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(q.abs()),
            Scalar::Real(x) => Scalar::Real(x.abs()),
        }
    }

    /// Multiplies by a small integer.
    pub fn scale(&self, factor: i64) -> Scalar {
        self * &Scalar::from_int(factor)
    }

    pub fn half(&self) -> Scalar {
        self / &Scalar::from_int(2)
    }

    /// Parses a decimal (`-1.25`, `3e-2`) or rational (`-5/4`) literal exactly.
    pub fn parse_exact(text: &str) -> Result<Scalar, ScalarParseError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(ScalarParseError::Empty);
        }
        if let Some((num, den)) = text.split_once('/') {
            let num = parse_bigint(num).ok_or_else(|| ScalarParseError::Malformed(text.into()))?;
            let den = parse_bigint(den).ok_or_else(|| ScalarParseError::Malformed(text.into()))?;
            if den.is_zero() {
                return Err(ScalarParseError::ZeroDenominator(text.into()));
            }
            return Ok(Scalar::Exact(BigRational::new(num, den)));
        }
        parse_decimal(text)
            .map(Scalar::Exact)
            .ok_or_else(|| ScalarParseError::Malformed(text.into()))
    }

    /// Parses a literal into the tolerant representation. Rational literals
    /// are accepted and converted.
    pub fn parse_real(text: &str) -> Result<Scalar, ScalarParseError> {
        let trimmed = text.trim();
        if trimmed.contains('/') {
            return Scalar::parse_exact(trimmed).map(|s| s.to_real());
        }
        if trimmed.is_empty() {
            return Err(ScalarParseError::Empty);
        }
        trimmed
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Scalar::Real)
            .ok_or_else(|| ScalarParseError::Malformed(trimmed.into()))
    }
}

fn parse_bigint(text: &str) -> Option<BigInt> {
    let t = text.trim();
    let digits = t.strip_prefix(['+', '-']).unwrap_or(t);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(t.strip_prefix('+').unwrap_or(t)).ok()
}

fn parse_decimal(text: &str) -> Option<BigRational> {
    let (negative, rest) = match text.as_bytes().first()? {
        b'-' => (true, &text[1..]),
        b'+' => (false, &text[1..]),
        _ => (false, text),
    };
    let (mantissa, exponent) = match rest.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = rest[pos + 1..].parse().ok()?;
            (&rest[..pos], exp)
        }
        None => (rest, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(&digits).ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut denom = BigInt::one();
    if scale >= 0 {
        numer *= num_traits::pow(ten, scale as usize);
    } else {
        denom = num_traits::pow(ten, (-scale) as usize);
    }
    if negative {
        numer = -numer;
    }
    Some(BigRational::new(numer, denom))
}

impl FromStr for Scalar {
    type Err = ScalarParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scalar::parse_exact(s)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(q) if q.is_integer() => write!(f, "{}", q.numer()),
            Scalar::Exact(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            Scalar::Real(x) => write!(f, "{x}"),
        }
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl From<i64> for Scalar {
    fn from(value: i64) -> Self {
        Scalar::from_int(value)
    }
}

impl From<BigRational> for Scalar {
    fn from(value: BigRational) -> Self {
        Scalar::Exact(value)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a $op b),
                    (a, b) => Scalar::Real(a.to_f64() $op b.to_f64()),
                }
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(-q),
            Scalar::Real(x) => Scalar::Real(-x),
        }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -(self.clone())
    }
}

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, x| acc + x)
    }
}

impl<'a> std::iter::Sum<&'a Scalar> for Scalar {
    fn sum<I: Iterator<Item = &'a Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, x| acc + x)
    }
}

/// How two scalars are compared.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Equality {
    /// Exact comparison of rationals (reals fall back to `==`).
    #[default]
    Exact,
    /// `|x − y| ≤ epsilon · max(1, |x|, |y|)`.
    Tolerant { epsilon: f64 },
}

impl Equality {
    pub fn tolerant() -> Self {
        Equality::Tolerant { epsilon: DEFAULT_EPSILON }
    }

    pub fn eq(&self, a: &Scalar, b: &Scalar) -> bool {
        match (self, a, b) {
            (_, Scalar::Exact(x), Scalar::Exact(y)) if *self == Equality::Exact => x == y,
            (Equality::Exact, _, _) => a.to_f64() == b.to_f64(),
            (Equality::Tolerant { epsilon }, _, _) => {
                let (x, y) = (a.to_f64(), b.to_f64());
                (x - y).abs() <= epsilon * 1f64.max(x.abs()).max(y.abs())
            }
        }
    }

    pub fn is_zero(&self, a: &Scalar) -> bool {
        self.eq(a, &Scalar::zero())
    }

    /// Total order that agrees with `eq` for ties; used for the four-point
    /// maximum.
    pub fn cmp(&self, a: &Scalar, b: &Scalar) -> Ordering {
        if self.eq(a, b) {
            return Ordering::Equal;
        }
        match (a, b) {
            (Scalar::Exact(x), Scalar::Exact(y)) => x.cmp(y),
            _ => a.to_f64().partial_cmp(&b.to_f64()).unwrap_or(Ordering::Equal),
        }
    }
}
