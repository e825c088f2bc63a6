//! Extended-precision scalar arithmetic.
//!
//! [`Scalar`] wraps an MPFR float of fixed significand width. Every
//! operation rounds to nearest, so one operation at precision `p` carries a
//! relative error of at most `2^(1-p)`. Values are always finite: the
//! constructors reject NaN/infinity, fallible operations (`sqrt`, `try_div`,
//! parsing) return [`Error`], and the infallible operators panic on a
//! non-finite result instead of propagating it.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::float::Round;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};

pub const DEFAULT_PRECISION_BITS: u32 = 256;
pub const DEFAULT_TOLERANCE_EXPONENT: u32 = 100;

const MIN_PRECISION_BITS: u32 = 64;
const MIN_TOLERANCE_EXPONENT: u32 = 16;
const MAX_PRECISION_BITS: u32 = 1 << 20;

/// Working precision and acceptance tolerance shared by every constructor.
///
/// An identity check passes iff `|residual| <= 2^-t * scale`, with the scale
/// always supplied by the caller.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrecisionConfig {
    precision_bits: u32,
    tolerance_exponent: u32,
}

impl PrecisionConfig {
    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn tolerance_exponent(&self) -> u32 {
        self.tolerance_exponent
    }

    /// `2^-t` at the working precision.
    pub fn tolerance(&self) -> Scalar {
        self.pow2(-(self.tolerance_exponent as i32))
    }

    /// `2^-e` for an arbitrary exponent, e.g. a looser acceptance threshold.
    pub fn tolerance_at(&self, exponent: u32) -> Scalar {
        self.pow2(-(exponent as i32))
    }

    pub fn pow2(&self, exponent: i32) -> Scalar {
        Scalar::pow2(self.precision_bits, exponent)
    }

    pub fn int(&self, value: i64) -> Scalar {
        Scalar::from_int(self.precision_bits, value)
    }

    pub fn ratio(&self, num: i64, den: i64) -> Result<Scalar> {
        Scalar::from_ratio(self.precision_bits, num, den)
    }

    pub fn from_f64(&self, value: f64) -> Result<Scalar> {
        Scalar::from_f64(self.precision_bits, value)
    }

    pub fn parse(&self, text: &str) -> Result<Scalar> {
        Scalar::parse_decimal(text, self.precision_bits)
    }

    /// `|residual| <= 2^-t * scale`.
    pub fn within(&self, residual: &Scalar, scale: &Scalar) -> bool {
        within(residual, scale, self.tolerance_exponent)
    }
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        PrecisionConfig {
            precision_bits: DEFAULT_PRECISION_BITS,
            tolerance_exponent: DEFAULT_TOLERANCE_EXPONENT,
        }
    }
}

/// Validate a precision/tolerance pair.
pub fn configure(precision_bits: u32, tolerance_exponent: u32) -> Result<PrecisionConfig> {
    if precision_bits < MIN_PRECISION_BITS {
        return Err(Error::InvalidConfig(format!(
            "precision of {precision_bits} bits is below the minimum of {MIN_PRECISION_BITS}"
        )));
    }
    if precision_bits > MAX_PRECISION_BITS {
        return Err(Error::InvalidConfig(format!(
            "precision of {precision_bits} bits exceeds the maximum of {MAX_PRECISION_BITS}"
        )));
    }
    if tolerance_exponent < MIN_TOLERANCE_EXPONENT {
        return Err(Error::InvalidConfig(format!(
            "tolerance exponent {tolerance_exponent} is below the minimum of {MIN_TOLERANCE_EXPONENT}"
        )));
    }
    if u64::from(precision_bits) < 2 * u64::from(tolerance_exponent) {
        return Err(Error::InvalidConfig(format!(
            "insufficient guard digits: {precision_bits} bits < 2 x tolerance exponent {tolerance_exponent}"
        )));
    }
    Ok(PrecisionConfig {
        precision_bits,
        tolerance_exponent,
    })
}

/// `|residual| <= 2^-exponent * scale`.
pub fn within(residual: &Scalar, scale: &Scalar, exponent: u32) -> bool {
    let bound = scale.abs().mul_pow2(-(exponent as i32));
    residual.abs() <= bound
}

/// A residual paired with the scale it is judged against.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledResidual {
    pub residual: Scalar,
    pub scale: Scalar,
}

impl ScaledResidual {
    pub fn new(residual: Scalar, scale: Scalar) -> ScaledResidual {
        ScaledResidual { residual, scale }
    }

    /// `|residual| <= 2^-exponent * scale`.
    pub fn passes(&self, exponent: u32) -> bool {
        within(&self.residual, &self.scale, exponent)
    }

    /// `|residual| / scale` as a float, for reporting.
    pub fn relative(&self) -> f64 {
        if self.scale.is_zero() {
            return if self.residual.is_zero() { 0.0 } else { f64::INFINITY };
        }
        (self.residual.abs() / &self.scale.abs()).to_f64()
    }

    /// The worse of two residuals by relative size.
    pub fn worst(self, other: ScaledResidual) -> ScaledResidual {
        if other.relative() > self.relative() {
            other
        } else {
            self
        }
    }
}

/// An extended-precision finite real.
#[derive(Clone, PartialEq)]
pub struct Scalar(Float);

impl Scalar {
    fn wrap(value: Float) -> Scalar {
        assert!(
            value.is_finite(),
            "non-finite result in extended-precision arithmetic"
        );
        Scalar(value)
    }

    pub fn zero(prec: u32) -> Scalar {
        Scalar(Float::new(prec))
    }

    pub fn one(prec: u32) -> Scalar {
        Scalar(Float::with_val(prec, 1))
    }

    pub fn from_int(prec: u32, value: i64) -> Scalar {
        Scalar(Float::with_val(prec, value))
    }

    pub fn from_ratio(prec: u32, num: i64, den: i64) -> Result<Scalar> {
        if den == 0 {
            return Err(Error::Arithmetic("division by zero".into()));
        }
        let n = Float::with_val(prec, num);
        Ok(Scalar(n / Float::with_val(prec, den)))
    }

    /// Exact conversion (every finite `f64` is representable at `prec >= 53`).
    pub fn from_f64(prec: u32, value: f64) -> Result<Scalar> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{value}")));
        }
        Ok(Scalar(Float::with_val(prec, value)))
    }

    pub fn pow2(prec: u32, exponent: i32) -> Scalar {
        Scalar(Float::with_val(prec, Float::i_exp(1, exponent)))
    }

    pub fn precision(&self) -> u32 {
        self.0.prec()
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn into_float(self) -> Float {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative() && !self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_sign_positive() && !self.0.is_zero()
    }

    pub fn abs(&self) -> Scalar {
        Scalar(self.0.clone().abs())
    }

    pub fn square(&self) -> Scalar {
        Scalar::wrap(self.0.clone().square())
    }

    pub fn sqrt(&self) -> Result<Scalar> {
        if self.is_sign_negative() {
            return Err(Error::Arithmetic(format!(
                "square root of negative value {}",
                self.to_f64()
            )));
        }
        Ok(Scalar(self.0.clone().sqrt()))
    }

    pub fn recip(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::Arithmetic("reciprocal of zero".into()));
        }
        Ok(Scalar::wrap(self.0.clone().recip()))
    }

    pub fn try_div(&self, rhs: &Scalar) -> Result<Scalar> {
        if rhs.is_zero() {
            return Err(Error::Arithmetic("division by zero".into()));
        }
        Ok(self / rhs)
    }

    pub fn powi(&self, exponent: i32) -> Scalar {
        if exponent < 0 && self.is_zero() {
            panic!("negative power of zero");
        }
        Scalar::wrap(Float::with_val(self.precision(), (&self.0).pow(exponent)))
    }

    pub fn mul_pow2(&self, exponent: i32) -> Scalar {
        let mut out = self.0.clone();
        if exponent >= 0 {
            out <<= exponent as u32;
        } else {
            out >>= exponent.unsigned_abs();
        }
        Scalar::wrap(out)
    }

    pub fn ln(&self) -> Result<Scalar> {
        if !self.is_positive() {
            return Err(Error::Arithmetic("logarithm of nonpositive value".into()));
        }
        Ok(Scalar(self.0.clone().ln()))
    }

    pub fn max(self, other: Scalar) -> Scalar {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Scalar) -> Scalar {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Total order on finite values.
    pub fn total_cmp(&self, other: &Scalar) -> Ordering {
        self.0.total_cmp(&other.0)
    }

    /// Significant decimal digits emitted by [`Scalar::to_decimal_string`]:
    /// one more than `ceil(p * log10 2)`, enough for an exact round trip.
    pub fn decimal_digits(prec: u32) -> usize {
        let base = (f64::from(prec) * std::f64::consts::LOG10_2).ceil() as usize;
        base + 1
    }

    /// Deterministic decimal form `[-]D.DDDD…e[-]X`.
    pub fn to_decimal_string(&self) -> String {
        let digits = Scalar::decimal_digits(self.precision());
        if self.0.is_zero() {
            return format!("0.{}e0", "0".repeat(digits - 1));
        }
        let (negative, mantissa, exp) =
            self.0
                .to_sign_string_exp_round(10, Some(digits), Round::Nearest);
        let exp = exp.expect("finite nonzero value has an exponent");
        let (lead, rest) = mantissa.split_at(1);
        let sign = if negative { "-" } else { "" };
        format!("{sign}{lead}.{rest}e{}", exp - 1)
    }

    /// Parse `[+-]int[.frac][e[+-]exp]`, rounding to `prec` bits.
    pub fn parse_decimal(text: &str, prec: u32) -> Result<Scalar> {
        let trimmed = text.trim();
        if !is_decimal_literal(trimmed) {
            return Err(Error::Parse(format!("not a decimal literal: {text:?}")));
        }
        let parsed = Float::parse(trimmed).map_err(|e| Error::Parse(format!("{text:?}: {e}")))?;
        let value = Float::with_val(prec, parsed);
        if !value.is_finite() {
            return Err(Error::NonFinite(text.to_string()));
        }
        Ok(Scalar(value))
    }
}

fn is_decimal_literal(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (body, exp) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], Some(&s[pos + 1..])),
        None => (s, None),
    };
    let (int, frac) = match body.find('.') {
        Some(pos) => (&body[..pos], Some(&body[pos + 1..])),
        None => (body, None),
    };
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    let int_ok = digits(int);
    let frac_ok = frac.is_none_or(digits);
    let exp_ok = exp.is_none_or(|e| digits(e.strip_prefix(['+', '-']).unwrap_or(e)));
    int_ok && frac_ok && exp_ok
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.to_decimal_string())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Scalar) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl PartialEq<i64> for Scalar {
    fn eq(&self, other: &i64) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<i64> for Scalar {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

fn joint_prec(a: &Scalar, b: &Scalar) -> u32 {
    a.precision().max(b.precision())
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                Scalar::wrap(Float::with_val(joint_prec(self, rhs), &self.0 $op &rhs.0))
            }
        }
        impl $trait<Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self $op &rhs
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                &self $op rhs
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                &self $op &rhs
            }
        }
        impl $trait<i64> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: i64) -> Scalar {
                self $op &Scalar::from_int(self.precision(), rhs)
            }
        }
        impl $trait<i64> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: i64) -> Scalar {
                &self $op rhs
            }
        }
        impl $trait<&Scalar> for i64 {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                &Scalar::from_int(rhs.precision(), self) $op rhs
            }
        }
        impl $trait<Scalar> for i64 {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self $op &rhs
            }
        }
    };
}

scalar_binop!(Add, add, +);
scalar_binop!(Sub, sub, -);
scalar_binop!(Mul, mul, *);
scalar_binop!(Div, div, /);

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        self.0 += &rhs.0;
        assert!(self.0.is_finite(), "non-finite result in extended-precision arithmetic");
    }
}

impl AddAssign<Scalar> for Scalar {
    fn add_assign(&mut self, rhs: Scalar) {
        *self += &rhs;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        self.0 -= &rhs.0;
        assert!(self.0.is_finite(), "non-finite result in extended-precision arithmetic");
    }
}

impl SubAssign<Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: Scalar) {
        *self -= &rhs;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        self.0 *= &rhs.0;
        assert!(self.0.is_finite(), "non-finite result in extended-precision arithmetic");
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0.clone())
    }
}

impl<'a> Sum<&'a Scalar> for Scalar {
    /// Panics on an empty iterator (no precision to borrow); use [`sum_at`].
    fn sum<I: Iterator<Item = &'a Scalar>>(mut iter: I) -> Scalar {
        let mut acc = iter.next().expect("sum of empty scalar sequence").clone();
        for x in iter {
            acc += x;
        }
        acc
    }
}

/// Sum with an explicit precision so that empty sums are zero.
pub fn sum_at<'a, I>(prec: u32, iter: I) -> Scalar
where
    I: IntoIterator<Item = &'a Scalar>,
{
    let mut acc = Scalar::zero(prec);
    for x in iter {
        acc += x;
    }
    acc
}

/// Largest absolute value in `values`, zero when empty.
pub fn max_abs<'a, I>(prec: u32, values: I) -> Scalar
where
    I: IntoIterator<Item = &'a Scalar>,
{
    values
        .into_iter()
        .fold(Scalar::zero(prec), |acc, x| acc.max(x.abs()))
}
