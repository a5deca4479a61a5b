//! Exact rational numbers.
//!
//! Values whose numerator and denominator fit in `i128` are stored inline and
//! every operation is first attempted with checked `i128` arithmetic. On
//! overflow the operands are promoted to `BigInt`. Both representations are
//! kept fully reduced with a positive denominator, and a value is always stored
//! inline when it fits, so the representation is canonical and the derived
//! `Eq`/`Hash` agree with numeric equality.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rational(Repr);

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    // den > 0, gcd(num, den) = 1, neither equals i128::MIN
    Small { num: i128, den: i128 },
    // only used when the reduced value does not fit `Small`
    Big { num: BigInt, den: BigInt },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal {0:?}: expected \"p\" or \"p/q\" with integer p, q")]
    Invalid(String),
    #[error("decimal literal {0:?} is not accepted; write it as an exact fraction \"p/q\"")]
    Decimal(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

fn fits_small(v: i128) -> bool {
    v != i128::MIN
}

impl Rational {
    pub const ZERO: Rational = Rational(Repr::Small { num: 0, den: 1 });
    pub const ONE: Rational = Rational(Repr::Small { num: 1, den: 1 });

    /// Builds `num / den` in lowest terms. Panics if `den == 0`.
    pub fn new(num: i128, den: i128) -> Rational {
        assert!(den != 0, "rational with zero denominator");
        Self::reduce_small(num, den).unwrap_or_else(|| Self::from_big(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_integer(value: i128) -> Rational {
        Self::new(value, 1)
    }

    /// Builds `num / den` from arbitrary-precision parts. Panics if `den == 0`.
    pub fn from_big(num: BigInt, den: BigInt) -> Rational {
        assert!(!den.is_zero(), "rational with zero denominator");
        let g = num.gcd(&den);
        let (mut num, mut den) = (num / &g, den / &g);
        if den.is_negative() {
            num = -num;
            den = -den;
        }
        match (num.to_i128(), den.to_i128()) {
            (Some(n), Some(d)) if fits_small(n) && fits_small(d) => Rational(Repr::Small { num: n, den: d }),
            _ => Rational(Repr::Big { num, den }),
        }
    }

    fn reduce_small(num: i128, den: i128) -> Option<Rational> {
        if !fits_small(num) || !fits_small(den) {
            return None;
        }
        let g = num.gcd(&den);
        let (mut num, mut den) = (num / g, den / g);
        if den < 0 {
            num = -num;
            den = -den;
        }
        Some(Rational(Repr::Small { num, den }))
    }

    fn to_big_parts(&self) -> (BigInt, BigInt) {
        match &self.0 {
            Repr::Small { num, den } => (BigInt::from(*num), BigInt::from(*den)),
            Repr::Big { num, den } => (num.clone(), den.clone()),
        }
    }

    pub fn numer(&self) -> BigInt {
        self.to_big_parts().0
    }

    pub fn denom(&self) -> BigInt {
        self.to_big_parts().1
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small { num: 0, .. })
    }

    pub fn is_positive(&self) -> bool {
        match &self.0 {
            Repr::Small { num, .. } => *num > 0,
            Repr::Big { num, .. } => num.is_positive(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small { num, .. } => *num < 0,
            Repr::Big { num, .. } => num.is_negative(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small { den, .. } => *den == 1,
            Repr::Big { den, .. } => den.is_one(),
        }
    }

    pub fn abs(&self) -> Rational {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// Panics on zero.
    pub fn recip(&self) -> Rational {
        assert!(!self.is_zero(), "reciprocal of zero");
        match &self.0 {
            Repr::Small { num, den } => {
                let (n, d) = if *num < 0 { (-den, -num) } else { (*den, *num) };
                Rational(Repr::Small { num: n, den: d })
            }
            Repr::Big { num, den } => Rational::from_big(den.clone(), num.clone()),
        }
    }

    pub fn floor(&self) -> Rational {
        match &self.0 {
            Repr::Small { num, den } => Rational::from_integer(num.div_floor(den)),
            Repr::Big { num, den } => Rational::from_big(num.div_floor(den), BigInt::one()),
        }
    }

    pub fn ceil(&self) -> Rational {
        match &self.0 {
            Repr::Small { num, den } => Rational::from_integer(num.div_ceil(den)),
            Repr::Big { num, den } => Rational::from_big(Integer::div_ceil(num, den), BigInt::one()),
        }
    }

    /// `floor(self * k)` without reducing the intermediate product.
    pub fn floor_scaled(&self, k: u64) -> Rational {
        if let Repr::Small { num, den } = &self.0 {
            if let Some(p) = num.checked_mul(k as i128) {
                return Rational::from_integer(Integer::div_floor(&p, den));
            }
        }
        let (num, den) = self.to_big_parts();
        Rational::from_big((num * BigInt::from(k)).div_floor(&den), BigInt::one())
    }

    /// `ceil(self * k)` without reducing the intermediate product.
    pub fn ceil_scaled(&self, k: u64) -> Rational {
        if let Repr::Small { num, den } = &self.0 {
            if let Some(p) = num.checked_mul(k as i128) {
                return Rational::from_integer(Integer::div_ceil(&p, den));
            }
        }
        let (num, den) = self.to_big_parts();
        Rational::from_big(Integer::div_ceil(&(num * BigInt::from(k)), &den), BigInt::one())
    }

    /// `(floor(self * k), ceil(self * k))` for non-negative `self`, or
    /// `None` if `self` is negative or the ceiling exceeds `u64`.
    pub fn floor_ceil_scaled(&self, k: u64) -> Option<(u64, u64)> {
        if self.is_negative() {
            return None;
        }
        if let Repr::Small { num, den } = &self.0 {
            if let (Ok(n), Ok(d)) = (u64::try_from(*num), u64::try_from(*den)) {
                if let Some(p) = n.checked_mul(k) {
                    let q = p / d;
                    return Some((q, q + u64::from(p % d != 0)));
                }
            }
        }
        let floor = self.floor_scaled(k).to_u64()?;
        let ceil = self.ceil_scaled(k).to_u64()?;
        Some((floor, ceil))
    }

    /// Compares `a / x` with `b / y` for strictly positive `x` and `y` by
    /// cross-multiplication.
    pub fn cmp_quotients(a: u64, x: &Rational, b: u64, y: &Rational) -> Ordering {
        debug_assert!(x.is_positive() && y.is_positive());
        // a / (xn/xd) = a*xd / xn
        if let (Repr::Small { num: xn, den: xd }, Repr::Small { num: yn, den: yd }) = (&x.0, &y.0) {
            let lhs = (a as i128).checked_mul(*xd).and_then(|v| v.checked_mul(*yn));
            let rhs = (b as i128).checked_mul(*yd).and_then(|v| v.checked_mul(*xn));
            if let (Some(l), Some(r)) = (lhs, rhs) {
                return l.cmp(&r);
            }
        }
        let (xn, xd) = x.to_big_parts();
        let (yn, yd) = y.to_big_parts();
        (BigInt::from(a) * xd * yn).cmp(&(BigInt::from(b) * yd * xn))
    }

    /// The value as an integer, if it is one and fits in `i128`.
    pub fn to_i128(&self) -> Option<i128> {
        match &self.0 {
            Repr::Small { num, den: 1 } => Some(*num),
            _ => None,
        }
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.to_i128().and_then(|v| u64::try_from(v).ok())
    }

    /// Lossy conversion, intended for display and plotting only.
    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small { num, den } => *num as f64 / *den as f64,
            Repr::Big { num, den } => {
                // scale so both parts fit comfortably in f64
                let shift = num.bits().max(den.bits()).saturating_sub(1000);
                let n = (num >> shift).to_f64().unwrap_or(f64::NAN);
                let d = (den >> shift).to_f64().unwrap_or(f64::NAN);
                n / d
            }
        }
    }

    /// Decimal string with exactly `places` fractional digits, rounded half
    /// away from zero. Computed exactly.
    pub fn to_fixed(&self, places: u32) -> String {
        let (num, den) = self.to_big_parts();
        let scale = BigInt::from(10u32).pow(places);
        let scaled = num.abs() * &scale;
        let (q, r) = scaled.div_rem(&den);
        let q = if r * 2u32 >= den { q + 1u32 } else { q };
        let digits = q.to_string();
        let sign = if num.is_negative() && !q.is_zero() { "-" } else { "" };
        if places == 0 {
            return format!("{sign}{digits}");
        }
        let places = places as usize;
        let padded = format!("{digits:0>width$}", width = places + 1);
        let (int_part, frac_part) = padded.split_at(padded.len() - places);
        format!("{sign}{int_part}.{frac_part}")
    }

    fn add_impl(&self, other: &Rational) -> Rational {
        if let (Repr::Small { num: a, den: b }, Repr::Small { num: c, den: d }) = (&self.0, &other.0) {
            let sum = a
                .checked_mul(*d)
                .zip(c.checked_mul(*b))
                .and_then(|(x, y)| x.checked_add(y))
                .zip(b.checked_mul(*d));
            if let Some((n, dd)) = sum {
                if let Some(r) = Self::reduce_small(n, dd) {
                    return r;
                }
            }
        }
        let (a, b) = self.to_big_parts();
        let (c, d) = other.to_big_parts();
        Rational::from_big(a * &d + c * &b, b * d)
    }

    fn mul_impl(&self, other: &Rational) -> Rational {
        if let (Repr::Small { num: a, den: b }, Repr::Small { num: c, den: d }) = (&self.0, &other.0) {
            let g1 = a.gcd(d);
            let g2 = c.gcd(b);
            let (g1, g2) = (g1.max(1), g2.max(1));
            let n = (a / g1).checked_mul(c / g2);
            let dd = (b / g2).checked_mul(d / g1);
            if let (Some(n), Some(dd)) = (n, dd) {
                if fits_small(n) && fits_small(dd) {
                    return if n == 0 { Rational::ZERO } else { Rational(Repr::Small { num: n, den: dd }) };
                }
            }
        }
        let (a, b) = self.to_big_parts();
        let (c, d) = other.to_big_parts();
        Rational::from_big(a * c, b * d)
    }
}

impl Default for Rational {
    fn default() -> Self {
        Rational::ZERO
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        if let (Repr::Small { num: a, den: b }, Repr::Small { num: c, den: d }) = (&self.0, &other.0) {
            if let (Some(l), Some(r)) = (a.checked_mul(*d), c.checked_mul(*b)) {
                return l.cmp(&r);
            }
        }
        let (a, b) = self.to_big_parts();
        let (c, d) = other.to_big_parts();
        (a * d).cmp(&(c * b))
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match &self.0 {
            Repr::Small { num, den } => Rational(Repr::Small { num: -num, den: *den }),
            Repr::Big { num, den } => Rational::from_big(-num, den.clone()),
        }
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -&self
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, |$a:ident, $b:ident| $body:expr) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, $b: &Rational) -> Rational {
                let $a = self;
                $body
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                (&self).$method(rhs)
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a.add_impl(b));
forward_binop!(Sub, sub, |a, b| a.add_impl(&-b));
forward_binop!(Mul, mul, |a, b| a.mul_impl(b));
forward_binop!(Div, div, |a, b| a.mul_impl(&b.recip()));

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        *self = self.add_impl(rhs);
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        *self = self.add_impl(&-rhs);
    }
}

impl<'a> std::iter::Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::ZERO, |acc, x| acc + x)
    }
}

impl std::iter::Sum<Rational> for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::ZERO, |acc, x| acc + x)
    }
}

macro_rules! from_int {
    ($($t:ty),*) => {$(
        impl From<$t> for Rational {
            fn from(v: $t) -> Rational {
                Rational::from_integer(v as i128)
            }
        }
    )*};
}

from_int!(i32, i64, u32, u64, usize);

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small { num, den: 1 } => write!(f, "{num}"),
            Repr::Small { num, den } => write!(f, "{num}/{den}"),
            Repr::Big { num, den } if den.is_one() => write!(f, "{num}"),
            Repr::Big { num, den } => write!(f, "{num}/{den}"),
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_int(s: &str, whole: &str) -> Result<BigInt, ParseRationalError> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseRationalError::Invalid(whole.to_string()));
    }
    s.parse::<BigInt>().map_err(|_| ParseRationalError::Invalid(whole.to_string()))
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `"p"` or `"p/q"` with decimal integers. Decimal points are
    /// rejected outright.
    fn from_str(s: &str) -> Result<Rational, ParseRationalError> {
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        if s.contains('.') || s.contains('e') || s.contains('E') {
            return Err(ParseRationalError::Decimal(s.to_string()));
        }
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (parse_int(n, s)?, parse_int(d, s)?),
            None => (parse_int(s, s)?, BigInt::one()),
        };
        if den.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        Ok(Rational::from_big(num, den))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
