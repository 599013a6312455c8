//! Arbitrary-precision rational numbers with a canonical `num/den` text form.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

/// Exact rational number. Always stored reduced with a positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rat(BigRational);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RatParseError {
    #[error("empty rational literal")]
    Empty,
    #[error("malformed rational literal {0:?}")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

impl Rat {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rat(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn int(n: i64) -> Self {
        Rat(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_big(num: BigInt, den: BigInt) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        Rat(BigRational::new(num, den))
    }

    pub fn zero() -> Self {
        Rat(BigRational::zero())
    }

    pub fn one() -> Self {
        Rat(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rat(self.0.abs())
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rat(self.0.recip())
    }

    pub fn pow(&self, exp: u32) -> Self {
        let mut acc = Rat::one();
        for _ in 0..exp {
            acc *= self.clone();
        }
        acc
    }

    /// Largest integer not above the value.
    pub fn floor_int(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    /// Smallest integer not below the value.
    pub fn ceil_int(&self) -> BigInt {
        self.0.ceil().to_integer()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or_else(|| {
            // Fall back to a quotient of lossy conversions for huge operands.
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }

    /// Total bit length of numerator plus denominator, used for size budgets.
    pub fn bit_len(&self) -> u64 {
        self.numer().bits() + self.denom().bits()
    }

    pub fn signum(&self) -> i32 {
        match self.numer().sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl FromStr for Rat {
    type Err = RatParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(RatParseError::Empty);
        }
        let (num_s, den_s) = match s.split_once('/') {
            Some((n, d)) => (n, d),
            None => (s, "1"),
        };
        let num = BigInt::from_str(num_s.trim())
            .map_err(|_| RatParseError::Malformed(s.to_string()))?;
        let den = BigInt::from_str(den_s.trim())
            .map_err(|_| RatParseError::Malformed(s.to_string()))?;
        if den.is_zero() {
            return Err(RatParseError::ZeroDenominator(s.to_string()));
        }
        Ok(Rat(BigRational::new(num, den)))
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(|e| D::Error::custom(format!("{e}")))
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat::int(n)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat((self.0).$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rat> for &'a Rat {
            type Output = Rat;
            fn $method(self, rhs: &'a Rat) -> Rat {
                Rat((&self.0).$method(&rhs.0))
            }
        }
        impl<'a> $trait<&'a Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: &'a Rat) -> Rat {
                Rat((self.0).$method(&rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-&self.0)
    }
}

impl AddAssign for Rat {
    fn add_assign(&mut self, rhs: Rat) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Rat {
    fn sub_assign(&mut self, rhs: Rat) {
        self.0 -= rhs.0;
    }
}

impl MulAssign for Rat {
    fn mul_assign(&mut self, rhs: Rat) {
        self.0 *= rhs.0;
    }
}

impl std::iter::Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |a, b| a + b)
    }
}

/// Convenience constructor used throughout tests and builders.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(num, den)
}

/// Maximum-norm distance between two equally long vectors.
pub fn linf_dist(a: &[Rat], b: &[Rat]) -> Rat {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(Rat::zero(), Rat::max)
}

/// Maximum-norm of a vector.
pub fn linf_norm(a: &[Rat]) -> Rat {
    a.iter().map(|x| x.abs()).fold(Rat::zero(), Rat::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_normalizes() {
        assert_eq!("6/8".parse::<Rat>().unwrap(), rat(3, 4));
        assert_eq!("-6/8".parse::<Rat>().unwrap(), rat(-3, 4));
        assert_eq!("3/-4".parse::<Rat>().unwrap(), rat(-3, 4));
        assert_eq!("5".parse::<Rat>().unwrap(), Rat::int(5));
        assert_eq!(rat(3, 4).to_string(), "3/4");
        assert_eq!(Rat::int(-2).to_string(), "-2/1");
        assert_eq!(Rat::zero().to_string(), "0/1");
    }

    #[test]
    fn rejects_bad_literals() {
        assert_eq!("".parse::<Rat>(), Err(RatParseError::Empty));
        assert!(matches!(
            "1/0".parse::<Rat>(),
            Err(RatParseError::ZeroDenominator(_))
        ));
        assert!(matches!(
            "a/b".parse::<Rat>(),
            Err(RatParseError::Malformed(_))
        ));
    }

    #[test]
    fn arithmetic_is_exact() {
        let x = rat(1, 3) + rat(1, 6);
        assert_eq!(x, rat(1, 2));
        assert_eq!(rat(2, 3) * rat(3, 4), rat(1, 2));
        assert_eq!(rat(1, 2) - rat(3, 4), rat(-1, 4));
        assert_eq!(rat(7, 2).floor_int(), BigInt::from(3));
        assert_eq!(rat(7, 2).ceil_int(), BigInt::from(4));
        assert_eq!(rat(-1, 2).floor_int(), BigInt::from(-1));
    }

    #[test]
    fn json_round_trip() {
        let x = rat(-22, 7);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "\"-22/7\"");
        let y: Rat = serde_json::from_str(&s).unwrap();
        assert_eq!(x, y);
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(n in -1000i64..1000, d in 1i64..1000) {
            let x = rat(n, d);
            let back: Rat = x.to_string().parse().unwrap();
            prop_assert_eq!(x, back);
        }

        #[test]
        fn field_axioms_sample(a in -50i64..50, b in 1i64..40, c in -50i64..50, d in 1i64..40) {
            let x = rat(a, b);
            let y = rat(c, d);
            prop_assert_eq!(&x + &y, &y + &x);
            prop_assert_eq!(&x * &y, &y * &x);
            if !y.is_zero() {
                let q = x.clone() / y.clone();
                prop_assert_eq!(q * y, x);
            }
        }
    }
}
