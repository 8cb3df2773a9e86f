//! Numeric backends.
//!
//! Every algorithm in the crate is generic over [`Scalar`]. The exact backend
//! is [`Rational`] (arbitrary precision); `f64` is available for larger runs
//! and compares with an absolute tolerance of [`FLOAT_TOLERANCE`].

use std::fmt::{self, Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Exact rational number used by the exact arithmetic mode.
pub type Rational = num_rational::BigRational;

/// Absolute tolerance used by the float arithmetic mode.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

/// Arithmetic mode tag, echoed in reports next to every number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    Exact,
    Float,
}

impl Display for Arithmetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arithmetic::Exact => f.write_str("exact"),
            Arithmetic::Float => f.write_str("float"),
        }
    }
}

impl FromStr for Arithmetic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Arithmetic::Exact),
            "float" => Ok(Arithmetic::Float),
            other => Err(Error::Parse(format!("unknown arithmetic mode `{other}`"))),
        }
    }
}

pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const MODE: Arithmetic;

    fn from_rational(r: &Rational) -> Self;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        Self::from_rational(&Rational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }

    fn to_f64(&self) -> f64;

    /// Strictly positive beyond the backend's tolerance.
    fn is_pos(&self) -> bool;

    /// Strictly negative beyond the backend's tolerance.
    fn is_neg(&self) -> bool;

    fn approx_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).approx_zero()
    }

    /// `self <= other` up to tolerance.
    fn le_tol(&self, other: &Self) -> bool {
        !(self.clone() - other.clone()).is_pos()
    }

    /// Report encoding: `"a/b"` for exact values, shortest round-trip decimal for floats.
    fn encode(&self) -> String;

    /// Draws `true` with probability `prob` (which must lie in `[0, 1]`).
    fn bernoulli<R: Rng + ?Sized>(prob: &Self, rng: &mut R) -> bool;

    /// Draws an index `k` with probability `weights[k]`, or `None` with the
    /// residual probability `1 - sum(weights)`.
    fn sample_index<R: Rng + ?Sized>(weights: &[Self], rng: &mut R) -> Option<usize>;

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for Rational {
    const MODE: Arithmetic = Arithmetic::Exact;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_pos(&self) -> bool {
        self.is_positive()
    }

    fn is_neg(&self) -> bool {
        self.is_negative()
    }

    fn encode(&self) -> String {
        format_rational(self)
    }

    fn bernoulli<R: Rng + ?Sized>(prob: &Self, rng: &mut R) -> bool {
        if !prob.is_positive() {
            return false;
        }
        let denom = prob.denom().to_biguint().expect("positive denominator");
        let numer = prob.numer().to_biguint().expect("positive numerator");
        rng.gen_biguint_below(&denom) < numer
    }

    fn sample_index<R: Rng + ?Sized>(weights: &[Self], rng: &mut R) -> Option<usize> {
        // Common denominator, then one exact uniform draw below it.
        let lcm = weights
            .iter()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let scaled: Vec<BigInt> = weights
            .iter()
            .map(|w| w.numer() * (&lcm / w.denom()))
            .collect();
        let bound: BigUint = lcm.to_biguint().expect("positive lcm");
        let draw = BigInt::from(rng.gen_biguint_below(&bound));
        let mut acc = BigInt::zero();
        for (k, s) in scaled.iter().enumerate() {
            acc += s;
            if draw < acc {
                return Some(k);
            }
        }
        None
    }
}

impl Scalar for f64 {
    const MODE: Arithmetic = Arithmetic::Float;

    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_pos(&self) -> bool {
        *self > FLOAT_TOLERANCE
    }

    fn is_neg(&self) -> bool {
        *self < -FLOAT_TOLERANCE
    }

    fn encode(&self) -> String {
        format!("{self}")
    }

    fn bernoulli<R: Rng + ?Sized>(prob: &Self, rng: &mut R) -> bool {
        rng.gen::<f64>() < *prob
    }

    fn sample_index<R: Rng + ?Sized>(weights: &[Self], rng: &mut R) -> Option<usize> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return Some(k);
            }
        }
        None
    }
}

/// Formats a rational as `"numerator/denominator"` (always with a denominator).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `"a/b"`, `"a"` or a finite decimal such as `"0.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_part: BigInt = match int {
            "" | "-" | "+" => BigInt::zero(),
            _ => int.parse().map_err(|_| bad())?,
        };
        let frac_part: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mut value = Rational::from_integer(int_part.abs())
            + Rational::new(frac_part, scale);
        if negative {
            value = -value;
        }
        return Ok(value);
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// `base^exp` for any scalar.
pub fn pow<T: Scalar>(base: &T, exp: usize) -> T {
    let mut out = T::one();
    for _ in 0..exp {
        out = out * base.clone();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_rational_forms() {
        assert_eq!(parse_rational("3/6").unwrap(), rational(1, 2));
        assert_eq!(parse_rational("7").unwrap(), rational(7, 1));
        assert_eq!(parse_rational("0.25").unwrap(), rational(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), rational(-3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.").is_err());
    }

    #[test]
    fn formats_with_denominator() {
        assert_eq!(format_rational(&rational(4, 1)), "4/1");
        assert_eq!(format_rational(&rational(-2, 6)), "-1/3");
    }

    #[test]
    fn exact_sampling_respects_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let weights = vec![rational(1, 3), rational(1, 6)];
        let mut counts = [0usize; 3];
        let trials = 30_000;
        for _ in 0..trials {
            match Rational::sample_index(&weights, &mut rng) {
                Some(k) => counts[k] += 1,
                None => counts[2] += 1,
            }
        }
        let expect = [1.0 / 3.0, 1.0 / 6.0, 0.5];
        for (c, e) in counts.iter().zip(expect) {
            let freq = *c as f64 / trials as f64;
            let sigma = (e * (1.0 - e) / trials as f64).sqrt();
            assert!((freq - e).abs() < 4.0 * sigma, "{freq} vs {e}");
        }
    }

    #[test]
    fn bernoulli_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(Rational::bernoulli(&Rational::one(), &mut rng));
            assert!(!Rational::bernoulli(&Rational::zero(), &mut rng));
        }
    }
}
