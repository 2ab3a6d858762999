//! Exact rationals, exact phase reduction and turn-based trigonometry.
//!
//! Every phase is reduced modulo one while still an exact rational; only the
//! reduced value is handed to the floating-point kernels. Times near
//! `1/lambda` with `lambda ~ 1e-96` are therefore no harder than times near 1.

mod real;
mod trig;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Pow, Signed, Zero};

pub use num_rational::BigRational;
pub use real::RealHp;
pub use trig::{cos_turns, pi, sin_turns, sincos_turns, sincos_turns_real, two_pi, GUARD_BITS};

use crate::error::{Error, Result};

pub const DEFAULT_BITS: u32 = 512;
pub const DEFAULT_M_MAX: usize = 3;

/// Numeric configuration shared by every stage of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrecisionPolicy {
    /// Mantissa bits of every reported real.
    pub bits: u32,
    /// Liouville truncation order `K`.
    pub truncation: usize,
    /// Largest mode index `M_max`.
    pub m_max: usize,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy {
            bits: DEFAULT_BITS,
            truncation: DEFAULT_M_MAX + 2,
            m_max: DEFAULT_M_MAX,
        }
    }
}

impl PrecisionPolicy {
    pub fn new(bits: u32, truncation: usize, m_max: usize) -> Result<Self> {
        let p = PrecisionPolicy {
            bits,
            truncation,
            m_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits < 16 {
            return Err(Error::Precondition(format!("bits = {} is below 16", self.bits)));
        }
        if self.truncation < self.m_max + 1 {
            return Err(Error::Precondition(format!(
                "truncation order K = {} must be at least M + 1 = {}",
                self.truncation,
                self.m_max + 1
            )));
        }
        Ok(())
    }
}

/// The representative of `x` modulo one in `[0, 1)`, exact.
pub fn reduce_phase(x: &BigRational) -> BigRational {
    x - x.floor()
}

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub fn pow_int(base: u64, exp: u64) -> BigInt {
    Pow::pow(BigInt::from(base), exp)
}

/// `base^(-exp)` as an exact rational.
pub fn inv_pow(base: &BigInt, exp: u64) -> BigRational {
    BigRational::new(BigInt::one(), Pow::pow(base.clone(), exp))
}

/// Renders an exact rational as `"num/den"`.
pub fn rational_string(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parses `"num/den"`, an integer, or a decimal literal such as `-2.5e-3`.
/// Decimal literals are read exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational literal: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("0{int_part}{frac_part}").parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let mut q = if scale >= 0 {
        BigRational::from_integer(digits * Pow::pow(&ten, scale as u64))
    } else {
        BigRational::new(digits, Pow::pow(&ten, (-scale) as u64))
    };
    if neg {
        q = -q;
    }
    Ok(q)
}

/// `floor(log10(a))` for a positive rational.
fn decimal_exponent(a: &BigRational) -> i64 {
    let est = ((a.numer().bits() as f64 - a.denom().bits() as f64) * std::f64::consts::LOG10_2).floor() as i64;
    let ten = BigRational::from_integer(10.into());
    let pow = |e: i64| -> BigRational {
        if e >= 0 {
            Pow::pow(&ten, e as u64)
        } else {
            Pow::pow(&ten, (-e) as u64).recip()
        }
    };
    let mut e = est;
    while pow(e) > *a {
        e -= 1;
    }
    while pow(e + 1) <= *a {
        e += 1;
    }
    e
}

/// Scientific notation with `digits` significant digits, correctly rounded
/// (ties to even). Zero renders as `"0"`.
pub fn format_sig(q: &BigRational, digits: usize) -> String {
    let digits = digits.max(1);
    if q.is_zero() {
        return "0".to_string();
    }
    let a = q.abs();
    let mut e = decimal_exponent(&a);
    let shift = digits as i64 - 1 - e;
    let ten = BigInt::from(10);
    let scaled = if shift >= 0 {
        &a * BigRational::from_integer(Pow::pow(&ten, shift as u64))
    } else {
        &a / BigRational::from_integer(Pow::pow(&ten, (-shift) as u64))
    };
    let (fl, rem) = scaled.numer().div_rem(scaled.denom());
    let twice = rem * 2u32;
    let mut n = match twice.cmp(scaled.denom()) {
        std::cmp::Ordering::Greater => fl + 1u32,
        std::cmp::Ordering::Equal if fl.is_odd() => fl + 1u32,
        _ => fl,
    };
    if n == Pow::pow(&ten, digits as u64) {
        n /= 10u32;
        e += 1;
    }
    let s = n.to_string();
    let sign = if q.is_negative() { "-" } else { "" };
    if digits == 1 {
        format!("{sign}{s}e{e}")
    } else {
        format!("{sign}{}.{}e{e}", &s[..1], &s[1..])
    }
}

/// True when `x` is an integer.
pub fn is_integer(x: &BigRational) -> bool {
    x.denom().is_one()
}
