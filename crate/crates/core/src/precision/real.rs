//! Binary floating-point numbers with an explicit mantissa width.
//!
//! A [`RealHp`] is `mant * 2^exp` with `|mant|` holding exactly `prec` bits
//! (or zero). Every operation is computed exactly on big integers and then
//! rounded once, to nearest with ties to even, so results are correctly
//! rounded at the target precision.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::BigRational;

#[derive(Clone, Debug)]
pub struct RealHp {
    mant: BigInt,
    exp: i64,
    prec: u32,
}

/// Rounds `mant * 2^exp` to `prec` bits. `sticky` marks a nonzero remainder
/// below `mant`; callers passing `sticky = true` supply at least `prec + 2`
/// bits of mantissa.
fn round_parts(mant: BigInt, exp: i64, prec: u32, sticky: bool) -> RealHp {
    assert!(prec >= 2, "precision must be at least 2 bits");
    let (sign, mag) = mant.into_parts();
    if mag.is_zero() {
        return RealHp::zero(prec);
    }
    let len = mag.bits();
    let prec64 = u64::from(prec);
    if len <= prec64 {
        debug_assert!(!sticky, "inexact input with too few bits");
        let shift = prec64 - len;
        return RealHp {
            mant: BigInt::from_biguint(sign, mag << shift),
            exp: exp - shift as i64,
            prec,
        };
    }
    let shift = len - prec64;
    let mut q: BigUint = &mag >> shift;
    let half = mag.bit(shift - 1);
    let rest = sticky || mag.trailing_zeros().is_some_and(|tz| tz < shift - 1);
    if half && (rest || q.bit(0)) {
        q += 1u32;
    }
    let mut e = exp + shift as i64;
    if q.bits() > prec64 {
        q >>= 1;
        e += 1;
    }
    RealHp {
        mant: BigInt::from_biguint(sign, q),
        exp: e,
        prec,
    }
}

/// Correctly rounded `num / den * 2^exp2`.
fn round_ratio(num: &BigInt, den: &BigUint, exp2: i64, prec: u32) -> RealHp {
    assert!(!den.is_zero(), "division by zero");
    if num.is_zero() {
        return RealHp::zero(prec);
    }
    let sign = num.sign();
    let mag = num.magnitude();
    // Quotient gets at least prec + 2 bits.
    let s = i64::from(prec) + 3 + den.bits() as i64 - mag.bits() as i64;
    let (q, r) = if s >= 0 {
        (mag << (s as u64)).div_rem(den)
    } else {
        mag.div_rem(&(den << ((-s) as u64)))
    };
    round_parts(BigInt::from_biguint(sign, q), exp2 - s, prec, !r.is_zero())
}

impl RealHp {
    pub fn zero(prec: u32) -> Self {
        RealHp {
            mant: BigInt::zero(),
            exp: 0,
            prec,
        }
    }

    pub fn one(prec: u32) -> Self {
        Self::from_int(&BigInt::one(), prec)
    }

    pub fn from_int(n: &BigInt, prec: u32) -> Self {
        round_parts(n.clone(), 0, prec, false)
    }

    pub fn from_i64(n: i64, prec: u32) -> Self {
        Self::from_int(&BigInt::from(n), prec)
    }

    /// Correctly rounded conversion of an exact rational.
    pub fn from_rational(q: &BigRational, prec: u32) -> Self {
        let den = q.denom().magnitude();
        round_ratio(q.numer(), den, 0, prec)
    }

    /// `m * 2^e` rounded to `prec` bits.
    pub fn from_parts(m: BigInt, e: i64, prec: u32) -> Self {
        round_parts(m, e, prec, false)
    }

    /// `num / den * 2^exp2` rounded to `prec` bits.
    pub fn from_ratio_pow2(num: &BigInt, den: &BigUint, exp2: i64, prec: u32) -> Self {
        round_ratio(num, den, exp2, prec)
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mant
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    /// Exponent `e` with `2^(e-1) <= |self| < 2^e`; `None` for zero.
    pub fn top_exponent(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exp + self.mant.bits() as i64)
        }
    }

    pub fn round_to(&self, prec: u32) -> Self {
        round_parts(self.mant.clone(), self.exp, prec, false)
    }

    pub fn abs(&self) -> Self {
        RealHp {
            mant: self.mant.abs(),
            exp: self.exp,
            prec: self.prec,
        }
    }

    /// Exact multiplication by `2^k`.
    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        RealHp {
            mant: self.mant.clone(),
            exp: self.exp + k,
            prec: self.prec,
        }
    }

    pub fn add(&self, other: &RealHp) -> RealHp {
        let prec = self.prec.max(other.prec);
        let (big, small) = match (self.top_exponent(), other.top_exponent()) {
            (None, _) => return other.round_to(prec),
            (_, None) => return self.round_to(prec),
            (Some(a), Some(b)) if a >= b => (self, other),
            _ => (other, self),
        };
        let gap = big.top_exponent().unwrap() - small.top_exponent().unwrap();
        if gap > i64::from(prec) + 3 {
            // |small| is below an eighth of the result ulp and cannot move the rounding.
            return big.round_to(prec);
        }
        let e = big.exp.min(small.exp);
        let m = (&big.mant << ((big.exp - e) as u64)) + (&small.mant << ((small.exp - e) as u64));
        round_parts(m, e, prec, false)
    }

    pub fn sub(&self, other: &RealHp) -> RealHp {
        self.add(&-other)
    }

    pub fn mul(&self, other: &RealHp) -> RealHp {
        let prec = self.prec.max(other.prec);
        round_parts(&self.mant * &other.mant, self.exp + other.exp, prec, false)
    }

    pub fn div(&self, other: &RealHp) -> RealHp {
        assert!(!other.is_zero(), "RealHp division by zero");
        let prec = self.prec.max(other.prec);
        let num = if other.is_negative() { -&self.mant } else { self.mant.clone() };
        round_ratio(&num, other.mant.magnitude(), self.exp - other.exp, prec)
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, k: u32) -> RealHp {
        let mut acc = RealHp::one(self.prec);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// `self * q`, rounded once.
    pub fn mul_rational(&self, q: &BigRational) -> RealHp {
        round_ratio(&(&self.mant * q.numer()), q.denom().magnitude(), self.exp, self.prec)
    }

    /// `self / q`, rounded once.
    pub fn div_rational(&self, q: &BigRational) -> RealHp {
        assert!(!q.is_zero(), "RealHp division by zero");
        let mut num = &self.mant * q.denom();
        if q.is_negative() {
            num = -num;
        }
        round_ratio(&num, q.numer().magnitude(), self.exp, self.prec)
    }

    /// Exact value.
    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.mant << (self.exp as u64))
        } else {
            BigRational::new(self.mant.clone(), BigInt::one() << ((-self.exp) as u64))
        }
    }

    /// Exact floor.
    pub fn floor(&self) -> BigInt {
        if self.exp >= 0 {
            &self.mant << (self.exp as u64)
        } else {
            // Arithmetic shift rounds toward negative infinity.
            &self.mant >> ((-self.exp) as u64)
        }
    }

    /// `self - floor(self)` in `[0, 1)`, exact.
    pub fn fract(&self) -> RealHp {
        if self.exp >= 0 {
            return RealHp::zero(self.prec);
        }
        let one_scaled = BigInt::one() << ((-self.exp) as u64);
        let m = self.mant.mod_floor(&one_scaled);
        round_parts(m, self.exp, self.prec, false)
    }

    pub fn to_f64(&self) -> f64 {
        match self.top_exponent() {
            None => 0.0,
            Some(_) => {
                let r = self.round_to(53);
                let m = r.mant.to_f64().unwrap_or(f64::NAN);
                // Split the scaling to stay clear of intermediate overflow.
                let e = r.exp.clamp(-2200, 2200) as i32;
                m * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
            }
        }
    }

    /// Relative unit `2^(-prec)`, as a value at this precision.
    pub fn epsilon(prec: u32) -> RealHp {
        RealHp {
            mant: BigInt::one() << (u64::from(prec) - 1),
            exp: -(2 * i64::from(prec) - 1),
            prec,
        }
    }

    pub fn max(self, other: RealHp) -> RealHp {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl PartialEq for RealHp {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RealHp {}

impl PartialOrd for RealHp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RealHp {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.mant.sign(), other.mant.sign()) {
            (a, b) if a != b => {
                let rank = |s: Sign| match s {
                    Sign::Minus => 0,
                    Sign::NoSign => 1,
                    Sign::Plus => 2,
                };
                rank(a).cmp(&rank(b))
            }
            (Sign::NoSign, _) => Ordering::Equal,
            _ => {
                let e = self.exp.min(other.exp);
                let a = &self.mant << ((self.exp - e) as u64);
                let b = &other.mant << ((other.exp - e) as u64);
                a.cmp(&b)
            }
        }
    }
}

impl PartialEq<BigRational> for RealHp {
    fn eq(&self, other: &BigRational) -> bool {
        self.to_rational() == *other
    }
}

impl std::ops::Neg for &RealHp {
    type Output = RealHp;
    fn neg(self) -> RealHp {
        RealHp {
            mant: -&self.mant,
            exp: self.exp,
            prec: self.prec,
        }
    }
}

impl std::ops::Neg for RealHp {
    type Output = RealHp;
    fn neg(self) -> RealHp {
        -&self
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $inner:ident) => {
        impl std::ops::$tr<&RealHp> for &RealHp {
            type Output = RealHp;
            fn $method(self, rhs: &RealHp) -> RealHp {
                RealHp::$inner(self, rhs)
            }
        }
        impl std::ops::$tr<RealHp> for RealHp {
            type Output = RealHp;
            fn $method(self, rhs: RealHp) -> RealHp {
                RealHp::$inner(&self, &rhs)
            }
        }
        impl std::ops::$tr<&RealHp> for RealHp {
            type Output = RealHp;
            fn $method(self, rhs: &RealHp) -> RealHp {
                RealHp::$inner(&self, rhs)
            }
        }
    };
}

forward_binop!(Add, add, add);
forward_binop!(Sub, sub, sub);
forward_binop!(Mul, mul, mul);
forward_binop!(Div, div, div);

impl fmt::Display for RealHp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(30);
        f.write_str(&super::format_sig(&self.to_rational(), digits))
    }
}
