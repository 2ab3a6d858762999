//! Sine and cosine of angles given in turns (`sin(2*pi*phase)`).
//!
//! Quadrant symmetry and the reflection `f -> 1/4 - f` are applied to the
//! exact phase, so only arguments in `[0, 1/8]` reach the kernel. The kernel
//! works in fixed point: the argument is halved eight times, both Taylor
//! series are summed until the next term vanishes at the working scale, and
//! the double-angle formulas undo the halving.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{BigRational, RealHp};
use crate::error::{Error, Result};

/// Bits kept above the requested precision inside the kernel.
pub const GUARD_BITS: u32 = 32;

const HALVINGS: u32 = 8;
const PI_CACHE_BITS: u64 = 8192;

/// `floor(atan(1/x) * 2^bits)` up to a few units.
fn atan_inv_fixed(x: u32, bits: u64) -> BigInt {
    let one = BigInt::one() << bits;
    let x2 = BigInt::from(x) * BigInt::from(x);
    let mut power = one / BigInt::from(x);
    let mut sum = BigInt::zero();
    let mut k: u64 = 0;
    while !power.is_zero() {
        let term = &power / BigInt::from(2 * k + 1);
        if k.is_multiple_of(2) {
            sum += term;
        } else {
            sum -= term;
        }
        power /= &x2;
        k += 1;
    }
    sum
}

fn machin_pi(bits: u64) -> BigUint {
    let guard = 32;
    let w = bits + guard;
    let pi = BigInt::from(16) * atan_inv_fixed(5, w) - BigInt::from(4) * atan_inv_fixed(239, w);
    (pi >> guard).to_biguint().expect("pi is positive")
}

/// `pi * 2^bits`, truncated, with error below two units.
pub fn pi_fixed(bits: u64) -> BigUint {
    static CACHE: OnceLock<BigUint> = OnceLock::new();
    if bits <= PI_CACHE_BITS {
        let cached = CACHE.get_or_init(|| machin_pi(PI_CACHE_BITS));
        cached >> (PI_CACHE_BITS - bits)
    } else {
        machin_pi(bits)
    }
}

pub fn pi(prec: u32) -> RealHp {
    let bits = u64::from(prec) + 8;
    RealHp::from_parts(BigInt::from(pi_fixed(bits)), -(bits as i64), prec)
}

pub fn two_pi(prec: u32) -> RealHp {
    pi(prec).mul_pow2(1)
}

/// An angle in turns, `num / den * 2^exp2`, inside `[0, 1/8]`.
struct Turns {
    num: BigInt,
    den: BigUint,
    exp2: i64,
}

impl Turns {
    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Number of leading zero bits below the binary point; `|f| < 2^-z`.
    fn leading_zeros(&self) -> u64 {
        let top = self.num.bits() as i64 - self.den.bits() as i64 + 1 + self.exp2;
        (-top).max(0) as u64
    }
}

/// `(sin(2 pi f), cos(2 pi f))` for `f` in `[0, 1/8]`, at `wp` bits.
fn sincos_kernel(f: &Turns, wp: u32) -> (RealHp, RealHp) {
    if f.is_zero() {
        return (RealHp::zero(wp), RealHp::one(wp));
    }
    let z = f.leading_zeros();
    let w = u64::from(wp) + z + u64::from(HALVINGS) + 16;
    let pi = BigInt::from(pi_fixed(w + 8));
    // x = 2 pi f at scale 2^w, i.e. (2 pi num / den) * 2^(exp2 - 8)
    let scaled = (pi * &f.num) << 1u32;
    let shift = f.exp2 - 8;
    let x = if shift >= 0 {
        (scaled << (shift as u64)) / BigInt::from(f.den.clone())
    } else {
        let den = BigInt::from(f.den.clone() << ((-shift) as u64));
        scaled.div_floor(&den)
    };
    let y = x >> HALVINGS;
    let one = BigInt::one() << w;
    let y2 = (&y * &y) >> w;

    let mut sin = y.clone();
    let mut term = y;
    let mut k: u64 = 1;
    loop {
        term = ((term * &y2) >> w) / BigInt::from((2 * k) * (2 * k + 1));
        if term.is_zero() {
            break;
        }
        if k % 2 == 1 {
            sin -= &term;
        } else {
            sin += &term;
        }
        k += 1;
    }

    let mut cos = one.clone();
    let mut term = one.clone();
    let mut k: u64 = 1;
    loop {
        term = ((term * &y2) >> w) / BigInt::from((2 * k - 1) * (2 * k));
        if term.is_zero() {
            break;
        }
        if k % 2 == 1 {
            cos -= &term;
        } else {
            cos += &term;
        }
        k += 1;
    }

    for _ in 0..HALVINGS {
        let s2 = (&sin * &cos) >> (w - 1);
        let c2 = (&cos * &cos - &sin * &sin) >> w;
        sin = s2;
        cos = c2;
    }

    let e = -(w as i64);
    (RealHp::from_parts(sin, e, wp), RealHp::from_parts(cos, e, wp))
}

/// Folds a phase already split into quadrant `q` and offset `f` in
/// `[0, 1/4)` into `(sin, cos)` of the full phase.
fn assemble(q: u8, f_small: (RealHp, RealHp), bits: u32) -> (RealHp, RealHp) {
    let (s, c) = f_small;
    let (s, c) = match q {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    };
    (s.round_to(bits), c.round_to(bits))
}

fn check_phase(phase: &BigRational) -> Result<()> {
    if phase.is_negative() || *phase >= BigRational::one() {
        return Err(Error::Domain(format!("phase {phase} outside [0, 1)")));
    }
    Ok(())
}

/// `(sin(2 pi phase), cos(2 pi phase))` for an exact phase in `[0, 1)`.
pub fn sincos_turns(phase: &BigRational, bits: u32) -> Result<(RealHp, RealHp)> {
    check_phase(phase)?;
    let wp = bits + GUARD_BITS;
    let four = BigRational::from_integer(4.into());
    let quarter = BigRational::new(1.into(), 4.into());
    let eighth = BigRational::new(1.into(), 8.into());
    let q4 = (phase * &four).floor();
    let q = q4.to_integer().to_u8().expect("quadrant in 0..4");
    let f = phase - q4 / &four;
    let reflect = f > eighth;
    let g = if reflect { &quarter - &f } else { f };
    let turns = Turns {
        num: g.numer().clone(),
        den: g.denom().magnitude().clone(),
        exp2: 0,
    };
    let (s, c) = sincos_kernel(&turns, wp);
    let pair = if reflect { (c, s) } else { (s, c) };
    Ok(assemble(q, pair, bits))
}

pub fn sin_turns(phase: &BigRational, bits: u32) -> Result<RealHp> {
    sincos_turns(phase, bits).map(|(s, _)| s)
}

pub fn cos_turns(phase: &BigRational, bits: u32) -> Result<RealHp> {
    sincos_turns(phase, bits).map(|(_, c)| c)
}

/// `(sin(2 pi x), cos(2 pi x))` for any binary float `x`; the integer part
/// is removed exactly.
pub fn sincos_turns_real(x: &RealHp, bits: u32) -> (RealHp, RealHp) {
    let wp = bits.max(x.precision()) + GUARD_BITS;
    let frac = x.round_to(wp.max(x.precision())).fract();
    let scaled = frac.mul_pow2(2);
    let q = scaled.floor().to_u8().expect("quadrant in 0..4");
    let f = (&scaled - &RealHp::from_i64(i64::from(q), scaled.precision())).mul_pow2(-2);
    let eighth = RealHp::from_rational(&BigRational::new(1.into(), 8.into()), wp);
    let reflect = f > eighth;
    let g = if reflect {
        let quarter = RealHp::from_rational(&BigRational::new(1.into(), 4.into()), f.precision());
        &quarter - &f
    } else {
        f
    };
    let turns = Turns {
        num: g.mantissa().clone(),
        den: BigUint::one(),
        exp2: g.exponent(),
    };
    let (s, c) = sincos_kernel(&turns, wp);
    let pair = if reflect { (c, s) } else { (s, c) };
    assemble(q, pair, bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    /// Plain Taylor series at a very high fixed-point scale, no halving and
    /// no symmetry: an independent route to sin(2 pi f).
    fn sin_oracle(f: &BigRational, bits: u64) -> BigRational {
        let w = bits + 64;
        let pi = BigInt::from(pi_fixed(w + 16));
        let x = ((pi * f.numer()) << 1u32) / (f.denom() << 16u32);
        let x2 = (&x * &x) >> w;
        let mut term = x.clone();
        let mut sum = x;
        let mut k: u64 = 1;
        while !term.is_zero() {
            term = ((term * &x2) >> w) / BigInt::from((2 * k) * (2 * k + 1));
            if k % 2 == 1 {
                sum -= &term;
            } else {
                sum += &term;
            }
            k += 1;
        }
        BigRational::new(sum, BigInt::one() << w)
    }

    #[test]
    fn pi_digits() {
        let p = pi(200);
        let s = format!("{p:.40}");
        assert!(s.starts_with("3.141592653589793238462643383279502884197"), "{s}");
    }

    #[test]
    fn exact_quarter_points() {
        for bits in [64, 512] {
            assert!(sin_turns(&q(0, 1), bits).unwrap().is_zero());
            assert_eq!(cos_turns(&q(0, 1), bits).unwrap(), RealHp::one(bits));
            assert_eq!(sin_turns(&q(1, 4), bits).unwrap(), RealHp::one(bits));
            assert!(cos_turns(&q(1, 4), bits).unwrap().is_zero());
            assert_eq!(cos_turns(&q(1, 2), bits).unwrap(), RealHp::from_i64(-1, bits));
            assert_eq!(sin_turns(&q(3, 4), bits).unwrap(), RealHp::from_i64(-1, bits));
        }
    }

    #[test]
    fn sixths_and_twelfths() {
        let bits = 512;
        let tol = RealHp::epsilon(bits).mul_pow2(1);
        let half = RealHp::from_rational(&q(1, 2), bits);
        let s = sin_turns(&q(1, 12), bits).unwrap();
        assert!((&s - &half).abs() <= tol);
        let c = cos_turns(&q(1, 6), bits).unwrap();
        assert!((&c - &half).abs() <= tol);
        let c = cos_turns(&q(1, 3), bits).unwrap();
        assert!((&c + &half).abs() <= tol);
    }

    #[test]
    fn matches_series_oracle() {
        let bits = 256;
        let tol = RealHp::epsilon(bits).mul_pow2(1);
        for (n, d) in [(1, 7), (3, 29), (5, 11), (99, 100), (1, 1_000_000_007), (13, 64)] {
            let f = q(n, d);
            let got = sin_turns(&f, bits).unwrap();
            let want = RealHp::from_rational(&sin_oracle(&f, 600), 600);
            let err = (&got - &want).abs();
            assert!(err <= tol.clone().max(tol.mul_rational(&got.abs().to_rational())), "{f}: {err}");
        }
    }

    #[test]
    fn tiny_phase_keeps_relative_precision() {
        let bits = 512;
        let f = BigRational::new(1.into(), BigInt::from(10).pow(96));
        let got = sin_turns(&f, bits).unwrap();
        let want = RealHp::from_rational(&sin_oracle(&f, 1200), 1200);
        let rel = ((&got - &want) / &want).abs();
        assert!(rel <= RealHp::epsilon(bits).mul_pow2(1), "{rel}");
    }

    #[test]
    fn rejects_out_of_range_phase() {
        assert!(sin_turns(&q(1, 1), 64).is_err());
        assert!(cos_turns(&q(-1, 3), 64).is_err());
    }

    #[test]
    fn real_phase_agrees_with_rational_phase() {
        let bits = 200;
        for (n, d) in [(1, 3), (7, 5), (-9, 8), (123457, 1024), (-1, 1 << 20)] {
            let x = q(n, d);
            let xr = RealHp::from_rational(&x, bits);
            let exact = super::super::reduce_phase(&xr.to_rational());
            let (s1, c1) = sincos_turns(&exact, bits).unwrap();
            let (s2, c2) = sincos_turns_real(&xr, bits);
            let tol = RealHp::epsilon(bits).mul_pow2(2);
            assert!((&s1 - &s2).abs() <= tol);
            assert!((&c1 - &c2).abs() <= tol);
        }
    }
}
