//! The vector field `h(z) = (r, 1, sum_m a_m cos(2 pi (z1 p_m - z2 q_m)))`
//! truncated to the modes of a verified chain, plus the finite-order
//! derivative majorants and the certified series tail.

use num_bigint::BigInt;
use num_traits::{Pow, Signed, Zero};

use crate::error::{Error, Result};
use crate::liouville::{build_resonant_sequence, liouville_truncation, verify_chain, LiouvilleSpec, ResonantMode};
use crate::precision::{
    cos_turns, format_sig, reduce_phase, sincos_turns, sincos_turns_real, two_pi, BigRational, RealHp,
};

/// `h` restricted to modes `1..=M`, with the exact truncation `r_K` as first component.
#[derive(Clone, Debug)]
pub struct TruncatedField {
    pub spec: LiouvilleSpec,
    pub r_k: BigRational,
    pub modes: Vec<ResonantMode>,
    pub bits: u32,
}

impl TruncatedField {
    /// Builds and verifies the `M`-mode chain. `M = 0` gives the constant field `(r_K, 1, 0)`.
    pub fn build(spec: &LiouvilleSpec, m_count: usize, bits: u32) -> Result<Self> {
        spec.validate()?;
        let modes = if m_count == 0 {
            Vec::new()
        } else {
            build_resonant_sequence(spec, m_count)?
        };
        Self::from_modes(spec, modes, bits)
    }

    pub fn from_modes(spec: &LiouvilleSpec, modes: Vec<ResonantMode>, bits: u32) -> Result<Self> {
        if !modes.is_empty() {
            let report = verify_chain(&modes, spec);
            let first_failure = report.failures().next().cloned();
            if let Some(bad) = first_failure {
                return Err(Error::Precondition(format!(
                    "chain fails `{}` at m = {:?}",
                    bad.name, bad.m
                )));
            }
        }
        Ok(TruncatedField {
            spec: spec.clone(),
            r_k: liouville_truncation(spec),
            modes,
            bits,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// `sum_m a_m`, the sup norm of the third component.
    pub fn amplitude_sum(&self) -> BigRational {
        self.modes.iter().fold(BigRational::zero(), |acc, md| acc + &md.amplitude)
    }

    /// Mode phase `z1 p - z2 q` reduced modulo one.
    pub fn phase(mode: &ResonantMode, z1: &BigRational, z2: &BigRational) -> BigRational {
        reduce_phase(&(z1 * BigRational::from_integer(mode.p.clone()) - z2 * BigRational::from_integer(mode.q.clone())))
    }

    /// `h(z)`; `z3` is ignored.
    pub fn eval(&self, z: &[BigRational; 3]) -> [RealHp; 3] {
        let mut third = RealHp::zero(self.bits);
        for md in &self.modes {
            let c = cos_turns(&Self::phase(md, &z[0], &z[1]), self.bits).expect("reduced phase");
            third = &third + &c.mul_rational(&md.amplitude);
        }
        [
            RealHp::from_rational(&self.r_k, self.bits),
            RealHp::one(self.bits),
            third,
        ]
    }

    /// Third component at a floating point `(z1, z2)`, for the integrator.
    pub fn eval_third_real(&self, z1: &RealHp, z2: &RealHp) -> RealHp {
        let mut third = RealHp::zero(self.bits);
        for md in &self.modes {
            let prec = z1.precision().max(self.bits);
            let arg = z1.mul(&RealHp::from_int(&md.p, prec)) - z2.mul(&RealHp::from_int(&md.q, prec));
            let (_, c) = sincos_turns_real(&arg, self.bits);
            third = &third + &c.mul_rational(&md.amplitude);
        }
        third
    }

    /// Analytic partial derivatives of the third component along `z1` and `z2`.
    pub fn third_gradient(&self, z1: &BigRational, z2: &BigRational) -> [RealHp; 2] {
        let tau = two_pi(self.bits);
        let mut d1 = RealHp::zero(self.bits);
        let mut d2 = RealHp::zero(self.bits);
        for md in &self.modes {
            let (s, _) = sincos_turns(&Self::phase(md, z1, z2), self.bits).expect("reduced phase");
            let scaled = s.mul_rational(&md.amplitude).mul(&tau);
            d1 = &d1 - &scaled.mul_rational(&BigRational::from_integer(md.p.clone()));
            d2 = &d2 + &scaled.mul_rational(&BigRational::from_integer(md.q.clone()));
        }
        [d1, d2]
    }

    /// Finite-order majorant of the `C^k` norm of the third component.
    pub fn smoothness_bound(&self, k: u32) -> SmoothnessBound {
        let mut majorant = BigRational::zero();
        let mut large_m = BigRational::zero();
        let mut geometric = BigRational::zero();
        for md in &self.modes {
            let top = md.p.clone().max(md.q.abs());
            let term = BigRational::from_integer(Pow::pow(top, k)) * &md.amplitude;
            if md.m >= k as usize {
                large_m += &term;
                geometric += BigRational::new(BigInt::from(md.m), Pow::pow(BigInt::from(2), md.m as u64));
            }
            majorant += term;
        }
        let scale = Pow::pow(BigRational::from_integer(2.into()) * (self.r_k.abs() + BigInt::from(1)), k);
        let comparison = scale * geometric;
        let tau_k = two_pi(self.bits + 16).powi(k);
        SmoothnessBound {
            k,
            majorant_rational: majorant.clone(),
            majorant: tau_k.mul_rational(&majorant).round_to(self.bits),
            comparison_holds: large_m <= comparison,
            large_m_terms: large_m,
            comparison,
        }
    }

    /// Bound on the omitted modes `sum_{m > M} m p_m^(-m)`, valid when the chain
    /// follows the family `p_m = base^((m+1)!)`.
    pub fn tail_bound(&self) -> Result<BigRational> {
        for md in &self.modes {
            if md.p != self.spec.candidate(md.m + 1) {
                return Err(Error::Precondition(format!(
                    "mode {} has p = {} outside the family base^((m+1)!)",
                    md.m, md.p
                )));
            }
        }
        Ok(tail_bound_for(self.spec.base, self.mode_count()))
    }

    /// CSV rows `z1,z2,z3,h1,h2,h3` at 30 significant digits.
    pub fn samples_csv(&self, points: &[[BigRational; 3]]) -> String {
        let mut out = String::from("z1,z2,z3,h1,h2,h3\n");
        for z in points {
            let h = self.eval(z);
            let cols: Vec<String> = z
                .iter()
                .map(|v| format_sig(v, 30))
                .chain(h.iter().map(|v| format!("{v:.30}")))
                .collect();
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SmoothnessBound {
    pub k: u32,
    /// `sum_m m max(p_m, q_m)^k p_m^(-m)`, without the `(2 pi)^k` factor.
    pub majorant_rational: BigRational,
    /// `(2 pi)^k` times the rational part.
    pub majorant: RealHp,
    /// The rational part restricted to `m >= k`.
    pub large_m_terms: BigRational,
    /// `2^k (|r| + 1)^k sum_{k <= m <= M} m 2^(-m)`.
    pub comparison: BigRational,
    pub comparison_holds: bool,
}

/// `2 (M+1) base^(-(M+1)(M+2)!)`: the first omitted term doubled. Successive
/// terms of `m base^(-m (m+1)!)` shrink by far more than half.
pub fn tail_bound_for(base: u64, m_count: usize) -> BigRational {
    let m1 = m_count as u64 + 1;
    let fact: u64 = (1..=m1 + 1).product();
    crate::precision::inv_pow(&BigInt::from(base), m1 * fact) * BigInt::from(2 * m1)
}

/// Tail bound for the base-10 family.
pub fn tail_bound(m_count: usize) -> BigRational {
    tail_bound_for(10, m_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::{parse_rational, rational};

    fn field(m: usize) -> TruncatedField {
        TruncatedField::build(&LiouvilleSpec::default(), m, 512).unwrap()
    }

    fn dec(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    fn assert_close(x: &RealHp, want: &BigRational) {
        let err = (x.to_rational() - want).abs();
        let tol = RealHp::epsilon(508).to_rational() * (want.abs() + BigInt::from(1));
        assert!(err <= tol, "{x} vs {want}");
    }

    #[test]
    fn origin_sums_amplitudes() {
        let f = field(2);
        let h = f.eval(&[rational(0, 1), rational(0, 1), rational(0, 1)]);
        assert_eq!(h[0], RealHp::from_rational(&f.r_k, 512));
        assert_eq!(h[1], RealHp::one(512));
        assert_eq!(f.amplitude_sum(), dec("0.010000000002"));
        assert_close(&h[2], &dec("0.010000000002"));
    }

    #[test]
    fn half_turn_on_first_mode() {
        let f = field(2);
        let h = f.eval(&[rational(1, 200), rational(0, 1), rational(0, 1)]);
        assert_close(&h[2], &dec("-0.009999999998"));
    }

    #[test]
    fn third_coordinate_is_ignored() {
        let f = field(3);
        let a = f.eval(&[rational(1, 3), rational(2, 7), rational(0, 1)]);
        let b = f.eval(&[rational(1, 3), rational(2, 7), rational(-91, 5)]);
        assert_eq!(a, b);
    }

    #[test]
    fn smoothness_examples() {
        assert_eq!(field(2).smoothness_bound(0).majorant_rational, dec("0.010000000002"));
        let b = field(1).smoothness_bound(1);
        assert_eq!(b.majorant_rational, rational(1, 1));
        assert_eq!(b.majorant, crate::precision::two_pi(512));
        let empty = field(0).smoothness_bound(0);
        assert!(empty.majorant.is_zero());
    }

    #[test]
    fn comparison_bound_holds_for_large_modes() {
        let f = field(3);
        for k in 0..=5 {
            assert!(f.smoothness_bound(k).comparison_holds, "k = {k}");
        }
    }

    #[test]
    fn tail_examples() {
        assert_eq!(tail_bound(1), dec("4e-12"));
        assert_eq!(tail_bound(2), dec("6e-72"));
        // Oracle: two explicit tail terms each, compared exactly.
        let t1 = dec("2e-12") + dec("3e-72");
        assert!(t1 <= tail_bound(1));
        let t2 = dec("3e-72") + dec("4e-480");
        assert!(t2 <= tail_bound(2));
        for m in 0..6 {
            assert!(tail_bound(m + 1) < tail_bound(m));
        }
        assert_eq!(field(2).tail_bound().unwrap(), tail_bound(2));
    }

    #[test]
    fn tail_terms_shrink_by_more_than_half() {
        let term = |m: u64| {
            let fact: u64 = (1..=m + 1).product();
            crate::precision::inv_pow(&BigInt::from(10), m * fact) * BigInt::from(m)
        };
        for m in 1..5 {
            assert!(term(m + 1) * BigInt::from(2) < term(m));
        }
    }

    #[test]
    fn real_evaluation_matches_exact_evaluation() {
        let f = field(2);
        let z1 = rational(37, 3);
        let z2 = rational(101, 1);
        let exact = f.eval(&[z1.clone(), z2.clone(), rational(0, 1)]);
        let real = f.eval_third_real(&RealHp::from_rational(&z1, 512), &RealHp::from_rational(&z2, 512));
        let err = (&exact[2] - &real).abs();
        assert!(err < RealHp::from_rational(&dec("1e-120"), 64));
    }
}
