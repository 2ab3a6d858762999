//! The classical Liouville constant `sum_k base^(-k!)`, its exact truncation,
//! and a chain of resonant denominators `(p_m, q_m)` satisfying
//!
//! ```text
//! 0 < |r p_m - q_m| < p_m^(-m) < |r p_(m-1) - q_(m-1)|
//! ```
//!
//! Every inequality is decided by exact rational comparison. A truncation
//! certificate shows the same inequalities hold for the untruncated constant.

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::precision::{format_sig, inv_pow, rational_string, BigRational};

/// Largest truncation order accepted; `9!` decimal digits is already 362880.
pub const MAX_TRUNCATION: usize = 9;

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// `L = sum_{k >= 1} base^(-k!)`, truncated after `truncation` terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiouvilleSpec {
    pub base: u64,
    pub truncation: usize,
}

impl Default for LiouvilleSpec {
    fn default() -> Self {
        LiouvilleSpec {
            base: 10,
            truncation: 5,
        }
    }
}

impl LiouvilleSpec {
    pub fn new(base: u64, truncation: usize) -> Result<Self> {
        let spec = LiouvilleSpec { base, truncation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base < 2 {
            return Err(Error::Precondition(format!("base {} must be at least 2", self.base)));
        }
        if self.truncation < 1 || self.truncation > MAX_TRUNCATION {
            return Err(Error::Precondition(format!(
                "truncation order K = {} outside 1..={MAX_TRUNCATION}",
                self.truncation
            )));
        }
        Ok(())
    }

    pub fn base_int(&self) -> BigInt {
        BigInt::from(self.base)
    }

    /// Exponent of the `k`-th term, `k!`.
    pub fn exponent(k: usize) -> u64 {
        factorial(k)
    }

    /// Candidate denominator `base^(j!)`.
    pub fn candidate(&self, j: usize) -> BigInt {
        Pow::pow(self.base_int(), Self::exponent(j))
    }

    /// Strict upper bound `2 base^(-(K+1)!)` on `L - r_K`.
    pub fn truncation_error_bound(&self) -> BigRational {
        inv_pow(&self.base_int(), Self::exponent(self.truncation + 1)) * BigInt::from(2)
    }
}

/// `r_K = sum_{k=1}^{K} base^(-k!)`, exact.
pub fn liouville_truncation(spec: &LiouvilleSpec) -> BigRational {
    let base = spec.base_int();
    (1..=spec.truncation)
        .map(|k| inv_pow(&base, LiouvilleSpec::exponent(k)))
        .fold(BigRational::zero(), |acc, t| acc + t)
}

/// One link `(m, p_m, q_m)` of the chain with its small divisor and field amplitude.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResonantMode {
    pub m: usize,
    pub p: BigInt,
    pub q: BigInt,
    /// `lambda_m = r_K p_m - q_m`.
    pub lambda: BigRational,
    /// `a_m = m p_m^(-m)`.
    pub amplitude: BigRational,
}

impl ResonantMode {
    pub fn new(m: usize, p: BigInt, q: BigInt, r_k: &BigRational) -> Self {
        let lambda = r_k * BigRational::from_integer(p.clone()) - BigRational::from_integer(q.clone());
        let amplitude = inv_pow(&p, m as u64) * BigInt::from(m);
        ResonantMode {
            m,
            p,
            q,
            lambda,
            amplitude,
        }
    }

    /// `p^(-m)`.
    pub fn threshold(&self) -> BigRational {
        inv_pow(&self.p, self.m as u64)
    }
}

/// Nearest integer; ties (never hit by the 0/1-digit expansions) round down.
fn nearest_integer(x: &BigRational) -> BigInt {
    let fl = x.floor();
    let frac = x - &fl;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    if frac > half {
        fl.to_integer() + 1
    } else {
        fl.to_integer()
    }
}

/// Greedy chain: for each `m`, the smallest `p = base^(j!)` whose nearest
/// numerator satisfies both strict inequalities.
pub fn build_resonant_sequence(spec: &LiouvilleSpec, m_count: usize) -> Result<Vec<ResonantMode>> {
    spec.validate()?;
    if m_count == 0 {
        return Err(Error::Precondition("empty chain requested".into()));
    }
    if m_count + 1 > spec.truncation {
        return Err(Error::Precondition(format!(
            "M = {m_count} needs truncation order K >= {}, got {}",
            m_count + 1,
            spec.truncation
        )));
    }
    let r_k = liouville_truncation(spec);
    let mut modes: Vec<ResonantMode> = Vec::with_capacity(m_count);
    for m in 1..=m_count {
        let prev = modes.last().map(|pm| pm.lambda.abs());
        let found = (1..=spec.truncation).find_map(|j| {
            let p = spec.candidate(j);
            let q = nearest_integer(&(&r_k * BigRational::from_integer(p.clone())));
            if q < BigInt::one() {
                return None;
            }
            let mode = ResonantMode::new(m, p, q, &r_k);
            let small = mode.lambda.abs();
            let thr = mode.threshold();
            let ok = !small.is_zero() && small < thr && prev.as_ref().is_none_or(|pl| thr < *pl);
            ok.then_some(mode)
        });
        match found {
            Some(mode) => modes.push(mode),
            None => {
                return Err(Error::Construction(format!(
                    "no candidate p <= {}^({}!) satisfies the chain inequalities at m = {m}; increase K",
                    spec.base, spec.truncation
                )))
            }
        }
    }
    Ok(modes)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub m: Option<usize>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct ChainReport {
    pub modes: Vec<ResonantMode>,
    pub checks: Vec<Check>,
    /// Upper bound on `p_m |L - r_K|` per mode, to be compared with `|lambda_m| / 2`.
    pub truncation_certificate: Vec<BigRational>,
}

impl ChainReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Re-runs every inequality exactly. Violations produce a failing report,
/// never an error.
pub fn verify_chain(modes: &[ResonantMode], spec: &LiouvilleSpec) -> ChainReport {
    let r_k = liouville_truncation(spec);
    let tail = spec.truncation_error_bound();
    let mut checks = Vec::new();
    let mut certificate = Vec::with_capacity(modes.len());
    let mut push = |name: &str, m: Option<usize>, passed: bool| {
        checks.push(Check {
            name: name.to_string(),
            m,
            passed,
        })
    };
    push("nonempty", None, !modes.is_empty());
    for (i, mode) in modes.iter().enumerate() {
        let m = Some(mode.m);
        let small = mode.lambda.abs();
        let thr = mode.threshold();
        push("index m follows chain order", m, mode.m == i + 1);
        push("p >= 2", m, mode.p >= BigInt::from(2));
        push("q >= 1", m, mode.q >= BigInt::one());
        let recomputed = &r_k * BigRational::from_integer(mode.p.clone()) - BigRational::from_integer(mode.q.clone());
        push("lambda = r_K p - q", m, recomputed == mode.lambda);
        push(
            "amplitude = m p^-m",
            m,
            mode.amplitude == &thr * BigInt::from(mode.m),
        );
        push("0 < |lambda|", m, !small.is_zero());
        push("|lambda| < p^-m", m, small < thr);
        if i > 0 {
            push("p^-m < |lambda_(m-1)|", m, thr < modes[i - 1].lambda.abs());
        }
        let cert = &tail * BigRational::from_integer(mode.p.abs());
        push(
            "p |L - r_K| < |lambda| / 2",
            m,
            cert < &small / BigInt::from(2),
        );
        certificate.push(cert);
    }
    let mut mags: Vec<BigRational> = modes.iter().map(|md| md.lambda.abs()).collect();
    mags.sort();
    push("|lambda_m| pairwise distinct", None, mags.windows(2).all(|w| w[0] != w[1]));
    ChainReport {
        modes: modes.to_vec(),
        checks,
        truncation_certificate: certificate,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeRecord {
    pub m: usize,
    pub p: String,
    pub q: String,
    pub lambda: String,
    pub lambda_approx: String,
    pub amplitude_approx: String,
}

impl From<&ResonantMode> for ModeRecord {
    fn from(md: &ResonantMode) -> Self {
        ModeRecord {
            m: md.m,
            p: md.p.to_string(),
            q: md.q.to_string(),
            lambda: rational_string(&md.lambda),
            lambda_approx: format_sig(&md.lambda, 30),
            amplitude_approx: format_sig(&md.amplitude, 30),
        }
    }
}

/// The chain as a JSON array; big integers and rationals travel as strings.
pub fn chain_json(modes: &[ResonantMode]) -> serde_json::Value {
    let records: Vec<ModeRecord> = modes.iter().map(ModeRecord::from).collect();
    serde_json::to_value(records).expect("plain records serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::{parse_rational, pow_int};

    fn dec(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    fn spec(k: usize) -> LiouvilleSpec {
        LiouvilleSpec::new(10, k).unwrap()
    }

    #[test]
    fn truncations() {
        assert_eq!(liouville_truncation(&spec(1)), dec("0.1"));
        // Direct summation oracle: 10^-1 + 10^-2 + 10^-6.
        assert_eq!(liouville_truncation(&spec(3)), dec("110001/1000000"));
        let r5 = liouville_truncation(&spec(5));
        assert_eq!(*r5.denom(), pow_int(10, 120));
        let expect = dec("1e-1") + dec("1e-2") + dec("1e-6") + dec("1e-24") + dec("1e-120");
        assert_eq!(r5, expect);
        assert!(r5 > BigRational::zero() && r5 < BigRational::one());
    }

    #[test]
    fn truncation_error_bound_dominates_next_terms() {
        let s = spec(3);
        let next = liouville_truncation(&spec(6)) - liouville_truncation(&s);
        assert!(next < s.truncation_error_bound());
        assert!(next > BigRational::zero());
    }

    #[test]
    fn default_chain_k5() {
        let s = spec(5);
        let one = build_resonant_sequence(&s, 1).unwrap();
        assert_eq!(one[0].p, pow_int(10, 2));
        assert_eq!(one[0].q, BigInt::from(11));
        assert_eq!(one[0].lambda, dec("1e-4") + dec("1e-22") + dec("1e-118"));

        let three = build_resonant_sequence(&s, 3).unwrap();
        assert_eq!(three[1].p, pow_int(10, 6));
        assert_eq!(three[1].q, BigInt::from(110001));
        assert_eq!(three[1].lambda, dec("1e-18") + dec("1e-114"));
        assert!(three[1].threshold() < three[0].lambda);
        assert_eq!(three[2].p, pow_int(10, 24));
        assert_eq!(three[2].q, "110001000000000000000001".parse::<BigInt>().unwrap());
        assert_eq!(three[2].lambda, dec("1e-96"));
        assert_eq!(three[2].threshold(), dec("1e-72"));
        assert!(three[2].threshold() < three[1].lambda);
    }

    #[test]
    fn closed_form_small_divisors_for_default_family() {
        // lambda_m = sum over k >= m + 2 (k <= K) of 10^((m+1)! - k!).
        let s = spec(5);
        let modes = build_resonant_sequence(&s, 3).unwrap();
        for md in &modes {
            let lead = factorial(md.m + 1);
            let expect = ((md.m + 2)..=5)
                .map(|k| {
                    let e = factorial(k) - lead;
                    inv_pow(&BigInt::from(10), e)
                })
                .fold(BigRational::zero(), |a, b| a + b);
            assert_eq!(md.lambda, expect);
            assert_eq!(md.p, pow_int(10, lead));
        }
    }

    #[test]
    fn chain_verifies() {
        let s = spec(5);
        let modes = build_resonant_sequence(&s, 3).unwrap();
        let rep = verify_chain(&modes, &s);
        assert!(rep.pass(), "{:?}", rep.failures().collect::<Vec<_>>());
        assert_eq!(rep.truncation_certificate.len(), 3);
    }

    #[test]
    fn zeroed_divisor_fails() {
        let s = spec(5);
        let mut modes = build_resonant_sequence(&s, 3).unwrap();
        modes[1].lambda = BigRational::zero();
        let rep = verify_chain(&modes, &s);
        assert!(!rep.pass());
        assert!(rep.failures().any(|c| c.name == "0 < |lambda|" && c.m == Some(2)));
    }

    #[test]
    fn reordered_chain_fails() {
        let s = spec(5);
        let mut modes = build_resonant_sequence(&s, 3).unwrap();
        modes.swap(0, 1);
        let rep = verify_chain(&modes, &s);
        assert!(!rep.pass());
        assert!(rep.failures().any(|c| c.name == "p^-m < |lambda_(m-1)|"));
    }

    #[test]
    fn empty_chain_and_small_k_rejected() {
        assert!(matches!(build_resonant_sequence(&spec(5), 0), Err(Error::Precondition(_))));
        assert!(matches!(build_resonant_sequence(&spec(2), 3), Err(Error::Precondition(_))));
        // K = 4 admits M = 3 by the precondition, but base^(4!) makes r_K p an integer.
        assert!(matches!(build_resonant_sequence(&spec(4), 3), Err(Error::Construction(_))));
        assert!(!verify_chain(&[], &spec(5)).pass());
    }

    #[test]
    fn json_uses_strings() {
        let modes = build_resonant_sequence(&spec(5), 3).unwrap();
        let v = chain_json(&modes);
        assert_eq!(v[2]["p"], "1000000000000000000000000");
        assert_eq!(v[2]["lambda"], format!("1/{}", pow_int(10, 96)));
        assert_eq!(v[0]["lambda_approx"], "1.00000000000000000100000000000e-4");
        assert_eq!(v[1]["amplitude_approx"], "2.00000000000000000000000000000e-12");
    }
}
