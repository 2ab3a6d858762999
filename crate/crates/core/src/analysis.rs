//! Weak versus strong rotation on the constructed flow.
//!
//! The weak rotation vector `(r, 1, 0)` is certified by `|x3(T)/T|` bounds
//! that vanish as `T` grows. Unbounded deviation is certified two ways: the
//! value of `x3` at each resonance time `1/(4 lambda_n)` is at least the
//! amplitude `A_n > n/(2 pi)`, and the time averages
//! `T^-1 int_0^T x3(s) sin(2 pi lambda_n s) ds` converge to
//! `n / (4 pi p_n^n lambda_n)`, which exceeds `n/(4 pi)` in modulus.
//!
//! `x3` is a sine series, so averaging against `cos(2 pi lambda_n s)`
//! tends to zero instead; both pairings are computed and reported.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::ClosedFormTrajectory;
use crate::precision::{format_sig, pi, rational_string, reduce_phase, sincos_turns, BigRational, RealHp};

/// Note attached to every correlation section of a report.
pub const PAIRING_NOTE: &str = "x3 is a sine series: the cos-paired average tends to 0, \
the sin-paired average tends to n/(4 pi p_n^n lambda_n)";

fn real(q: &BigRational, bits: u32) -> RealHp {
    RealHp::from_rational(q, bits)
}

fn fmt(x: &RealHp) -> String {
    format!("{x:.30}")
}

#[derive(Clone, Debug)]
pub struct RotationEstimate {
    pub t: BigRational,
    /// First two components of `x(T)/T`, exact.
    pub rho_exact: [BigRational; 2],
    pub rho_hat: [RealHp; 3],
    /// `sum_m |A_m| / T + tail`.
    pub third_component_bound: RealHp,
    pub within_bound: bool,
}

pub fn weak_rotation_estimate(traj: &ClosedFormTrajectory, t: &BigRational) -> Result<RotationEstimate> {
    if !t.is_positive() {
        return Err(Error::Domain(format!("horizon T = {t} must be positive")));
    }
    let bits = traj.bits;
    let x1 = &traj.r_k * t;
    let x2 = t.clone();
    let rho1 = x1 / t;
    let rho2 = x2 / t;
    let rho3 = traj.x3(t).div_rational(t);
    let mut bound = traj.amplitude_bound().div_rational(t);
    if let Some(tail) = &traj.tail {
        bound = &bound + &real(tail, bits);
    }
    // Evaluation error of x3, scaled by 1/T.
    bound = &bound + &traj.rounding_bound().div_rational(t);
    Ok(RotationEstimate {
        t: t.clone(),
        rho_hat: [real(&rho1, bits), real(&rho2, bits), rho3.clone()],
        rho_exact: [rho1, rho2],
        within_bound: rho3.abs() <= bound,
        third_component_bound: bound,
    })
}

/// `1/(4 |lambda|)`: the first time the mode's sine reaches its full amplitude.
pub fn resonance_time(lambda: &BigRational) -> Result<BigRational> {
    if lambda.is_zero() {
        return Err(Error::Domain("resonance time of a zero divisor".into()));
    }
    Ok((lambda.abs() * BigInt::from(4)).recip())
}

#[derive(Clone, Debug)]
pub struct DeviationReport {
    pub n: usize,
    pub t_n: BigRational,
    /// Phase of mode `n` at `t_n`, exactly a quarter (or three quarters) turn.
    pub resonant_phase: BigRational,
    pub amplitude: RealHp,
    pub x3_at_tn: RealHp,
    pub certified_lower_bound: RealHp,
    pub n_over_4pi: RealHp,
    pub exceeds_n_over_4pi: bool,
    pub lower_bound_exceeds_n_over_4pi: bool,
}

impl DeviationReport {
    pub fn pass(&self) -> bool {
        self.x3_at_tn >= self.certified_lower_bound && self.exceeds_n_over_4pi && self.lower_bound_exceeds_n_over_4pi
    }
}

/// Evaluates `x3` where mode `n` peaks and certifies a lower bound for the
/// untruncated flow: `|A_n| - sum_{m<n} |A_m| - sum_{m>n} a_m t_n - tail t_n`.
pub fn deviation_at_resonance(traj: &ClosedFormTrajectory, n: usize) -> Result<DeviationReport> {
    let md = traj.mode(n)?;
    let bits = traj.bits;
    let wp = bits + 32;
    let t_n = resonance_time(&md.lambda)?;
    let x3 = traj.x3(&t_n);
    let x3_signed = if md.lambda.is_negative() { -x3 } else { x3 };

    let mut lead = md.amp_times_2pi.abs();
    for other in traj.modes.iter().filter(|o| o.m < n) {
        lead -= other.amp_times_2pi.abs();
    }
    let mut drift: BigRational = traj
        .modes
        .iter()
        .filter(|o| o.m > n)
        .map(|o| &o.field_amplitude * &t_n)
        .fold(BigRational::zero(), |a, b| a + b);
    if let Some(tail) = &traj.tail {
        drift += tail * &t_n;
    }
    let two_pi = pi(wp).mul_pow2(1);
    let lower = real(&lead, wp).div(&two_pi) - real(&drift, wp);
    let slack = &traj.rounding_bound() + &traj.amplitude_bound().mul(&RealHp::epsilon(bits)).mul_pow2(4);
    let lower = (&lower - &slack).round_to(bits);
    let n_over_4pi = real(&BigRational::from_integer(BigInt::from(n)), wp).div(&pi(wp).mul_pow2(2)).round_to(bits);
    Ok(DeviationReport {
        n,
        resonant_phase: ClosedFormTrajectory::phase(md, &t_n),
        amplitude: traj.amplitude(n)?.abs(),
        exceeds_n_over_4pi: x3_signed > n_over_4pi,
        lower_bound_exceeds_n_over_4pi: lower > n_over_4pi,
        certified_lower_bound: lower,
        x3_at_tn: x3_signed,
        t_n,
        n_over_4pi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Sin,
    Cos,
}

impl std::str::FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sin" => Ok(Kind::Sin),
            "cos" => Ok(Kind::Cos),
            _ => Err(Error::Parse(format!("correlation kind must be sin or cos, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CorrelationEstimate {
    pub n: usize,
    pub t: BigRational,
    pub kind: Kind,
    /// Exact closed form of `T^-1 int_0^T x3(s) trig(2 pi lambda_n s) ds`, rounded.
    pub value: RealHp,
    pub limit: RealHp,
    pub error_bound: RealHp,
    /// Bound on the contribution of the omitted modes, `tail * T / 2`.
    pub tail_certificate: Option<RealHp>,
    /// `|limit| > n/(4 pi)`, decided exactly; always false for the cos pairing.
    pub limit_exceeds_n_over_4pi: bool,
}

impl CorrelationEstimate {
    pub fn consistent(&self) -> bool {
        (&self.value - &self.limit).abs() <= self.error_bound
    }

    pub fn pass(&self) -> bool {
        self.consistent() && (self.kind == Kind::Cos || self.limit_exceeds_n_over_4pi)
    }

    pub fn record(&self) -> CorrelationRecord {
        CorrelationRecord {
            n: self.n,
            t: rational_string(&self.t),
            kind: self.kind,
            value: fmt(&self.value),
            limit: fmt(&self.limit),
            error_bound: fmt(&self.error_bound),
            pass: self.pass(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationRecord {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: String,
    pub kind: Kind,
    pub value: String,
    pub limit: String,
    pub error_bound: String,
    pub pass: bool,
}

/// `sin(2 pi x)` and `cos(2 pi x)` with `x` reduced exactly first.
fn trig_of(x: &BigRational, wp: u32) -> (RealHp, RealHp) {
    sincos_turns(&reduce_phase(x), wp).expect("reduced phase")
}

/// Time average of `x3` against `sin` or `cos` of mode `n`, by exact
/// product-to-sum antiderivatives. With `R_m = 2 pi A_m`:
///
/// * sin, `m = n`: `R_n/(4 pi) - R_n sin(4 pi lambda_n T) / (16 pi^2 lambda_n T)`
/// * sin, `m != n`: `R_m/(8 pi^2) [sin(2 pi d T)/(d T) - sin(2 pi s T)/(s T)]`
/// * cos, `m = n`: `R_n (1 - cos(4 pi lambda_n T)) / (16 pi^2 lambda_n T)`
/// * cos, `m != n`: `R_m/(8 pi^2) [(1 - cos(2 pi s T))/(s T) + (1 - cos(2 pi d T))/(d T)]`
///
/// where `d = lambda_m - lambda_n` and `s = lambda_m + lambda_n`.
pub fn correlation(traj: &ClosedFormTrajectory, n: usize, t: &BigRational, kind: Kind) -> Result<CorrelationEstimate> {
    let target = traj.mode(n)?;
    if !t.is_positive() {
        return Err(Error::Domain(format!("horizon T = {t} must be positive")));
    }
    let bits = traj.bits;
    let wp = bits + 32;
    let pi_w = pi(wp);
    let pi2 = pi_w.mul(&pi_w);
    let inv_8pi2 = RealHp::one(wp).div(&pi2.mul_pow2(3));
    let one = RealHp::one(wp);
    let ln = &target.lambda;

    // Sum of the term magnitudes bounded below, without 1/(8 pi^2).
    let mut value = RealHp::zero(wp);
    let mut bound = BigRational::zero();

    // Diagonal term.
    let two_l_t = ln * t * BigInt::from(2);
    let (s2, c2) = trig_of(&two_l_t, wp);
    let r_n = &target.amp_times_2pi;
    let diag_scale = r_n / (ln * t) / BigInt::from(2);
    match kind {
        Kind::Sin => {
            value = &value - &s2.mul_rational(&diag_scale);
            bound += diag_scale.abs();
        }
        Kind::Cos => {
            value = &value + &(&one - &c2).mul_rational(&diag_scale);
            bound += diag_scale.abs() * BigInt::from(2);
        }
    }

    for md in traj.modes.iter().filter(|md| md.m != n) {
        let d = &md.lambda - ln;
        let s = &md.lambda + ln;
        if d.is_zero() || s.is_zero() {
            return Err(Error::Precondition(format!(
                "modes {} and {n} share |lambda|; correlation needs distinct divisors",
                md.m
            )));
        }
        let dt = &d * t;
        let st = &s * t;
        let (sd, cd) = trig_of(&dt, wp);
        let (ss, cs) = trig_of(&st, wp);
        let r_m = &md.amp_times_2pi;
        let bracket = match kind {
            Kind::Sin => sd.mul_rational(&(r_m / &dt)) - ss.mul_rational(&(r_m / &st)),
            Kind::Cos => (&one - &cs).mul_rational(&(r_m / &st)) + (&one - &cd).mul_rational(&(r_m / &dt)),
        };
        value = &value + &bracket;
        let factor = if kind == Kind::Sin { 1 } else { 2 };
        bound += (r_m / &dt).abs() * BigInt::from(factor) + (r_m / &st).abs() * BigInt::from(factor);
    }
    value = value.mul(&inv_8pi2);

    let limit = match kind {
        Kind::Sin => real(r_n, wp).div(&pi_w.mul_pow2(2)),
        Kind::Cos => RealHp::zero(wp),
    };
    if kind == Kind::Sin {
        value = &value + &limit;
    }
    let raw_bound = real(&bound, wp).mul(&inv_8pi2);
    let slack = (&limit.abs() + &raw_bound).mul(&RealHp::epsilon(bits));
    let error_bound = (&raw_bound + &slack).round_to(bits);

    let tail_certificate = traj.tail.as_ref().map(|tail| real(&(tail * t / BigInt::from(2)), bits));
    Ok(CorrelationEstimate {
        n,
        t: t.clone(),
        kind,
        value: value.round_to(bits),
        limit: limit.round_to(bits),
        error_bound,
        tail_certificate,
        limit_exceeds_n_over_4pi: kind == Kind::Sin && r_n.abs() > BigRational::from_integer(BigInt::from(n)),
    })
}

#[derive(Clone, Debug)]
pub struct ProfilePoint {
    pub t: BigRational,
    pub x3: RealHp,
    pub running_sup: RealHp,
}

/// Running supremum of `|x3|` over a strictly increasing grid.
pub fn deviation_profile(traj: &ClosedFormTrajectory, times: &[BigRational]) -> Result<Vec<ProfilePoint>> {
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("time grid must be strictly increasing".into()));
    }
    let mut sup = RealHp::zero(traj.bits);
    Ok(times
        .iter()
        .map(|t| {
            let x3 = traj.x3(t);
            sup = sup.clone().max(x3.abs());
            ProfilePoint {
                t: t.clone(),
                x3,
                running_sup: sup.clone(),
            }
        })
        .collect())
}

/// CSV `t,x3,running_sup` at 30 significant digits.
pub fn profile_csv(points: &[ProfilePoint]) -> String {
    let mut out = String::from("t,x3,running_sup\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", format_sig(&p.t, 30), fmt(&p.x3), fmt(&p.running_sup)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TruncatedField;
    use crate::flow::solve_closed_form;
    use crate::liouville::LiouvilleSpec;
    use crate::precision::{parse_rational, rational};

    fn traj(m: usize) -> ClosedFormTrajectory {
        solve_closed_form(&TruncatedField::build(&LiouvilleSpec::default(), m, 512).unwrap()).unwrap()
    }

    fn dec(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn resonance_times() {
        let tr = traj(2);
        let t1 = resonance_time(&tr.modes[0].lambda).unwrap();
        assert!(t1 < rational(2500, 1) && t1 > dec("2499.99999999999999"));
        let t2 = resonance_time(&tr.modes[1].lambda).unwrap();
        assert!((format_sig(&t2, 3)) == "2.50e17");
        assert_eq!(resonance_time(&rational(1, 4)).unwrap(), rational(1, 1));
        assert!(resonance_time(&BigRational::zero()).is_err());
    }

    #[test]
    fn weak_rotation_small_horizon_phase_wraps() {
        let tr = traj(1);
        let est = weak_rotation_estimate(&tr, &dec("1e4")).unwrap();
        assert_eq!(est.rho_exact[0], tr.r_k);
        assert_eq!(est.rho_exact[1], rational(1, 1));
        // lambda_1 * 1e4 = 1 + 1e-18 + ...: a hair past a full turn.
        let v = est.rho_hat[2].to_f64();
        let want = 15.915494309189533 * (2.0 * std::f64::consts::PI * 1e-18) / 1e4;
        assert!((v - want).abs() < 1e-9 * want, "{v}");
        assert!(est.within_bound);
    }

    #[test]
    fn weak_rotation_rejects_nonpositive_horizon() {
        assert!(weak_rotation_estimate(&traj(1), &BigRational::zero()).is_err());
    }

    #[test]
    fn deviation_first_mode() {
        let rep = deviation_at_resonance(&traj(2), 1).unwrap();
        assert_eq!(rep.resonant_phase, rational(1, 4));
        let gap = (&rep.x3_at_tn - &rep.amplitude).to_f64();
        assert!((gap - 5.0e-9).abs() < 1e-10);
        assert!(rep.pass());
    }

    #[test]
    fn deviation_index_range() {
        assert!(deviation_at_resonance(&traj(2), 0).is_err());
        assert!(deviation_at_resonance(&traj(2), 3).is_err());
    }

    #[test]
    fn cos_pairing_is_bounded_by_its_error_term() {
        let tr = traj(2);
        for n in 1..=2 {
            let c = correlation(&tr, n, &dec("1e12"), Kind::Cos).unwrap();
            assert!(c.limit.is_zero());
            assert!(c.value.abs() <= c.error_bound);
            assert!(c.pass());
        }
    }

    #[test]
    fn correlation_rejects_bad_arguments() {
        let tr = traj(2);
        assert!(correlation(&tr, 3, &dec("1e6"), Kind::Sin).is_err());
        assert!(correlation(&tr, 1, &dec("-1"), Kind::Sin).is_err());
        assert!("tan".parse::<Kind>().is_err());
    }

    #[test]
    fn doubling_amplitudes_doubles_correlations() {
        let tr = traj(2);
        let mut doubled = tr.clone();
        for md in &mut doubled.modes {
            md.amp_times_2pi = &md.amp_times_2pi * BigInt::from(2);
        }
        for kind in [Kind::Sin, Kind::Cos] {
            let a = correlation(&tr, 1, &dec("1e9"), kind).unwrap();
            let b = correlation(&doubled, 1, &dec("1e9"), kind).unwrap();
            assert_eq!(b.value, a.value.mul_pow2(1));
            assert_eq!(b.limit, a.limit.mul_pow2(1));
        }
    }

    #[test]
    fn profile_rejects_unsorted_grid() {
        assert!(deviation_profile(&traj(1), &[rational(2, 1), rational(1, 1)]).is_err());
        let p = deviation_profile(&traj(1), &[BigRational::zero()]).unwrap();
        assert!(p[0].x3.is_zero() && p[0].running_sup.is_zero());
    }
}
