//! Explicit solution of `x' = h(x), x(0) = 0` and an independent RK4 check.
//!
//! The closed form is `x1 = r_K t`, `x2 = t`,
//! `x3 = sum_m A_m sin(2 pi lambda_m t)` with `A_m = m / (2 pi p_m^m lambda_m)`.
//! Amplitudes are stored as the exact rational `2 pi A_m`; the single factor
//! `1/(2 pi)` is applied at evaluation time.

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::TruncatedField;
use crate::precision::{format_sig, rational_string, reduce_phase, sin_turns, sincos_turns, two_pi, BigRational, RealHp};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrajectoryMode {
    pub m: usize,
    pub lambda: BigRational,
    /// `2 pi A_m = m / (p_m^m lambda_m)`.
    pub amp_times_2pi: BigRational,
    /// Field coefficient `a_m = m p_m^(-m)`.
    pub field_amplitude: BigRational,
    /// `p_m^m lambda_m`, of modulus below one along a valid chain.
    pub scaled_divisor: BigRational,
}

#[derive(Clone, Debug)]
pub struct ClosedFormTrajectory {
    pub r_k: BigRational,
    pub modes: Vec<TrajectoryMode>,
    pub bits: u32,
    /// Certified bound on the omitted coefficients, when the chain belongs to
    /// the `base^((m+1)!)` family.
    pub tail: Option<BigRational>,
}

/// Integrates the truncated field termwise.
pub fn solve_closed_form(field: &TruncatedField) -> Result<ClosedFormTrajectory> {
    let mut modes = Vec::with_capacity(field.modes.len());
    for md in &field.modes {
        if md.lambda.is_zero() {
            return Err(Error::Domain(format!("mode {} has zero small divisor", md.m)));
        }
        let scaled = BigRational::from_integer(Pow::pow(md.p.clone(), md.m as u64)) * &md.lambda;
        modes.push(TrajectoryMode {
            m: md.m,
            lambda: md.lambda.clone(),
            amp_times_2pi: BigRational::from_integer(BigInt::from(md.m)) / &scaled,
            field_amplitude: md.amplitude.clone(),
            scaled_divisor: scaled,
        });
    }
    Ok(ClosedFormTrajectory {
        r_k: field.r_k.clone(),
        modes,
        bits: field.bits,
        tail: field.tail_bound().ok(),
    })
}

impl ClosedFormTrajectory {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, n: usize) -> Result<&TrajectoryMode> {
        if n == 0 || n > self.modes.len() {
            return Err(Error::Domain(format!("mode index {n} outside 1..={}", self.modes.len())));
        }
        Ok(&self.modes[n - 1])
    }

    fn wp(&self) -> u32 {
        self.bits + 16
    }

    /// `A_m` at working precision.
    pub fn amplitude(&self, n: usize) -> Result<RealHp> {
        let md = self.mode(n)?;
        Ok(RealHp::from_rational(&md.amp_times_2pi, self.bits).div(&two_pi(self.bits)))
    }

    /// `sum_m |A_m|`, an upper bound on `|x3|`.
    pub fn amplitude_bound(&self) -> RealHp {
        let sum = self
            .modes
            .iter()
            .fold(BigRational::zero(), |acc, md| acc + md.amp_times_2pi.abs());
        RealHp::from_rational(&sum, self.bits).div(&two_pi(self.bits))
    }

    /// Reduced phase `lambda_m t mod 1` of one mode.
    pub fn phase(mode: &TrajectoryMode, t: &BigRational) -> BigRational {
        reduce_phase(&(&mode.lambda * t))
    }

    /// `x3(t)`; every phase is reduced exactly before the sine is taken.
    pub fn x3(&self, t: &BigRational) -> RealHp {
        let wp = self.wp();
        let mut acc = RealHp::zero(wp);
        for md in &self.modes {
            let s = sin_turns(&Self::phase(md, t), wp).expect("reduced phase");
            acc = &acc + &s.mul_rational(&md.amp_times_2pi);
        }
        acc.div(&two_pi(wp)).round_to(self.bits)
    }

    /// `x(t)`.
    pub fn eval(&self, t: &BigRational) -> [RealHp; 3] {
        [
            RealHp::from_rational(&(&self.r_k * t), self.bits),
            RealHp::from_rational(t, self.bits),
            self.x3(t),
        ]
    }

    /// Analytic derivative of `x3`: `sum_m a_m cos(2 pi lambda_m t)`.
    pub fn x3_derivative(&self, t: &BigRational) -> RealHp {
        let mut acc = RealHp::zero(self.bits);
        for md in &self.modes {
            let (_, c) = sincos_turns(&Self::phase(md, t), self.bits).expect("reduced phase");
            // A_m * 2 pi lambda_m = a_m
            let coeff = &md.amp_times_2pi * &md.lambda;
            acc = &acc + &c.mul_rational(&coeff);
        }
        acc
    }

    /// Bound on the rounding error of [`ClosedFormTrajectory::x3`].
    pub fn rounding_bound(&self) -> RealHp {
        let amp = self.amplitude_bound();
        amp.mul(&RealHp::epsilon(self.bits)).mul_pow2(4)
    }

    pub fn descriptor(&self) -> TrajectoryDescriptor {
        TrajectoryDescriptor {
            m: self.modes.len(),
            modes: self
                .modes
                .iter()
                .map(|md| DescriptorMode {
                    m: md.m,
                    lambda: rational_string(&md.lambda),
                    a_times_2pi: rational_string(&md.amp_times_2pi),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DescriptorMode {
    pub m: usize,
    pub lambda: String,
    #[serde(rename = "A_times_2pi")]
    pub a_times_2pi: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryDescriptor {
    #[serde(rename = "M")]
    pub m: usize,
    pub modes: Vec<DescriptorMode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4,
    ClosedForm,
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub t: BigRational,
    pub x: [RealHp; 3],
}

#[derive(Clone, Debug)]
pub struct SampleSeries {
    pub samples: Vec<Sample>,
    pub method: Method,
    pub step: Option<BigRational>,
    pub bits: u32,
    /// Identifies the field the series was produced from.
    pub r_k: BigRational,
}

impl SampleSeries {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("series is never empty")
    }

    /// CSV `t,x1,x2,x3` at 30 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x1,x2,x3\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{:.30},{:.30},{:.30}\n",
                format_sig(&s.t, 30),
                s.x[0],
                s.x[1],
                s.x[2]
            ));
        }
        out
    }
}

/// Samples the closed form on a strictly increasing grid.
pub fn sample_closed_form(traj: &ClosedFormTrajectory, times: &[BigRational]) -> Result<SampleSeries> {
    if times.is_empty() {
        return Err(Error::Precondition("empty time grid".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("time grid must be strictly increasing".into()));
    }
    Ok(SampleSeries {
        samples: times
            .iter()
            .map(|t| Sample {
                t: t.clone(),
                x: traj.eval(t),
            })
            .collect(),
        method: Method::ClosedForm,
        step: None,
        bits: traj.bits,
        r_k: traj.r_k.clone(),
    })
}

/// Fixed-step classical RK4 for the truncated field from `x(0) = 0`.
/// The last step is shortened so the final sample lands on `t_end`.
pub fn integrate_ode(field: &TruncatedField, t_end: &BigRational, step: &BigRational, bits: u32) -> Result<SampleSeries> {
    if !step.is_positive() {
        return Err(Error::Precondition(format!("step {step} must be positive")));
    }
    if *step >= BigRational::one() {
        return Err(Error::Precondition(format!("step {step} must be below 1")));
    }
    if t_end.is_negative() {
        return Err(Error::Precondition(format!("t_end {t_end} must be nonnegative")));
    }
    let mut field = field.clone();
    field.bits = bits;
    let r = RealHp::from_rational(&field.r_k, bits);
    let one = RealHp::one(bits);
    let rhs = |z: &[RealHp; 3]| -> [RealHp; 3] { [r.clone(), one.clone(), field.eval_third_real(&z[0], &z[1])] };
    let axpy = |x: &[RealHp; 3], h: &RealHp, k: &[RealHp; 3]| -> [RealHp; 3] {
        [&x[0] + &h.mul(&k[0]), &x[1] + &h.mul(&k[1]), &x[2] + &h.mul(&k[2])]
    };

    let zero = RealHp::zero(bits);
    let mut x = [zero.clone(), zero.clone(), zero];
    let mut t = BigRational::zero();
    let mut samples = vec![Sample {
        t: t.clone(),
        x: x.clone(),
    }];
    let full = RealHp::from_rational(step, bits);
    while t < *t_end {
        let next = (&t + step).min(t_end.clone());
        let h = if &next - &t == *step {
            full.clone()
        } else {
            RealHp::from_rational(&(&next - &t), bits)
        };
        let half = h.mul_pow2(-1);
        let k1 = rhs(&x);
        let k2 = rhs(&axpy(&x, &half, &k1));
        let k3 = rhs(&axpy(&x, &half, &k2));
        let k4 = rhs(&axpy(&x, &h, &k3));
        let sixth = h.div(&RealHp::from_i64(6, bits));
        for i in 0..3 {
            let incr = &(&k1[i] + &k4[i]) + &(&k2[i] + &k3[i]).mul_pow2(1);
            x[i] = &x[i] + &sixth.mul(&incr);
        }
        t = next;
        samples.push(Sample {
            t: t.clone(),
            x: x.clone(),
        });
    }
    Ok(SampleSeries {
        samples,
        method: Method::Rk4,
        step: Some(step.clone()),
        bits,
        r_k: field.r_k.clone(),
    })
}

/// A priori RK4 error on `[0, t_end]`. Along the flow the first two
/// coordinates are linear, so each step is Simpson's rule for
/// `g(t) = sum_m a_m cos(2 pi lambda_m t)` and the global error is at most
/// `t_end h^4 / 2880 * sum_m a_m (2 pi lambda_m)^4`.
pub fn rk4_error_bound(field: &TruncatedField, t_end: &BigRational, step: &BigRational) -> RealHp {
    let bits = field.bits;
    let tau4 = two_pi(bits).powi(4);
    let mut acc = RealHp::zero(bits);
    for md in &field.modes {
        let l4 = Pow::pow(md.lambda.abs(), 4u32);
        acc = &acc + &tau4.mul_rational(&(&md.amplitude * l4));
    }
    let scale = t_end * Pow::pow(step.clone(), 4u32) / BigInt::from(2880);
    acc.mul_rational(&scale)
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub max_error: RealHp,
    pub worst_t: BigRational,
    pub samples: usize,
    pub tol: RealHp,
    pub pass: bool,
}

/// Largest sup-norm gap between the closed form and a sampled series.
pub fn cross_validate(traj: &ClosedFormTrajectory, series: &SampleSeries, tol: &RealHp) -> Result<ValidationReport> {
    if series.r_k != traj.r_k {
        return Err(Error::Precondition(
            "series and trajectory come from different Liouville truncations".into(),
        ));
    }
    let mut max_error = RealHp::zero(traj.bits);
    let mut worst_t = BigRational::zero();
    for s in &series.samples {
        let cf = traj.eval(&s.t);
        for (a, b) in cf.iter().zip(&s.x) {
            let e = (a - b).abs();
            if e > max_error {
                max_error = e;
                worst_t = s.t.clone();
            }
        }
    }
    Ok(ValidationReport {
        pass: max_error <= *tol,
        max_error,
        worst_t,
        samples: series.samples.len(),
        tol: tol.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::LiouvilleSpec;
    use crate::precision::{parse_rational, rational};

    fn traj(m: usize) -> ClosedFormTrajectory {
        solve_closed_form(&TruncatedField::build(&LiouvilleSpec::default(), m, 512).unwrap()).unwrap()
    }

    fn dec(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    fn rel_err(x: &RealHp, want: f64) -> f64 {
        (x.to_f64() - want).abs() / want.abs()
    }

    #[test]
    fn amplitudes() {
        let tr = traj(3);
        assert!(rel_err(&tr.amplitude(1).unwrap(), 15.91549431) < 1e-9);
        assert!(rel_err(&tr.amplitude(2).unwrap(), 3.183098862e5) < 1e-9);
        assert!(rel_err(&tr.amplitude(3).unwrap(), 4.774648293e23) < 1e-9);
        for md in &tr.modes {
            // A_m (2 pi p^m lambda_m) / m = 1 exactly
            assert!((&md.amp_times_2pi * &md.scaled_divisor / BigInt::from(md.m)).is_one());
            assert!(md.scaled_divisor.abs() < BigRational::one());
        }
    }

    #[test]
    fn zero_divisor_rejected() {
        let mut field = TruncatedField::build(&LiouvilleSpec::default(), 2, 128).unwrap();
        field.modes[1].lambda = BigRational::zero();
        assert!(matches!(solve_closed_form(&field), Err(Error::Domain(_))));
    }

    #[test]
    fn initial_condition() {
        let x = traj(3).eval(&BigRational::zero());
        assert!(x.iter().all(RealHp::is_zero));
    }

    #[test]
    fn value_at_t_100() {
        let tr = traj(2);
        let x = tr.eval(&rational(100, 1));
        assert_eq!(x[1], RealHp::from_i64(100, 512));
        assert_eq!(x[0], RealHp::from_rational(&(&tr.r_k * BigInt::from(100)), 512));
        // Term-by-term oracle in f64: the phases are small enough here.
        let l1 = 1e-4 + 1e-22;
        let a1 = 1.0 / (2.0 * std::f64::consts::PI * 100.0 * l1);
        let a2 = 2.0 / (2.0 * std::f64::consts::PI * 1e12 * 1e-18);
        let want = a1 * (2.0 * std::f64::consts::PI * l1 * 100.0).sin() + a2 * (2.0 * std::f64::consts::PI * 1e-16).sin();
        assert!(rel_err(&x[2], want) < 1e-12);
        // 50-digit reference value of the same two-term sum.
        let frozen = dec("0.99934215643984130737774606847837364909849770794335");
        let err = (x[2].to_rational() - frozen).abs();
        assert!(err < dec("1e-45"));
    }

    #[test]
    fn quarter_period_of_first_mode() {
        let tr = traj(2);
        let t1 = (BigRational::from_integer(4.into()) * &tr.modes[0].lambda).recip();
        assert_eq!(ClosedFormTrajectory::phase(&tr.modes[0], &t1), rational(1, 4));
        let x3 = tr.x3(&t1);
        let a1 = tr.amplitude(1).unwrap();
        let diff = (&x3 - &a1).to_f64();
        // A_2 sin(2 pi lambda_2 / (4 lambda_1)) ~ 5.0e-9
        assert!((diff - 5.0e-9).abs() < 1e-10, "{diff}");
    }

    #[test]
    fn constant_field_integrates_linearly() {
        let field = TruncatedField::build(&LiouvilleSpec::default(), 0, 128).unwrap();
        let s = integrate_ode(&field, &rational(10, 1), &rational(1, 4), 128).unwrap();
        let last = s.last();
        assert_eq!(last.t, rational(10, 1));
        assert!(last.x[2].is_zero());
        let want = RealHp::from_rational(&(&field.r_k * BigInt::from(10)), 128);
        assert!((&last.x[0] - &want).abs() < RealHp::from_rational(&dec("1e-30"), 64));
        assert_eq!(s.samples.len(), 41);
    }

    #[test]
    fn zero_horizon_gives_single_sample() {
        let field = TruncatedField::build(&LiouvilleSpec::default(), 1, 128).unwrap();
        let s = integrate_ode(&field, &BigRational::zero(), &rational(1, 100), 128).unwrap();
        assert_eq!(s.samples.len(), 1);
    }

    #[test]
    fn integrator_argument_checks() {
        let field = TruncatedField::build(&LiouvilleSpec::default(), 1, 128).unwrap();
        assert!(integrate_ode(&field, &rational(1, 1), &rational(1, 1), 128).is_err());
        assert!(integrate_ode(&field, &rational(1, 1), &rational(0, 1), 128).is_err());
        assert!(integrate_ode(&field, &rational(-1, 1), &rational(1, 10), 128).is_err());
    }

    #[test]
    fn short_rk4_run_agrees_with_closed_form() {
        let field = TruncatedField::build(&LiouvilleSpec::default(), 2, 256).unwrap();
        let tr = solve_closed_form(&field).unwrap();
        let s = integrate_ode(&field, &rational(5, 1), &rational(1, 10), 256).unwrap();
        let tol = RealHp::from_rational(&dec("1e-15"), 64);
        let rep = cross_validate(&tr, &s, &tol).unwrap();
        assert!(rep.pass, "{}", rep.max_error);
        assert!(rep.max_error <= rk4_error_bound(&field, &rational(5, 1), &rational(1, 10)).mul_pow2(1));
    }

    #[test]
    fn self_validation_is_exact() {
        let tr = traj(2);
        let times: Vec<_> = (0..20).map(|k| rational(k * 37, 3)).collect();
        let s = sample_closed_form(&tr, &times).unwrap();
        let rep = cross_validate(&tr, &s, &RealHp::zero(64)).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn mismatched_truncation_is_an_error() {
        let tr = traj(1);
        let other = TruncatedField::build(&LiouvilleSpec::new(10, 6).unwrap(), 1, 512).unwrap();
        let s = sample_closed_form(&solve_closed_form(&other).unwrap(), &[rational(1, 1)]).unwrap();
        assert!(cross_validate(&tr, &s, &RealHp::zero(64)).is_err());
    }

    #[test]
    fn missing_mode_is_detected_over_long_horizon() {
        let tr2 = traj(2);
        let tr1 = traj(1);
        let times: Vec<_> = (1..=10).map(|k| BigRational::from_integer(BigInt::from(k) * BigInt::from(100_000))).collect();
        let s1 = sample_closed_form(&tr1, &times).unwrap();
        let rep = cross_validate(&tr2, &s1, &RealHp::from_rational(&dec("1e-8"), 64)).unwrap();
        assert!(!rep.pass);
        // The missing mode contributes about a_2 t = 2e-12 * 1e6.
        assert!(rel_err(&rep.max_error, 2e-6) < 1e-3);
    }

    #[test]
    fn descriptor_serializes_rationals() {
        let d = traj(1).descriptor();
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["M"], 1);
        assert!(v["modes"][0]["A_times_2pi"].as_str().unwrap().contains('/'));
    }
}
