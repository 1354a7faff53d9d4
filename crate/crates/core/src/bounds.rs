//! Relative error of the leading-order prediction and its analytic bound.
//!
//! With `P_t` the all-up probability and `per(J)` the permanent,
//!
//! ```text
//! eta_t = (P_t - t^{2N} per(J)^2) / t^{2N}
//! |eta_t| <= 6 N^4 (j t)^2 N^{4N} j^{2N} / (N!)^2      when (j t)^2 <= 1/(2 N^4)
//! ```
//!
//! where `j = max |J_ij|`. The bound follows from `|<up|H^m|down>| <= (N^2 j)^m`
//! and a geometric tail estimate that closes inside the stated window.
//! For `j = 1` the `j^{2N}` factor disappears.

use rug::float::Round;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::certify;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::instances::random_matrix;
use crate::model::{CouplingMatrix, SpinConfiguration, Time};
use crate::permanent::permanent_fast;
use crate::series::in_validity_window;
use crate::spectrum::{probability_at, signed_spectrum};

/// Precision of [`eta_bound`] values.
pub const BOUND_PRECISION: u32 = 128;
/// Default ceiling for precision escalation in [`eta_measured`].
pub const DEFAULT_MAX_PRECISION: u32 = 1024;
const INITIAL_PRECISION: u32 = 64;
/// Fraction of the bound the certified error bar must stay below.
pub const ERROR_BAR_FRACTION: f64 = 0.01;

fn factorial(n: usize) -> Integer {
    Integer::from(Integer::factorial(n as u32))
}

/// Exact `6 N^4 (j t)^2 N^{4N} j^{2N} / (N!)^2`.
pub fn eta_bound_exact(n: usize, j_max: u64, time: &Time) -> Rational {
    let nn = Integer::from(n);
    let j = Integer::from(j_max);
    let jt = time.as_rational().clone() * &j;
    let numer = Integer::from(6)
        * Integer::from((&nn).pow(4))
        * Integer::from((&nn).pow(4 * n as u32))
        * Integer::from((&j).pow(2 * n as u32));
    Rational::from(jt.square_ref()) * numer / Integer::from(factorial(n).square_ref())
}

/// The analytic bound on `|eta_t|`; errors outside the validity window.
pub fn eta_bound(n: usize, j_max: u64, time: &Time) -> Result<Float> {
    if !in_validity_window(n, j_max, time) {
        return Err(Error::OutsideWindow {
            n,
            j_max,
            time: time.to_string(),
        });
    }
    Ok(Float::with_val(
        BOUND_PRECISION,
        &eta_bound_exact(n, j_max, time),
    ))
}

/// Largest `t` with `eta_bound(n, j_max, t) <= epsilon` inside the window.
///
/// The result is rounded down to a dyadic rational, so the bound holds
/// exactly at the returned time. Perfect-square cases are returned exactly.
pub fn time_threshold(n: usize, j_max: u64, epsilon: &Rational) -> Result<Time> {
    if *epsilon <= 0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} must be positive"
        )));
    }
    if j_max == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "threshold needs n >= 1 and j_max >= 1".into(),
        ));
    }
    let nn = Integer::from(n);
    let j = Integer::from(j_max);
    // t^2 = eps (N!)^2 / (6 N^4 N^{4N} j^{2N+2})
    let denom = Integer::from(6)
        * Integer::from((&nn).pow(4))
        * Integer::from((&nn).pow(4 * n as u32))
        * Integer::from((&j).pow(2 * n as u32 + 2));
    let from_bound = epsilon.clone() * Integer::from(factorial(n).square_ref()) / denom;
    // t^2 = 1 / (2 N^4 j^2)
    let window = Rational::from((
        1,
        Integer::from(2) * Integer::from((&nn).pow(4)) * Integer::from(j.square_ref()),
    ));
    let t2 = if from_bound < window {
        from_bound
    } else {
        window
    };

    let t = exact_sqrt(&t2).unwrap_or_else(|| {
        let mut f = Float::with_val_round(512, &t2, Round::Down).0;
        f.sqrt_round(Round::Down);
        f.to_rational().expect("finite")
    });
    let time = Time::from_rational(t)?;
    debug_assert!(eta_bound_exact(n, j_max, &time) <= *epsilon);
    debug_assert!(in_validity_window(n, j_max, &time));
    Ok(time)
}

fn exact_sqrt(q: &Rational) -> Option<Rational> {
    let (num, den) = (q.numer(), q.denom());
    (num.is_perfect_square() && den.is_perfect_square())
        .then(|| Rational::from((Integer::from(num.sqrt_ref()), Integer::from(den.sqrt_ref()))))
}

/// Precision schedule for [`eta_measured`].
#[derive(Debug, Clone)]
pub struct PrecisionPolicy {
    pub initial_bits: u32,
    pub max_bits: u32,
    /// Escalate until the error bar is below this; `None` accepts the first pass.
    pub target_error: Option<Float>,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        Self {
            initial_bits: INITIAL_PRECISION,
            max_bits: DEFAULT_MAX_PRECISION,
            target_error: None,
        }
    }
}

/// A measured `eta_t` with its certified error bar.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaMeasurement {
    pub value: Float,
    pub error_bar: Float,
    pub precision: u32,
    /// No process reaches all-up: `P_t = per(J) = 0` identically, eta set to 0.
    pub degenerate: bool,
    pub p_exact: Float,
    pub p_exact_error: Float,
    /// `t^{2N} per(J)^2`, exact.
    pub p_leading: Rational,
    pub permanent: Integer,
}

/// Measures `eta_t` from the spectrum route and the exact permanent,
/// doubling the precision until the error bar meets the policy's target.
pub fn eta_measured(
    matrix: &CouplingMatrix,
    time: &Time,
    policy: &PrecisionPolicy,
) -> Result<EtaMeasurement> {
    if time.is_zero() {
        return Err(Error::InvalidTime("eta is undefined at t = 0".into()));
    }
    let n = matrix.n();
    let spectrum = signed_spectrum(matrix, SpinConfiguration::all_up(n))?;
    let permanent = permanent_fast(matrix).value;
    let script_p = Integer::from(permanent.square_ref());
    let t2n = Rational::from(time.as_rational().pow(2 * n as i32));
    let p_leading = Rational::from(&t2n * &script_p);

    if spectrum.is_empty() {
        if permanent != 0 {
            return Err(Error::Invariant(format!(
                "all-up amplitude vanishes identically but per(J) = {permanent}"
            )));
        }
        let zero = Float::new(policy.initial_bits);
        return Ok(EtaMeasurement {
            value: zero.clone(),
            error_bar: certify::zero(),
            precision: policy.initial_bits,
            degenerate: true,
            p_exact: zero,
            p_exact_error: certify::zero(),
            p_leading,
            permanent,
        });
    }

    let mut bits = policy.initial_bits.max(crate::spectrum::MIN_PRECISION);
    loop {
        let prob = probability_at(&spectrum, time, bits)?;
        let scaled = Float::with_val(bits, &prob.value / &t2n);
        let value = Float::with_val(bits, &scaled - &script_p);
        let u = certify::unit(bits);
        let propagated =
            certify::up(&(prob.guaranteed_abs_error.to_rational().expect("finite") / &t2n));
        let mut rounding = certify::mul_up(
            &certify::add_up(&certify::abs_up(&scaled), &certify::abs_up(&value)),
            &u,
        );
        rounding <<= 1u32;
        let error_bar = certify::add_up(&propagated, &rounding);

        let done = policy
            .target_error
            .as_ref()
            .is_none_or(|target| error_bar < *target);
        if done {
            return Ok(EtaMeasurement {
                value,
                error_bar,
                precision: bits,
                degenerate: false,
                p_exact: prob.value,
                p_exact_error: prob.guaranteed_abs_error,
                p_leading,
                permanent,
            });
        }
        if bits >= policy.max_bits {
            return Err(Error::PrecisionExhausted {
                bits,
                error_bar: error_bar.to_f64(),
                target: policy.target_error.as_ref().map_or(0.0, Float::to_f64),
            });
        }
        log::debug!("eta error bar {error_bar:e} too wide at {bits} bits, escalating");
        bits = (bits * 2).min(policy.max_bits);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `|eta| + error_bar <= bound`.
    Pass,
    /// `|eta| - error_bar > bound`.
    Fail,
    /// The error bar straddles the bound or could not be made small enough.
    Unresolved,
    /// The bound is not claimed outside the validity window.
    OutsideWindow,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Unresolved => "unresolved",
            Verdict::OutsideWindow => "outside_window",
        }
    }
}

/// One instance of the bound check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub j_max: u64,
    pub time: f64,
    pub p_exact: String,
    pub p_exact_error: String,
    pub p_leading: String,
    #[serde(serialize_with = "crate::permanent::serialize_integer")]
    pub permanent: Integer,
    pub eta_measured: f64,
    pub eta_error_bar: f64,
    pub eta_bound: Option<f64>,
    pub window_ok: bool,
    pub degenerate: bool,
    pub precision_bits: u32,
    pub verdict: Verdict,
}

fn sci(x: &Float) -> String {
    format!("{:.20e}", x)
}

/// Measures `eta_t` for one matrix and compares it with the bound.
pub fn bound_report(
    matrix: &CouplingMatrix,
    time: &Time,
    max_precision: u32,
) -> Result<BoundReport> {
    let n = matrix.n();
    let j_max = matrix.j_max();
    let window_ok = in_validity_window(n, j_max, time);
    let bound = window_ok.then(|| eta_bound(n, j_max, time)).transpose()?;
    let target = bound.as_ref().filter(|b| **b > 0).map(|b| {
        let mut t = certify::up(b);
        t *= ERROR_BAR_FRACTION;
        t
    });
    let policy = PrecisionPolicy {
        max_bits: max_precision,
        target_error: target,
        ..Default::default()
    };
    let (measurement, resolved) = match eta_measured(matrix, time, &policy) {
        Ok(m) => (m, true),
        Err(Error::PrecisionExhausted { .. }) => {
            let relaxed = PrecisionPolicy {
                initial_bits: max_precision,
                max_bits: max_precision,
                target_error: None,
            };
            (eta_measured(matrix, time, &relaxed)?, false)
        }
        Err(e) => return Err(e),
    };

    let verdict = match &bound {
        None => Verdict::OutsideWindow,
        Some(_) if measurement.degenerate => Verdict::Pass,
        Some(_) if !resolved => Verdict::Unresolved,
        Some(b) => {
            let abs = Float::with_val(measurement.precision, &*measurement.value.as_abs());
            let hi = certify::add_up(&certify::up(&abs), &measurement.error_bar);
            let lo = Float::with_val(measurement.precision, &abs - &measurement.error_bar);
            if hi <= *b {
                Verdict::Pass
            } else if lo > *b {
                Verdict::Fail
            } else {
                Verdict::Unresolved
            }
        }
    };

    Ok(BoundReport {
        n,
        j_max,
        time: time.to_f64(),
        p_exact: sci(&measurement.p_exact),
        p_exact_error: sci(&measurement.p_exact_error),
        p_leading: sci(&Float::with_val(BOUND_PRECISION, &measurement.p_leading)),
        permanent: measurement.permanent,
        eta_measured: measurement.value.to_f64(),
        eta_error_bar: measurement.error_bar.to_f64(),
        eta_bound: bound.as_ref().map(Float::to_f64),
        window_ok,
        degenerate: measurement.degenerate,
        precision_bits: measurement.precision,
        verdict,
    })
}

/// Parameters of a seeded verification sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub instances: usize,
    pub entries: Vec<i64>,
    pub epsilon: Rational,
    pub seed: u64,
    pub max_precision: u32,
    pub exec: Execution,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub report: BoundReport,
}

/// Runs the bound check on `instances` random matrices per size at
/// `t = time_threshold(n, max |entry|, epsilon)`.
///
/// Instance `k` of size `n` uses seed `seed + k` with
/// [`random_matrix`]. Rows come back ordered by `(n, seed)`.
pub fn verify_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let entry_max = config
        .entries
        .iter()
        .map(|e| e.unsigned_abs())
        .max()
        .unwrap_or(0);
    let mut jobs = Vec::new();
    for &n in &config.n_values {
        let time = time_threshold(n, entry_max.max(1), &config.epsilon)?;
        for k in 0..config.instances {
            jobs.push((n, config.seed.wrapping_add(k as u64), time.clone()));
        }
    }
    let rows = config.exec.map_indexed(jobs.len(), |idx| {
        let (n, seed, ref time) = jobs[idx];
        let matrix = random_matrix(n, &config.entries, seed)?;
        let report = bound_report(&matrix, time, config.max_precision)?;
        Ok(SweepRow { n, seed, report })
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Time {
        Time::parse(s).unwrap()
    }

    #[test]
    fn bound_examples() {
        assert_eq!(eta_bound_exact(1, 1, &t("0.1")), Rational::from((6, 100)));
        assert_eq!(eta_bound(1, 1, &t("0.1")).unwrap().to_f64(), 0.06);
        assert_eq!(
            eta_bound_exact(2, 1, &t("0.01")),
            Rational::from((6144, 10000))
        );
        assert!(matches!(
            eta_bound(1, 1, &t("1")),
            Err(Error::OutsideWindow { .. })
        ));
        // Window edge: t = 1/sqrt(2) is outside only by irrationality; 0.7 is inside.
        assert!(eta_bound(1, 1, &t("0.7")).is_ok());
        assert!(eta_bound(1, 1, &t("0.71")).is_err());
    }

    #[test]
    fn bound_includes_coupling_scale() {
        // j = 5, N = 1: 6 (5t)^2 * 25.
        assert_eq!(
            eta_bound_exact(1, 5, &t("0.01")),
            Rational::from((375, 1000))
        );
    }

    #[test]
    fn threshold_examples() {
        let eps = Rational::from((6, 100));
        assert_eq!(
            *time_threshold(1, 1, &eps).unwrap().as_rational(),
            Rational::from((1, 10))
        );
        let eps = Rational::from((6144, 10000));
        assert_eq!(
            *time_threshold(2, 1, &eps).unwrap().as_rational(),
            Rational::from((1, 100))
        );

        let eps = Rational::from((1, 10));
        let quarter = Rational::from((1, 40));
        for n in 1..=6 {
            let a = time_threshold(n, 1, &eps).unwrap().to_f64();
            let b = time_threshold(n, 1, &quarter).unwrap().to_f64();
            assert!((a / b - 2.0).abs() < 1e-12, "n = {n}");
        }
        // Window binding for n = 1, eps = 10: window cap 1/sqrt(2).
        let capped = time_threshold(1, 1, &Rational::from(10)).unwrap();
        assert!((capped.to_f64() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(in_validity_window(1, 1, &capped));
        assert!(time_threshold(1, 1, &Rational::new()).is_err());
        assert!(time_threshold(1, 0, &eps).is_err());
    }

    #[test]
    fn single_coupling_eta() {
        let m = CouplingMatrix::filled(1, 1).unwrap();
        let e = eta_measured(&m, &t("0.1"), &PrecisionPolicy::default()).unwrap();
        let sin = Float::with_val(256, Rational::from((1, 10))).sin();
        let exact = Float::with_val(256, sin.square_ref()) * 100u32 - 1u32;
        assert!(Float::with_val(256, &e.value - &exact).abs() <= e.error_bar);
        assert!((e.value.to_f64() + 3.3289e-3).abs() < 1e-7);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let m = CouplingMatrix::filled(1, 0).unwrap();
        let e = eta_measured(&m, &t("0.1"), &PrecisionPolicy::default()).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.value, 0);
        let r = bound_report(&m, &t("0.1"), 256).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.degenerate);
        assert!(eta_measured(&m, &Time::zero(), &PrecisionPolicy::default()).is_err());
    }

    #[test]
    fn escalation_reaches_target_or_reports_exhaustion() {
        let m = CouplingMatrix::identity(3).unwrap();
        let time = time_threshold(3, 1, &Rational::from((1, 10))).unwrap();
        let bound = eta_bound(3, 1, &time).unwrap();
        let target = Float::with_val(64, &bound * 1e-15);
        let policy = PrecisionPolicy {
            target_error: Some(target.clone()),
            ..Default::default()
        };
        let e = eta_measured(&m, &time, &policy).unwrap();
        assert!(e.error_bar < target);
        assert!(e.precision > 64);

        let starved = PrecisionPolicy {
            max_bits: 64,
            target_error: Some(target),
            ..Default::default()
        };
        assert!(matches!(
            eta_measured(&m, &time, &starved),
            Err(Error::PrecisionExhausted { .. })
        ));
    }

    #[test]
    fn report_outside_window() {
        let m = CouplingMatrix::filled(1, 1).unwrap();
        let r = bound_report(&m, &t("1"), 256).unwrap();
        assert_eq!(r.verdict, Verdict::OutsideWindow);
        assert!(r.eta_bound.is_none());
    }

    #[test]
    fn literal_rescaling_understates_eta() {
        // With j = 5 the formula without the j^{2N} factor is violated:
        // eta = sin^2(5t)/t^2 - 25 ~ -625 t^2 / 3, against 6 (5t)^2 = 150 t^2.
        let m = CouplingMatrix::filled(1, 5).unwrap();
        let time = t("0.01");
        let e = eta_measured(&m, &time, &PrecisionPolicy::default()).unwrap();
        let literal = 6.0 * (5.0 * 0.01f64).powi(2);
        assert!(e.value.to_f64().abs() > literal);
        let r = bound_report(&m, &time, 256).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn sweep_rows_are_ordered_and_pass() {
        let cfg = SweepConfig {
            n_values: vec![1, 2, 3],
            instances: 6,
            entries: vec![-1, 0, 1],
            epsilon: Rational::from((1, 10)),
            seed: 11,
            max_precision: DEFAULT_MAX_PRECISION,
            exec: Execution::default(),
        };
        let rows = verify_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 18);
        let keys: Vec<(usize, u64)> = rows.iter().map(|r| (r.n, r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(rows.iter().all(|r| r.report.verdict == Verdict::Pass));
    }
}
