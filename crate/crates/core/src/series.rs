//! Power series of the transition amplitude from exact z-basis state vectors.
//!
//! Each term `J[i][j] X_i X_{N+j}` of `H` flips bit `i` and bit `N + j`, so
//! repeated application to the all-down basis vector yields the integer
//! moments `mu_m = <target|H^m|down...down>` directly. The amplitude is then
//!
//! ```text
//! M_t = sum_m (-it)^m mu_m / m!
//! ```
//!
//! where only orders with the right parity survive. For the all-up target
//! these are `m = N + 2 alpha`, and `mu_N = N! per(J)`.

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::certify;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{full_mask, CouplingMatrix, SpinConfiguration, Time};
use crate::permanent::{permanent_fast, serialize_integer};
use crate::spectrum::{check_config_bits, moment_from_spectrum, signed_spectrum, MIN_PRECISION};

/// Limit on `2N` for dense state vectors (`2^24` big integers).
pub const SERIES_MAX_CONFIG_BITS: u32 = 24;
/// Largest size accepted by [`leading_coefficient_check`].
pub const LEADING_CHECK_MAX_N: usize = 6;

/// Applies `H` to an integer state vector indexed by z-basis masks.
pub fn apply_hamiltonian(matrix: &CouplingMatrix, state: &[Integer]) -> Result<Vec<Integer>> {
    apply_hamiltonian_with(matrix, state, Execution::default())
}

pub fn apply_hamiltonian_with(
    matrix: &CouplingMatrix,
    state: &[Integer],
    exec: Execution,
) -> Result<Vec<Integer>> {
    let mut out = vec![Integer::new(); state.len()];
    apply_into(matrix, state, &mut out, exec)?;
    Ok(out)
}

fn apply_into(
    matrix: &CouplingMatrix,
    state: &[Integer],
    out: &mut [Integer],
    exec: Execution,
) -> Result<()> {
    let n = matrix.n();
    let bits = check_config_bits(n, SERIES_MAX_CONFIG_BITS, "state-vector bits (2N)")?;
    let len = 1usize << bits;
    if state.len() != len {
        return Err(Error::SizeMismatch {
            expected: len,
            actual: state.len(),
        });
    }
    let terms: Vec<(usize, Integer)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| matrix.get(i, j) != 0)
        .map(|(i, j)| {
            (
                (1usize << i) | (1usize << (n + j)),
                Integer::from(matrix.get(i, j)),
            )
        })
        .collect();

    // Gather: each output entry reads its N^2 double-flip neighbours.
    let chunk = (len / 256).max(1);
    exec.for_each_chunk_mut(out, chunk, |c, slice| {
        let base = c * chunk;
        for (k, acc) in slice.iter_mut().enumerate() {
            let x = base + k;
            acc.assign_zero();
            for (flip, j) in &terms {
                let src = &state[x ^ flip];
                if *src != 0 {
                    *acc += src * j;
                }
            }
        }
    });
    Ok(())
}

trait AssignZero {
    fn assign_zero(&mut self);
}

impl AssignZero for Integer {
    fn assign_zero(&mut self) {
        rug::Assign::assign(self, 0);
    }
}

/// Exact moments `mu_0 ..= mu_{m_max}` for one target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentSequence {
    pub n: usize,
    pub j_max: u64,
    pub target: SpinConfiguration,
    pub moments: Vec<Integer>,
}

impl MomentSequence {
    pub fn m_max(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn get(&self, m: usize) -> Option<&Integer> {
        self.moments.get(m)
    }

    /// Lowest order that can be nonzero, or `None` when parity forbids every order.
    ///
    /// Every application of `H` flips one spin in each register, so after
    /// `m` steps both registers have up-counts congruent to `m` mod 2.
    pub fn lowest_order(&self) -> Option<usize> {
        let (a, b) = (self.target.ups_a(), self.target.ups_b());
        (a % 2 == b % 2).then_some(a.max(b) as usize)
    }

    /// The moments as decimal strings.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::from(
            self.moments
                .iter()
                .map(Integer::to_string)
                .collect::<Vec<_>>(),
        )
    }
}

pub fn moment_sequence(
    matrix: &CouplingMatrix,
    target: SpinConfiguration,
    m_max: usize,
) -> Result<MomentSequence> {
    moment_sequence_with(matrix, target, m_max, Execution::default())
}

pub fn moment_sequence_with(
    matrix: &CouplingMatrix,
    target: SpinConfiguration,
    m_max: usize,
    exec: Execution,
) -> Result<MomentSequence> {
    let n = matrix.n();
    if target.n() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: target.n(),
        });
    }
    let bits = check_config_bits(n, SERIES_MAX_CONFIG_BITS, "state-vector bits (2N)")?;
    let len = 1usize << bits;
    debug_assert_eq!(len as u64 - 1, full_mask(n));
    let idx = target.bits() as usize;

    let mut state = vec![Integer::new(); len];
    state[0] = Integer::from(1);
    let mut next = vec![Integer::new(); len];
    let mut moments = Vec::with_capacity(m_max + 1);
    moments.push(state[idx].clone());
    for _ in 0..m_max {
        apply_into(matrix, &state, &mut next, exec)?;
        std::mem::swap(&mut state, &mut next);
        moments.push(state[idx].clone());
    }
    Ok(MomentSequence {
        n,
        j_max: matrix.j_max(),
        target,
        moments,
    })
}

/// A truncated series value with its certified truncation tail.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesEvaluation {
    pub re: Float,
    pub im: Float,
    pub precision: u32,
    pub alpha_max: usize,
    /// Highest order included.
    pub top_order: usize,
    /// Bound on the omitted orders; `None` outside the validity window.
    pub tail_bound: Option<Float>,
    /// Bound on the final rounding to `precision` bits.
    pub rounding_error: Float,
}

/// Exact `t^2 j_max^2 <= 1/(2 N^4)`.
pub fn in_validity_window(n: usize, j_max: u64, time: &Time) -> bool {
    let x = scaled_time(n, j_max, time);
    Rational::from(x.square_ref()) * 2u32 <= 1
}

/// `x = N^2 j_max t`, the per-order growth factor of the moment bound.
fn scaled_time(n: usize, j_max: u64, time: &Time) -> Rational {
    time.as_rational().clone() * Integer::from(n * n) * j_max
}

fn factorial(m: usize) -> Integer {
    Integer::from(Integer::factorial(m as u32))
}

/// `(-i)^m` as `(re, im)`.
fn minus_i_pow(m: usize) -> (i32, i32) {
    match m % 4 {
        0 => (1, 0),
        1 => (0, -1),
        2 => (-1, 0),
        _ => (0, 1),
    }
}

/// Sums `(-it)^m mu_m / m!` over the `alpha_max + 1` lowest allowed orders.
///
/// The sum is formed exactly in rationals and rounded once. The tail after
/// the top order `m*` is bounded by `x^{m*+2} / (m*+2)! / (1 - x^2)` with
/// `x = N^2 j_max t`, available when `x^2 <= 1/2`.
pub fn series_amplitude(
    moments: &MomentSequence,
    time: &Time,
    alpha_max: usize,
    precision: u32,
) -> Result<SeriesEvaluation> {
    if precision < MIN_PRECISION {
        return Err(Error::InvalidArgument(format!(
            "precision {precision} must be at least {MIN_PRECISION} bits"
        )));
    }
    let Some(lowest) = moments.lowest_order() else {
        // Parity forbids every order: the amplitude vanishes identically.
        return Ok(SeriesEvaluation {
            re: Float::new(precision),
            im: Float::new(precision),
            precision,
            alpha_max,
            top_order: 0,
            tail_bound: Some(certify::zero()),
            rounding_error: certify::zero(),
        });
    };
    let top = lowest + 2 * alpha_max;
    if moments.m_max() < top {
        return Err(Error::InvalidArgument(format!(
            "series to order {top} needs moments through {top}, have {}",
            moments.m_max()
        )));
    }
    let t = time.as_rational();
    let mut re = Rational::new();
    let mut im = Rational::new();
    for m in (lowest..=top).step_by(2) {
        let coeff = Rational::from((moments.moments[m].clone(), factorial(m)))
            * Rational::from(t.pow(m as i32));
        match minus_i_pow(m) {
            (1, 0) => re += coeff,
            (-1, 0) => re -= coeff,
            (0, -1) => im -= coeff,
            _ => im += coeff,
        }
    }
    let re_f = Float::with_val(precision, &re);
    let im_f = Float::with_val(precision, &im);
    let u = certify::unit(precision);
    let rounding_error = certify::add_up(
        &certify::mul_up(&certify::up(&*re_f.as_abs()), &u),
        &certify::mul_up(&certify::up(&*im_f.as_abs()), &u),
    );

    let tail_bound = in_validity_window(moments.n, moments.j_max, time).then(|| {
        let x = scaled_time(moments.n, moments.j_max, time);
        let x2 = Rational::from(x.square_ref());
        let lead = x.pow((top + 2) as i32) / factorial(top + 2);
        certify::up(&(lead / (1 - x2)))
    });

    Ok(SeriesEvaluation {
        re: re_f,
        im: im_f,
        precision,
        alpha_max,
        top_order: top,
        tail_bound,
        rounding_error,
    })
}

/// Outcome of comparing `mu_N` from both engines with `N! per(J)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeadingCoefficientReport {
    pub n: usize,
    #[serde(serialize_with = "serialize_integer")]
    pub permanent: Integer,
    #[serde(serialize_with = "serialize_integer")]
    pub n_factorial_times_permanent: Integer,
    #[serde(serialize_with = "serialize_integer")]
    pub mu_n_state_vector: Integer,
    #[serde(serialize_with = "serialize_integer")]
    pub mu_n_spectrum: Integer,
    pub agrees: bool,
}

/// Checks the lowest-order coefficient `mu_N = N! per(J)` on both routes.
pub fn leading_coefficient_check(matrix: &CouplingMatrix) -> Result<LeadingCoefficientReport> {
    let n = matrix.n();
    if n > LEADING_CHECK_MAX_N {
        return Err(Error::ResourceGuard {
            what: "leading-coefficient check size",
            requested: n as u64,
            limit: LEADING_CHECK_MAX_N as u64,
        });
    }
    let target = SpinConfiguration::all_up(n);
    let seq = moment_sequence(matrix, target, n)?;
    let spectrum = signed_spectrum(matrix, target)?;
    let mu_spec = moment_from_spectrum(&spectrum, n as u32)?;
    let permanent = permanent_fast(matrix).value;
    let expected = factorial(n) * &permanent;
    let mu_sv = seq.moments[n].clone();
    Ok(LeadingCoefficientReport {
        n,
        agrees: mu_sv == expected && mu_spec == expected,
        permanent,
        n_factorial_times_permanent: expected,
        mu_n_state_vector: mu_sv,
        mu_n_spectrum: mu_spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::amplitude_at;

    fn unit_vector(n: usize, at: usize) -> Vec<Integer> {
        let mut v = vec![Integer::new(); 1 << (2 * n)];
        v[at] = Integer::from(1);
        v
    }

    #[test]
    fn single_coupling_flips_both_spins() {
        let m = CouplingMatrix::filled(1, 1).unwrap();
        let once = apply_hamiltonian(&m, &unit_vector(1, 0)).unwrap();
        assert_eq!(once, unit_vector(1, 3));
        let twice = apply_hamiltonian(&m, &once).unwrap();
        assert_eq!(twice, unit_vector(1, 0));
    }

    #[test]
    fn all_ones_scatters_to_double_flips() {
        let m = CouplingMatrix::filled(2, 1).unwrap();
        let out = apply_hamiltonian(&m, &unit_vector(2, 0)).unwrap();
        // Term-by-term oracle: J_ij flips bit i and bit 2 + j.
        let mut expected = vec![Integer::new(); 16];
        for i in 0..2 {
            for j in 0..2 {
                expected[(1 << i) | (1 << (2 + j))] += m.get(i, j);
            }
        }
        assert_eq!(out, expected);
        assert_eq!(out.iter().filter(|v| **v == 1).count(), 4);
    }

    #[test]
    fn guards_and_shape_errors() {
        let m = CouplingMatrix::identity(2).unwrap();
        assert!(apply_hamiltonian(&m, &unit_vector(1, 0)).is_err());
        let big = CouplingMatrix::identity(13).unwrap();
        assert!(moment_sequence(&big, SpinConfiguration::all_up(13), 1)
            .unwrap_err()
            .is_resource_guard());
    }

    #[test]
    fn moment_examples() {
        let m = CouplingMatrix::filled(1, 1).unwrap();
        let seq = moment_sequence(&m, SpinConfiguration::all_up(1), 5).unwrap();
        assert_eq!(seq.moments, [0, 1, 0, 1, 0, 1]);

        let id = CouplingMatrix::identity(2).unwrap();
        let seq = moment_sequence(&id, SpinConfiguration::all_up(2), 2).unwrap();
        assert_eq!(seq.moments[2], 2);

        let mat = CouplingMatrix::from_rows(&[vec![3, -1], vec![2, 5]]).unwrap();
        let seq = moment_sequence(&mat, SpinConfiguration::all_down(2), 0).unwrap();
        assert_eq!(seq.moments, [1]);
        assert_eq!(seq.to_json().to_string(), r#"["1"]"#);
    }

    #[test]
    fn matchings_are_the_permanent_terms() {
        // Enumerate every ordered product of N terms; keep those that flip
        // each spin exactly once. Their total is N! per(J).
        let mat =
            CouplingMatrix::from_rows(&[vec![1, 2, 0], vec![-1, 1, 3], vec![2, 0, 1]]).unwrap();
        let n = 3;
        let mut total = 0i64;
        for code in 0..(n * n).pow(n as u32) {
            let mut c = code;
            let mut flipped = 0u32;
            let mut prod = 1i64;
            for _ in 0..n {
                let (i, j) = ((c % (n * n)) / n, c % n);
                c /= n * n;
                flipped ^= (1 << i) | (1 << (n + j));
                prod *= mat.get(i, j);
            }
            if flipped == (1 << (2 * n)) - 1 && prod != 0 {
                // Only matchings reach all-up in exactly N flips.
                total += prod;
            }
        }
        let seq = moment_sequence(&mat, SpinConfiguration::all_up(n), n).unwrap();
        assert_eq!(seq.moments[n], total);
        assert_eq!(
            Integer::from(total),
            factorial(n) * permanent_fast(&mat).value
        );
    }

    #[test]
    fn leading_checks() {
        let r = leading_coefficient_check(&CouplingMatrix::identity(3).unwrap()).unwrap();
        assert!(r.agrees);
        assert_eq!(r.mu_n_state_vector, 6);

        let r = leading_coefficient_check(
            &CouplingMatrix::from_rows(&[vec![1, -1], vec![1, 1]]).unwrap(),
        )
        .unwrap();
        assert!(r.agrees);
        assert_eq!(r.mu_n_spectrum, 0);

        let r = leading_coefficient_check(&CouplingMatrix::filled(3, 1).unwrap()).unwrap();
        assert!(r.agrees);
        assert_eq!(r.mu_n_state_vector, 36);

        assert!(leading_coefficient_check(&CouplingMatrix::identity(7).unwrap()).is_err());
    }

    #[test]
    fn sine_series() {
        let m = CouplingMatrix::filled(1, 1).unwrap();
        let seq = moment_sequence(&m, SpinConfiguration::all_up(1), 5).unwrap();
        let t = Time::parse("0.1").unwrap();
        let ev = series_amplitude(&seq, &t, 2, 128).unwrap();
        assert_eq!(ev.top_order, 5);
        assert_eq!(ev.re, 0);
        let expected = -(0.1 - 0.1f64.powi(3) / 6.0 + 0.1f64.powi(5) / 120.0);
        assert!((ev.im.to_f64() - expected).abs() < 1e-16);
        let sin = Float::with_val(256, rug::Rational::from((1, 10))).sin();
        let diff = Float::with_val(256, &ev.im + &sin).abs();
        let tail = ev.tail_bound.clone().unwrap();
        assert!(diff <= certify::add_up(&tail, &ev.rounding_error));
        // x^7/7!/(1 - x^2) with x = 0.1.
        assert!((tail.to_f64() - 1e-7 / 5040.0 / 0.99).abs() < 1e-22);
    }

    #[test]
    fn leading_term_only() {
        let mat = CouplingMatrix::from_rows(&[vec![1, 2], vec![3, 4]]).unwrap();
        let seq = moment_sequence(&mat, SpinConfiguration::all_up(2), 2).unwrap();
        let t = Time::parse("0.01").unwrap();
        let ev = series_amplitude(&seq, &t, 0, 64).unwrap();
        // (-it)^2 per = -t^2 * 10.
        assert_eq!(ev.re, Float::with_val(64, rug::Rational::from((-1, 1000))));
        assert_eq!(ev.im, 0);
        // Window: t^2 16 * 2 * 16 = 0.0512 <= 1 holds.
        assert!(ev.tail_bound.is_some());

        let late = Time::parse("0.1").unwrap();
        assert!(series_amplitude(&seq, &late, 0, 64)
            .unwrap()
            .tail_bound
            .is_none());
        assert!(series_amplitude(&seq, &t, 1, 64).is_err());
    }

    #[test]
    fn zero_time_and_forbidden_targets() {
        let mat = CouplingMatrix::filled(2, 1).unwrap();
        let seq = moment_sequence(&mat, SpinConfiguration::all_up(2), 6).unwrap();
        let ev = series_amplitude(&seq, &Time::zero(), 2, 64).unwrap();
        assert_eq!(ev.re, 0);
        assert_eq!(ev.im, 0);

        // One up spin in A only: every order vanishes.
        let odd = SpinConfiguration::new(2, 0b0001).unwrap();
        let seq = moment_sequence(&mat, odd, 6).unwrap();
        assert!(seq.moments.iter().all(|m| *m == 0));
        assert_eq!(seq.lowest_order(), None);
    }

    #[test]
    fn general_target_series_matches_spectrum() {
        let mat = CouplingMatrix::from_rows(&[vec![1, -1], vec![0, 1]]).unwrap();
        let target = SpinConfiguration::new(2, 0b0101).unwrap();
        let seq = moment_sequence(&mat, target, 12).unwrap();
        assert_eq!(seq.lowest_order(), Some(1));
        let t = Time::parse("0.05").unwrap();
        let ev = series_amplitude(&seq, &t, 5, 128).unwrap();
        let amp = amplitude_at(&signed_spectrum(&mat, target).unwrap(), &t, 128).unwrap();
        let bar = certify::add_up(
            &certify::add_up(ev.tail_bound.as_ref().unwrap(), &ev.rounding_error),
            &amp.guaranteed_abs_error,
        );
        assert!(Float::with_val(128, &ev.re - &amp.re).abs() <= bar);
        assert!(Float::with_val(128, &ev.im - &amp.im).abs() <= bar);
    }

    #[test]
    fn execution_modes_agree() {
        let mat =
            CouplingMatrix::from_rows(&[vec![1, -1, 0], vec![2, 1, 1], vec![0, -1, 1]]).unwrap();
        let a = moment_sequence_with(&mat, SpinConfiguration::all_up(3), 7, Execution::Sequential)
            .unwrap();
        let b = moment_sequence_with(&mat, SpinConfiguration::all_up(3), 7, Execution::Parallel)
            .unwrap();
        assert_eq!(a, b);
    }
}
