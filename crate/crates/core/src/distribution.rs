//! The full z-basis outcome distribution and a seeded sampler.
//!
//! In the x basis the evolution is diagonal, and the overlaps of x and z
//! product states are Walsh functions. Starting from all down,
//!
//! ```text
//! <x| e^{-iHt} |down> = 2^{-2N} sum_s (-1)^{popcount(x & s)} e^{-itE(s)}
//! ```
//!
//! so the whole amplitude vector is one Walsh-Hadamard transform of the phase
//! vector. The transform runs in place, bit 0 first, and every butterfly is
//! independent within a stage, so results do not depend on the execution
//! strategy.
//!
//! At 53 bits the transform runs on `f64` complex numbers; above that it runs
//! on MPFR floats. Phases are computed once per distinct energy with MPFR and
//! correctly rounded. Probabilities are stored as `f64` either way.
//!
//! Sampling uses ChaCha8 (`rand_chacha` 0.9) seeded with `seed_from_u64`.

use std::fmt::Write as _;

use num_complex::Complex;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::float::Round;
use rug::ops::SubFrom;
use rug::{Float, Rational};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::certify;
use crate::error::{Error, Result};
use crate::exec::{split_range, Execution};
use crate::model::{bitstring, full_mask, CouplingMatrix, Time};
use crate::spectrum::{check_config_bits, MIN_PRECISION};

/// Largest `2N` accepted by [`full_distribution`].
pub const MAX_DISTRIBUTION_BITS: u32 = 28;
/// Largest `2N` for the MPFR transform (precision above 53 bits).
pub const HIGH_PRECISION_MAX_BITS: u32 = 20;
/// Largest precision for the MPFR transform.
pub const MAX_PRECISION: u32 = 1024;
/// Smallest batch [`empirical_check`] accepts.
pub const MIN_CHECK_COUNT: usize = 100;

const BLOCK: usize = 1 << 12;

/// Probabilities of all `4^N` outcomes, indexed by outcome mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    pub n: usize,
    pub probabilities: Vec<f64>,
    pub precision: u32,
    /// Bound on `|sum of probabilities - 1|`, including a compensated sum.
    pub total_mass_error: f64,
    /// Bound on the Euclidean error of the computed amplitude vector.
    pub amplitude_error: f64,
    #[serde(skip)]
    storage_rounding: f64,
}

impl OutcomeDistribution {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probability(&self, mask: u64) -> f64 {
        self.probabilities[mask as usize]
    }

    /// Certified bound on `|probabilities[mask] - exact|`.
    pub fn entry_error(&self, mask: u64) -> f64 {
        let p = self.probability(mask);
        let c = self.storage_rounding;
        let d = self.amplitude_error;
        let amp = (p / (1.0 - c)).sqrt();
        (c * p / (1.0 - c) + (2.0 * amp + d) * d) * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE
    }

    /// Compensated (Neumaier) sum of all probabilities.
    pub fn total_mass(&self) -> f64 {
        neumaier_sum(&self.probabilities)
    }

    pub fn all_up_probability(&self) -> f64 {
        self.probability(full_mask(self.n))
    }

    /// Rows `mask,bitstring,probability` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mask,bitstring,probability\n");
        for (mask, p) in self.probabilities.iter().enumerate() {
            let _ = writeln!(out, "{mask},{},{p:e}", bitstring(mask as u64, self.n));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "precision": self.precision,
            "total_mass_error": self.total_mass_error,
            "amplitude_error": self.amplitude_error,
            "probabilities": self.probabilities,
        })
    }
}

pub(crate) fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

trait Lane: Clone + Send + Sync {
    fn butterfly(a: &mut Self, b: &mut Self);
}

impl Lane for Complex<f64> {
    #[inline]
    fn butterfly(a: &mut Self, b: &mut Self) {
        let (x, y) = (*a, *b);
        *a = x + y;
        *b = x - y;
    }
}

#[derive(Clone)]
struct Wide {
    re: Float,
    im: Float,
}

impl Lane for Wide {
    fn butterfly(a: &mut Self, b: &mut Self) {
        let re = a.re.clone();
        let im = a.im.clone();
        a.re += &b.re;
        a.im += &b.im;
        b.re.sub_from(&re);
        b.im.sub_from(&im);
    }
}

fn butterflies<T: Lane>(block: &mut [T], half: usize) {
    for pair in block.chunks_mut(2 * half) {
        let (lo, hi) = pair.split_at_mut(half);
        lo.iter_mut().zip(hi).for_each(|(a, b)| T::butterfly(a, b));
    }
}

/// Unnormalized in-place Walsh-Hadamard transform, stages in ascending bit order.
fn walsh_hadamard<T: Lane>(data: &mut [T], exec: Execution) {
    let len = data.len();
    let block = BLOCK.min(len);
    exec.for_each_chunk_mut(data, block, |_, chunk| {
        let mut half = 1;
        while half < chunk.len() {
            butterflies(chunk, half);
            half *= 2;
        }
    });
    let mut half = block;
    while half < len {
        for pair in data.chunks_mut(2 * half) {
            let (lo, hi) = pair.split_at_mut(half);
            exec.zip_chunks_mut(lo, hi, BLOCK, |a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| T::butterfly(x, y));
            });
        }
        half *= 2;
    }
}

/// `h[a * n + j] = sum_i J_ij s_i(a)` for every register-A sign mask `a`.
fn register_fields(matrix: &CouplingMatrix) -> Vec<i64> {
    let n = matrix.n();
    let mut fields = Vec::with_capacity(n << n);
    for a in 0..1u64 << n {
        for j in 0..n {
            let h = (0..n).fold(0i64, |acc, i| {
                let term = matrix.get(i, j);
                if a >> i & 1 == 1 {
                    acc.wrapping_sub(term)
                } else {
                    acc.wrapping_add(term)
                }
            });
            fields.push(h);
        }
    }
    fields
}

/// Energy of sign mask `a | b << n`; wrapping is exact since the result fits.
#[inline]
fn mask_energy(fields: &[i64], n: usize, mask: u64) -> i64 {
    let a = (mask & ((1 << n) - 1)) as usize;
    let b = mask >> n;
    let h = &fields[a * n..(a + 1) * n];
    h.iter().enumerate().fold(0i64, |acc, (j, &hj)| {
        if b >> j & 1 == 1 {
            acc.wrapping_sub(hj)
        } else {
            acc.wrapping_add(hj)
        }
    })
}

fn distinct_energies(fields: &[i64], n: usize, bits: u32, exec: Execution) -> Vec<i64> {
    let ranges = split_range(1u64 << bits, 1u64 << bits.min(8));
    let parts = exec.map_indexed(ranges.len(), |p| {
        let mut es: Vec<i64> = ranges[p]
            .clone()
            .map(|m| mask_energy(fields, n, m))
            .collect();
        es.sort_unstable();
        es.dedup();
        es
    });
    let mut all: Vec<i64> = parts.into_iter().flatten().collect();
    all.sort_unstable();
    all.dedup();
    all
}

fn fill_phases<T: Lane>(
    buffer: &mut [T],
    phases: &[T],
    energies: &[i64],
    fields: &[i64],
    n: usize,
    exec: Execution,
) {
    exec.for_each_chunk_mut(buffer, BLOCK, |c, chunk| {
        let base = (c * BLOCK) as u64;
        for (k, slot) in chunk.iter_mut().enumerate() {
            let e = mask_energy(fields, n, base + k as u64);
            let idx = energies
                .binary_search(&e)
                .expect("energy collected in the first pass");
            *slot = phases[idx].clone();
        }
    });
}

fn phase(time: &Time, energy: i64, precision: u32) -> (Float, Float) {
    let theta = Float::with_val(precision, &Rational::from(time.as_rational() * energy));
    let (sin, cos) = theta.sin_cos(Float::new(precision));
    (cos, -sin)
}

/// All `4^N` outcome probabilities at `time`, with the default execution.
pub fn full_distribution(
    matrix: &CouplingMatrix,
    time: &Time,
    precision: u32,
) -> Result<OutcomeDistribution> {
    full_distribution_with(matrix, time, precision, Execution::default())
}

pub fn full_distribution_with(
    matrix: &CouplingMatrix,
    time: &Time,
    precision: u32,
    exec: Execution,
) -> Result<OutcomeDistribution> {
    let n = matrix.n();
    if !(MIN_PRECISION..=MAX_PRECISION).contains(&precision) {
        return Err(Error::InvalidArgument(format!(
            "distribution precision {precision} outside {MIN_PRECISION}..={MAX_PRECISION}"
        )));
    }
    let limit = if precision > MIN_PRECISION {
        HIGH_PRECISION_MAX_BITS
    } else {
        MAX_DISTRIBUTION_BITS
    };
    let bits = check_config_bits(n, limit, "distribution bits (2N)")?;
    let bound = matrix
        .energy_bound_i64()
        .ok_or_else(|| Error::InvalidMatrix("energy range exceeds 64 bits".into()))?;

    let fields = register_fields(matrix);
    let energies = distinct_energies(&fields, n, bits, exec);
    let len = 1usize << bits;
    let scale = -(bits as i32);

    let probabilities: Vec<f64> = if precision == MIN_PRECISION {
        let phases: Vec<Complex<f64>> = exec.map_indexed(energies.len(), |k| {
            let (re, im) = phase(time, energies[k], precision);
            Complex::new(re.to_f64(), im.to_f64())
        });
        let mut buffer = vec![Complex::new(0.0, 0.0); len];
        fill_phases(&mut buffer, &phases, &energies, &fields, n, exec);
        walsh_hadamard(&mut buffer, exec);
        let factor = 2f64.powi(scale);
        buffer
            .iter()
            .map(|z| {
                let (re, im) = (z.re * factor, z.im * factor);
                re * re + im * im
            })
            .collect()
    } else {
        let phases: Vec<Wide> = exec.map_indexed(energies.len(), |k| {
            let (re, im) = phase(time, energies[k], precision);
            Wide { re, im }
        });
        let mut buffer = vec![
            Wide {
                re: Float::new(precision),
                im: Float::new(precision),
            };
            len
        ];
        fill_phases(&mut buffer, &phases, &energies, &fields, n, exec);
        drop(phases);
        walsh_hadamard(&mut buffer, exec);
        exec.map_indexed(len, |k| {
            let z = &buffer[k];
            let mut p = Float::with_val(precision, &z.re * &z.re + &z.im * &z.im);
            p <<= 2 * scale;
            p.to_f64()
        })
    };

    // Euclidean error: phases carry (1 + |tE|) u, each stage adds u.
    let u = certify::unit(precision);
    let theta_max = certify::up(&Rational::from(time.as_rational() * bound));
    let eps0 = certify::mul_up(&certify::add_up(&theta_max, &certify::up(1)), &u);
    let stages = certify::mul_up(&certify::up(1.01 * f64::from(bits)), &u);
    let delta = certify::add_up(
        &eps0,
        &certify::mul_up(&certify::add_up(&eps0, &certify::up(1)), &stages),
    );
    let amplitude_error = delta.to_f64_round(Round::Up);

    // Rounding of |z|^2: three operations at working precision, then f64 storage.
    let u_work = certify::unit(precision).to_f64_round(Round::Up);
    let u_store = f64::EPSILON / 2.0;
    let storage_rounding = if precision == MIN_PRECISION {
        3.0 * u_work
    } else {
        3.0 * u_work + u_store
    } * 1.01;
    let d = amplitude_error;
    let total_mass_error =
        (storage_rounding * (1.0 + d) * (1.0 + d) + 2.0 * d + 3.0 * d * d + 3.0 * u_store)
            * (1.0 + 8.0 * f64::EPSILON)
            + len as f64 * f64::MIN_POSITIVE;

    Ok(OutcomeDistribution {
        n,
        probabilities,
        precision,
        total_mass_error,
        amplitude_error,
        storage_rounding,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    /// Binary search over the prefix sums in ascending mask order.
    #[default]
    InverseCdf,
    /// Walker-Vose alias table over the support.
    Alias,
}

/// Seeded draws from an [`OutcomeDistribution`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleBatch {
    pub n: usize,
    pub seed: u64,
    pub count: usize,
    pub method: SamplerMethod,
    pub outcomes: Vec<u64>,
}

impl SampleBatch {
    /// One bitstring per line, site 0 first.
    pub fn to_lines(&self) -> String {
        let mut out = String::with_capacity(self.outcomes.len() * (2 * self.n + 1));
        for &m in &self.outcomes {
            out.push_str(&bitstring(m, self.n));
            out.push('\n');
        }
        out
    }
}

#[inline]
fn unit_draw(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws `count` outcomes by inverse CDF.
pub fn sample(dist: &OutcomeDistribution, count: usize, seed: u64) -> SampleBatch {
    sample_with(dist, count, seed, SamplerMethod::InverseCdf)
}

pub fn sample_with(
    dist: &OutcomeDistribution,
    count: usize,
    seed: u64,
    method: SamplerMethod,
) -> SampleBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcomes = match method {
        SamplerMethod::InverseCdf => {
            let mut cdf = Vec::with_capacity(dist.len());
            let mut acc = 0.0f64;
            for &p in &dist.probabilities {
                acc += p;
                cdf.push(acc);
            }
            let last = dist
                .probabilities
                .iter()
                .rposition(|&p| p > 0.0)
                .unwrap_or(0);
            (0..count)
                .map(|_| {
                    let u = unit_draw(&mut rng) * acc;
                    cdf.partition_point(|&c| c <= u).min(last) as u64
                })
                .collect()
        }
        SamplerMethod::Alias => {
            let table = AliasTable::new(&dist.probabilities);
            (0..count).map(|_| table.draw(&mut rng)).collect()
        }
    };
    SampleBatch {
        n: dist.n,
        seed,
        count,
        method,
        outcomes,
    }
}

/// Independent batches for several seeds, in seed order.
pub fn sample_seeds(
    dist: &OutcomeDistribution,
    count: usize,
    seeds: &[u64],
    method: SamplerMethod,
    exec: Execution,
) -> Vec<SampleBatch> {
    exec.map_indexed(seeds.len(), |k| sample_with(dist, count, seeds[k], method))
}

struct AliasTable {
    support: Vec<u64>,
    accept: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    fn new(probabilities: &[f64]) -> Self {
        let support: Vec<u64> = (0..probabilities.len() as u64)
            .filter(|&m| probabilities[m as usize] > 0.0)
            .collect();
        let k = support.len();
        let total: f64 = support.iter().map(|&m| probabilities[m as usize]).sum();
        let mut scaled: Vec<f64> = support
            .iter()
            .map(|&m| probabilities[m as usize] / total * k as f64)
            .collect();
        let mut accept = vec![1.0; k];
        let mut alias: Vec<usize> = (0..k).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..k).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            accept[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        Self {
            support,
            accept,
            alias,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> u64 {
        let k = self.support.len();
        if k == 0 {
            return 0;
        }
        let column = ((unit_draw(rng) * k as f64) as usize).min(k - 1);
        let pick = if unit_draw(rng) < self.accept[column] {
            column
        } else {
            self.alias[column]
        };
        self.support[pick]
    }
}

/// Agreement between a batch and the distribution it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub count: usize,
    /// Half the L1 distance between empirical frequencies and the distribution.
    pub total_variation: f64,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    /// `None` when fewer than two bins qualify.
    pub p_value: Option<f64>,
    /// Outcomes seen that have probability zero.
    pub impossible_outcomes: usize,
    pub all_up_probability: f64,
    pub all_up_observed: usize,
    /// Samples needed for a 10% relative standard error on the all-up
    /// probability, `100 (1 - P) / P`. It grows like `1 / P` and is
    /// infinite when `P = 0`.
    pub samples_for_all_up_estimate: f64,
}

/// Total variation distance and a chi-square test over bins with expected
/// count at least 5. Outcomes below that are pooled into one bin; if the
/// pool itself expects fewer than 5, it joins the smallest qualifying bin.
pub fn empirical_check(batch: &SampleBatch, dist: &OutcomeDistribution) -> Result<EmpiricalReport> {
    if batch.count < MIN_CHECK_COUNT || batch.outcomes.len() != batch.count {
        return Err(Error::InvalidArgument(format!(
            "empirical check needs at least {MIN_CHECK_COUNT} samples, got {}",
            batch.outcomes.len()
        )));
    }
    if batch.n != dist.n {
        return Err(Error::SizeMismatch {
            expected: dist.n,
            actual: batch.n,
        });
    }
    let mut observed = vec![0usize; dist.len()];
    for &m in &batch.outcomes {
        observed[m as usize] += 1;
    }
    let total = neumaier_sum(&dist.probabilities);
    let count = batch.count as f64;

    let mut tv = 0.0;
    let mut impossible = 0;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0f64, 0.0f64);
    for (k, &p) in dist.probabilities.iter().enumerate() {
        let p = p / total;
        let o = observed[k] as f64;
        tv += (o / count - p).abs();
        if p == 0.0 && observed[k] > 0 {
            impossible += observed[k];
        }
        let expected = p * count;
        if expected >= 5.0 {
            bins.push((o, expected));
        } else {
            pool.0 += o;
            pool.1 += expected;
        }
    }
    if pool.1 >= 5.0 {
        bins.push(pool);
    } else if pool.1 > 0.0 || pool.0 > 0.0 {
        if let Some(smallest) = bins.iter_mut().min_by(|a, b| a.1.total_cmp(&b.1)) {
            smallest.0 += pool.0;
            smallest.1 += pool.1;
        }
    }
    let chi_square: f64 = bins.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = (dof > 0).then(|| {
        ChiSquared::new(dof as f64)
            .expect("positive degrees of freedom")
            .sf(chi_square)
    });

    let all_up = full_mask(dist.n);
    let p_up = dist.probability(all_up) / total;
    Ok(EmpiricalReport {
        count: batch.count,
        total_variation: tv / 2.0,
        chi_square,
        degrees_of_freedom: dof,
        p_value,
        impossible_outcomes: impossible,
        all_up_probability: p_up,
        all_up_observed: observed[all_up as usize],
        samples_for_all_up_estimate: if p_up > 0.0 {
            100.0 * (1.0 - p_up) / p_up
        } else {
            f64::INFINITY
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{swap_mask, SpinConfiguration};
    use crate::spectrum::{probability_at, signed_spectrum};

    fn t(s: &str) -> Time {
        Time::parse(s).unwrap()
    }

    fn single() -> CouplingMatrix {
        CouplingMatrix::filled(1, 1).unwrap()
    }

    #[test]
    fn single_coupling_closed_form() {
        for prec in [53, 128] {
            let d = full_distribution(&single(), &t("0.7"), prec).unwrap();
            let theta = Float::with_val(256, Rational::from((7, 10)));
            let (s, c) = theta.sin_cos(Float::new(256));
            let close = |p: f64, x: &Float, bar: f64| {
                let diff = Float::with_val(256, x.square_ref()) - p;
                diff.abs() <= bar
            };
            assert!(close(d.probability(0), &c, d.entry_error(0)));
            assert!(close(d.probability(3), &s, d.entry_error(3)));
            assert_eq!(d.probability(1), 0.0);
            assert_eq!(d.probability(2), 0.0);
            assert!((d.total_mass() - 1.0).abs() <= d.total_mass_error);
        }
    }

    #[test]
    fn zero_time_is_a_point_mass() {
        let m = CouplingMatrix::new(2, vec![1, -2, 3, 0]).unwrap();
        let d = full_distribution(&m, &Time::zero(), 53).unwrap();
        assert_eq!(d.probability(0), 1.0);
        assert!(d.probabilities[1..].iter().all(|&p| p == 0.0));
        let batch = sample(&d, 1000, 5);
        assert!(batch.outcomes.iter().all(|&m| m == 0));
    }

    #[test]
    fn all_up_matches_spectrum_route() {
        let m = CouplingMatrix::new(3, vec![1, 0, -1, 1, 1, 0, 0, -1, 1]).unwrap();
        let time = t("0.3");
        let spec = signed_spectrum(&m, SpinConfiguration::all_up(3)).unwrap();
        let exact = probability_at(&spec, &time, 256).unwrap();
        for prec in [53, 200] {
            let d = full_distribution(&m, &time, prec).unwrap();
            let diff = (d.all_up_probability() - exact.value.to_f64()).abs();
            assert!(diff <= d.entry_error(63) + exact.guaranteed_abs_error.to_f64() + 1e-300);
        }
    }

    #[test]
    fn execution_modes_are_bit_identical() {
        let m = CouplingMatrix::new(4, (0..16).map(|k| (k * 5 % 3) as i64 - 1).collect()).unwrap();
        for prec in [53, 96] {
            let a = full_distribution_with(&m, &t("0.9"), prec, Execution::Sequential).unwrap();
            let b = full_distribution_with(&m, &t("0.9"), prec, Execution::Parallel).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn register_swap_permutes_outcomes() {
        let m = CouplingMatrix::new(3, vec![2, 0, -1, 1, 1, 0, 0, -3, 1]).unwrap();
        let a = full_distribution(&m, &t("0.4"), 53).unwrap();
        let b = full_distribution(&m.transpose(), &t("0.4"), 53).unwrap();
        for mask in 0..64u64 {
            let diff = (a.probability(mask) - b.probability(swap_mask(mask, 3))).abs();
            assert!(diff <= a.entry_error(mask) + b.entry_error(swap_mask(mask, 3)));
        }
    }

    #[test]
    fn guards_and_precision_range() {
        let big = CouplingMatrix::identity(15).unwrap();
        assert!(full_distribution(&big, &t("0.1"), 53)
            .unwrap_err()
            .is_resource_guard());
        let mid = CouplingMatrix::identity(11).unwrap();
        assert!(full_distribution(&mid, &t("0.1"), 64)
            .unwrap_err()
            .is_resource_guard());
        assert!(full_distribution(&single(), &t("0.1"), 52).is_err());
        assert!(full_distribution(&single(), &t("0.1"), 2048).is_err());
    }

    #[test]
    fn quarter_period_always_samples_all_up() {
        let half_pi = Time::from_f64(std::f64::consts::FRAC_PI_2).unwrap();
        let d = full_distribution(&single(), &half_pi, 53).unwrap();
        for method in [SamplerMethod::InverseCdf, SamplerMethod::Alias] {
            let batch = sample_with(&d, 500, 3, method);
            assert!(batch.outcomes.iter().all(|&m| m == 3));
        }
    }

    #[test]
    fn sampling_is_reproducible_and_accurate() {
        let d = full_distribution(&single(), &t("0.7"), 53).unwrap();
        for method in [SamplerMethod::InverseCdf, SamplerMethod::Alias] {
            let a = sample_with(&d, 100_000, 42, method);
            let b = sample_with(&d, 100_000, 42, method);
            assert_eq!(a, b);
            assert_eq!(a.to_lines(), b.to_lines());
            assert_ne!(a.outcomes, sample_with(&d, 100_000, 43, method).outcomes);
            let report = empirical_check(&a, &d).unwrap();
            assert!(report.total_variation < 0.01, "{report:?}");
            assert_eq!(report.impossible_outcomes, 0);
            assert_eq!(report.degrees_of_freedom, 1);
        }
    }

    #[test]
    fn chi_square_p_values_are_rarely_small() {
        let m = CouplingMatrix::new(2, vec![1, -1, 1, 1]).unwrap();
        let d = full_distribution(&m, &t("0.8"), 53).unwrap();
        let seeds: Vec<u64> = (0..200).collect();
        let batches = sample_seeds(
            &d,
            2000,
            &seeds,
            SamplerMethod::InverseCdf,
            Execution::default(),
        );
        let small = batches
            .iter()
            .filter(|b| empirical_check(b, &d).unwrap().p_value.unwrap() < 1e-3)
            .count();
        assert!(small <= 2, "{small} of 200 p-values below 1e-3");
    }

    #[test]
    fn check_requires_enough_samples() {
        let d = full_distribution(&single(), &t("0.7"), 53).unwrap();
        assert!(empirical_check(&sample(&d, 99, 1), &d).is_err());
        let report = empirical_check(&sample(&d, 100, 1), &d).unwrap();
        assert!(report.samples_for_all_up_estimate > 100.0);
    }

    #[test]
    fn exports() {
        let d = full_distribution(&single(), &Time::zero(), 53).unwrap();
        assert_eq!(
            d.to_csv(),
            "mask,bitstring,probability\n0,00,1e0\n1,10,0e0\n2,01,0e0\n3,11,0e0\n"
        );
        assert_eq!(
            d.to_json()["probabilities"],
            serde_json::json!([1.0, 0.0, 0.0, 0.0])
        );
        let batch = sample(&d, 2, 0);
        assert_eq!(batch.to_lines(), "00\n00\n");
    }
}
