//! Transition amplitudes through the x-basis spectrum.
//!
//! `H` is diagonal in the x basis: a sign vector `s` (bit `k` set means
//! `s_k = -1`) has energy `E(s) = sum_{i,j} J[i][j] s_i s_{N+j}`. Expanding
//! the all-down initial state and a z-basis target in that basis gives
//!
//! ```text
//! <target| e^{-iHt} |down...down> = 2^{-2N} sum_s (-1)^{popcount(s & target)} e^{-itE(s)}
//! ```
//!
//! Grouping sign vectors by energy yields an integer histogram `w(E)` that
//! describes the amplitude at every `t` at once. Moments
//! `<target|H^m|down...down>` are exact integers `2^{-2N} sum_E w(E) E^m`.

use std::collections::HashMap;

use rug::ops::Pow;
use rug::{Float, Integer};
use serde::Serialize;

use crate::certify;
use crate::error::{Error, Result};
use crate::exec::{split_range, Execution};
use crate::model::{CouplingMatrix, SpinConfiguration, Time};

/// Default limit on `2N` for the spectrum enumeration.
pub const DEFAULT_MAX_CONFIG_BITS: u32 = 28;
/// Hard ceiling on `2N`; weights must stay below `2^62`.
pub const MAX_CONFIG_BITS: u32 = 62;
/// Smallest precision accepted by the floating-point evaluators.
pub const MIN_PRECISION: u32 = 53;

const DENSE_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub max_config_bits: u32,
    pub exec: Execution,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            max_config_bits: DEFAULT_MAX_CONFIG_BITS,
            exec: Execution::default(),
        }
    }
}

/// Integer histogram `E -> w(E)` for one target configuration.
///
/// Weights are exact. Their absolute sum is at most `2^{2N}`, which the
/// configuration guard keeps below `2^62`, so they are stored as `i64`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignedEnergySpectrum {
    n: usize,
    target: SpinConfiguration,
    /// Sorted by energy; zero weights removed.
    weights: Vec<(i64, i64)>,
}

impl SignedEnergySpectrum {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn target(&self) -> SpinConfiguration {
        self.target
    }

    pub fn weights(&self) -> &[(i64, i64)] {
        &self.weights
    }

    pub fn weight(&self, energy: i64) -> i64 {
        self.weights
            .binary_search_by_key(&energy, |&(e, _)| e)
            .map_or(0, |k| self.weights[k].1)
    }

    /// `sum_E |w(E)|`.
    pub fn abs_weight_sum(&self) -> u64 {
        self.weights.iter().map(|&(_, w)| w.unsigned_abs()).sum()
    }

    /// `sum_E w(E)`, which is `2^{2N}` times the amplitude at `t = 0`.
    pub fn weight_sum(&self) -> i64 {
        self.weights.iter().map(|&(_, w)| w).sum()
    }

    pub fn max_abs_energy(&self) -> u64 {
        self.weights
            .iter()
            .map(|&(e, _)| e.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// True when the amplitude vanishes identically in `t`.
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "target": self.target.to_bitstring(),
            "weights": self.weights.iter().map(|&(e, w)| [e, w]).collect::<Vec<_>>(),
        })
    }

    fn config_bits(&self) -> u32 {
        2 * self.n as u32
    }
}

enum Histogram {
    Dense { offset: i64, counts: Vec<i64> },
    Sparse(HashMap<i64, i64>),
}

impl Histogram {
    fn new(bound: i64) -> Self {
        let width = 2 * bound as u64 + 1;
        if width <= DENSE_LIMIT {
            Histogram::Dense {
                offset: bound,
                counts: vec![0; width as usize],
            }
        } else {
            Histogram::Sparse(HashMap::new())
        }
    }

    #[inline]
    fn add(&mut self, energy: i64, w: i64) {
        match self {
            Histogram::Dense { offset, counts } => counts[(energy + *offset) as usize] += w,
            Histogram::Sparse(map) => *map.entry(energy).or_insert(0) += w,
        }
    }

    fn merge(&mut self, other: Histogram) {
        match (self, other) {
            (Histogram::Dense { counts, .. }, Histogram::Dense { counts: o, .. }) => {
                counts.iter_mut().zip(o).for_each(|(a, b)| *a += b);
            }
            (Histogram::Sparse(map), Histogram::Sparse(o)) => {
                for (e, w) in o {
                    *map.entry(e).or_insert(0) += w;
                }
            }
            _ => unreachable!("histograms built with the same bound share a layout"),
        }
    }

    fn into_sorted(self) -> Vec<(i64, i64)> {
        let mut out: Vec<(i64, i64)> = match self {
            Histogram::Dense { offset, counts } => counts
                .into_iter()
                .enumerate()
                .map(|(k, w)| (k as i64 - offset, w))
                .collect(),
            Histogram::Sparse(map) => map.into_iter().collect(),
        };
        out.retain(|&(_, w)| w != 0);
        out.sort_unstable();
        out
    }
}

/// Checks `2N` against `limit`, returning the configuration bit count.
pub(crate) fn check_config_bits(n: usize, limit: u32, what: &'static str) -> Result<u32> {
    let bits = 2 * n as u64;
    let limit = limit.min(MAX_CONFIG_BITS);
    if bits > u64::from(limit) {
        return Err(Error::ResourceGuard {
            what,
            requested: bits,
            limit: u64::from(limit),
        });
    }
    Ok(bits as u32)
}

/// Builds the signed energy spectrum with default options.
pub fn signed_spectrum(
    matrix: &CouplingMatrix,
    target: SpinConfiguration,
) -> Result<SignedEnergySpectrum> {
    signed_spectrum_with(matrix, target, &SpectrumOptions::default())
}

pub fn signed_spectrum_with(
    matrix: &CouplingMatrix,
    target: SpinConfiguration,
    options: &SpectrumOptions,
) -> Result<SignedEnergySpectrum> {
    let n = matrix.n();
    if target.n() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: target.n(),
        });
    }
    let bits = check_config_bits(n, options.max_config_bits, "configuration bits (2N)")?;
    let bound = matrix
        .energy_bound_i64()
        .ok_or_else(|| Error::InvalidMatrix("energy range exceeds 64 bits".into()))?;

    let total = 1u64 << bits;
    let parts = 1u64 << bits.min(8);
    let ranges = split_range(total, parts);
    let target_bits = target.bits();
    let partials = options.exec.map_indexed(ranges.len(), |p| {
        let mut hist = Histogram::new(bound);
        enumerate_range(matrix, target_bits, ranges[p].clone(), &mut hist);
        hist
    });
    let mut merged = Histogram::new(bound);
    for h in partials {
        merged.merge(h);
    }
    Ok(SignedEnergySpectrum {
        n,
        target,
        weights: merged.into_sorted(),
    })
}

/// Walks Gray-code indices `range`, one spin flip per step.
fn enumerate_range(
    matrix: &CouplingMatrix,
    target: u64,
    range: std::ops::Range<u64>,
    hist: &mut Histogram,
) {
    if range.is_empty() {
        return;
    }
    let n = matrix.n();
    let start = range.start ^ (range.start >> 1);
    let sign = |k: usize| -> i64 {
        if start >> k & 1 == 1 {
            -1
        } else {
            1
        }
    };
    let mut sa: Vec<i64> = (0..n).map(sign).collect();
    let mut sb: Vec<i64> = (n..2 * n).map(sign).collect();
    // Fields seen by each register: ha[i] = sum_j J_ij sb_j, hb[j] = sum_i J_ij sa_i.
    // Intermediate values may leave i64 for extreme entries; wrapping
    // arithmetic stays exact because every final value is in range.
    let mut ha: Vec<i64> = (0..n)
        .map(|i| {
            (0..n).fold(0i64, |acc, j| {
                acc.wrapping_add(matrix.get(i, j).wrapping_mul(sb[j]))
            })
        })
        .collect();
    let mut hb: Vec<i64> = (0..n)
        .map(|j| {
            (0..n).fold(0i64, |acc, i| {
                acc.wrapping_add(matrix.get(i, j).wrapping_mul(sa[i]))
            })
        })
        .collect();
    let mut energy = (0..n).fold(0i64, |acc, i| acc.wrapping_add(sa[i].wrapping_mul(ha[i])));
    let mut odd = (start & target).count_ones() % 2 == 1;
    hist.add(energy, if odd { -1 } else { 1 });

    for k in range.start + 1..range.end {
        let bit = k.trailing_zeros() as usize;
        if bit < n {
            let i = bit;
            energy = energy.wrapping_sub(2i64.wrapping_mul(sa[i]).wrapping_mul(ha[i]));
            let s = sa[i];
            for (j, h) in hb.iter_mut().enumerate() {
                *h = h.wrapping_sub(2i64.wrapping_mul(matrix.get(i, j)).wrapping_mul(s));
            }
            sa[i] = -s;
        } else {
            let j = bit - n;
            energy = energy.wrapping_sub(2i64.wrapping_mul(sb[j]).wrapping_mul(hb[j]));
            let s = sb[j];
            for (i, h) in ha.iter_mut().enumerate() {
                *h = h.wrapping_sub(2i64.wrapping_mul(matrix.get(i, j)).wrapping_mul(s));
            }
            sb[j] = -s;
        }
        if target >> bit & 1 == 1 {
            odd = !odd;
        }
        hist.add(energy, if odd { -1 } else { 1 });
    }
}

/// A complex amplitude with a certified bound on `|computed - exact|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitude {
    pub re: Float,
    pub im: Float,
    pub precision: u32,
    pub guaranteed_abs_error: Float,
}

impl Amplitude {
    /// `|re + i im|` at the amplitude's precision.
    pub fn abs(&self) -> Float {
        Float::with_val(self.precision, self.re.hypot_ref(&self.im))
    }

    /// `|re|^2 + |im|^2` at the amplitude's precision.
    pub fn norm_sqr(&self) -> Float {
        let mut p = Float::with_val(self.precision, self.re.square_ref());
        p += Float::with_val(self.precision, self.im.square_ref());
        p
    }

    /// Cancellation check used by the adaptive evaluator.
    pub fn is_resolved(&self) -> bool {
        let mut scaled = self.guaranteed_abs_error.clone();
        scaled <<= 10u32;
        self.guaranteed_abs_error == 0 || self.abs() >= scaled
    }
}

/// A probability with a certified absolute error bar.
#[derive(Debug, Clone, PartialEq)]
pub struct Probability {
    pub value: Float,
    pub precision: u32,
    pub guaranteed_abs_error: Float,
}

fn check_precision(precision: u32) -> Result<()> {
    if precision < MIN_PRECISION || precision > rug::float::prec_max() {
        return Err(Error::InvalidArgument(format!(
            "precision {precision} must be at least {MIN_PRECISION} bits"
        )));
    }
    Ok(())
}

/// Evaluates `2^{-2N} sum_E w(E) e^{-itE}` at `precision` bits.
///
/// Each phase is computed from the exact product `tE`; the terms are added
/// with a correctly rounded sum. The error bar covers the rounding of `tE`,
/// of the sine and cosine, of each weight product, and of the final sum.
pub fn amplitude_at(
    spectrum: &SignedEnergySpectrum,
    time: &Time,
    precision: u32,
) -> Result<Amplitude> {
    check_precision(precision)?;
    let t = time.as_rational();
    let mut re_terms = Vec::with_capacity(spectrum.weights.len());
    let mut im_terms = Vec::with_capacity(spectrum.weights.len());
    // sum |w| (|tE| + 3), exact.
    let mut mass = rug::Rational::new();
    for &(energy, w) in &spectrum.weights {
        let theta = rug::Rational::from(t * energy);
        mass += rug::Rational::from(theta.abs_ref()) * w.unsigned_abs() + 3 * w.unsigned_abs();
        let theta = Float::with_val(precision, &theta);
        let (sin, cos) = theta.sin_cos(Float::new(precision));
        re_terms.push(cos * w);
        im_terms.push(-sin * w);
    }
    let scale = spectrum.config_bits();
    let mut re = Float::with_val(precision, Float::sum(re_terms.iter()));
    let mut im = Float::with_val(precision, Float::sum(im_terms.iter()));
    re >>= scale;
    im >>= scale;

    let u = certify::unit(precision);
    let per_component = |sum: &Float| {
        // 2^{-p} (mass 2^{-2N} + |sum|), doubled to absorb second-order terms.
        let mut scaled_mass = certify::up(&mass);
        scaled_mass >>= scale;
        let e = certify::add_up(&scaled_mass, &certify::abs_up(sum));
        let mut e = certify::mul_up(&e, &u);
        e <<= 1u32;
        e
    };
    let err = if spectrum.is_empty() {
        certify::zero()
    } else {
        certify::add_up(&per_component(&re), &per_component(&im))
    };
    Ok(Amplitude {
        re,
        im,
        precision,
        guaranteed_abs_error: err,
    })
}

/// Starts at 53 bits and doubles the precision (up to `max_precision`) while
/// the result is smaller than `2^10` times its error bar.
pub fn amplitude_adaptive(
    spectrum: &SignedEnergySpectrum,
    time: &Time,
    max_precision: u32,
) -> Result<Amplitude> {
    check_precision(max_precision)?;
    let mut precision = MIN_PRECISION;
    loop {
        let amp = amplitude_at(spectrum, time, precision)?;
        if amp.is_resolved() || precision >= max_precision {
            return Ok(amp);
        }
        log::debug!("amplitude unresolved at {precision} bits, escalating");
        precision = (precision * 2).min(max_precision);
    }
}

/// `|amplitude|^2` with the amplitude's error propagated.
pub fn probability_from_amplitude(amp: &Amplitude) -> Probability {
    let value = amp.norm_sqr();
    // 2|M|d + d^2 + 4 P 2^{-p}
    let d = &amp.guaranteed_abs_error;
    let mut two_m = certify::up(amp.abs());
    two_m <<= 1u32;
    let propagated = certify::mul_up(&certify::add_up(&two_m, d), d);
    let mut rounding = certify::mul_up(&certify::up(&value), &certify::unit(amp.precision));
    rounding <<= 2u32;
    Probability {
        value,
        precision: amp.precision,
        guaranteed_abs_error: certify::add_up(&propagated, &rounding),
    }
}

pub fn probability_at(
    spectrum: &SignedEnergySpectrum,
    time: &Time,
    precision: u32,
) -> Result<Probability> {
    Ok(probability_from_amplitude(&amplitude_at(
        spectrum, time, precision,
    )?))
}

/// Exact moment `<target|H^m|down...down> = 2^{-2N} sum_E w(E) E^m`.
pub fn moment_from_spectrum(spectrum: &SignedEnergySpectrum, m: u32) -> Result<Integer> {
    let mut sum = Integer::new();
    for &(energy, w) in &spectrum.weights {
        sum += Integer::from(energy).pow(m) * w;
    }
    let scale = spectrum.config_bits();
    if !sum.is_divisible_2pow(scale) {
        return Err(Error::Invariant(format!(
            "moment {m} numerator {sum} is not divisible by 2^{scale}"
        )));
    }
    sum >>= scale;
    Ok(sum)
}
