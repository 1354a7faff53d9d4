//! Domain types for the bipartite Ising quench: coupling matrices, z-basis
//! spin configurations, and exactly stored evolution times.
//!
//! The Hamiltonian is `H = sum_{i,j} J[i][j] X_i X_{N+j}`: site `i` of
//! register A couples to site `j` of register B. Sites `0..N` are register A
//! and `N..2N` are register B, both in the bit layout of a
//! [`SpinConfiguration`] and in x-basis sign masks.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseErrorKind, Result};

/// Largest register size whose configurations fit a 64-bit mask.
pub const MAX_REGISTER: usize = 32;

/// The `N x N` integer coupling matrix `J`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<i64>,
    j_max: u64,
}

impl CouplingMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(n: usize, entries: Vec<i64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("size must be at least 1".into()));
        }
        if n > MAX_REGISTER {
            return Err(Error::InvalidMatrix(format!(
                "size {n} exceeds the supported maximum {MAX_REGISTER}"
            )));
        }
        if entries.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                actual: entries.len(),
            });
        }
        let j_max = entries.iter().map(|e| e.unsigned_abs()).max().unwrap_or(0);
        Ok(Self { n, entries, j_max })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let n = rows.len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {} has {} entries, expected {n}",
                    r + 1,
                    row.len()
                )));
            }
        }
        Self::new(n, rows.concat())
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, (0..n * n).map(|k| i64::from(k % (n + 1) == 0)).collect())
    }

    pub fn filled(n: usize, value: i64) -> Result<Self> {
        Self::new(n, vec![value; n * n])
    }

    /// Register size `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Maximum absolute entry.
    pub fn j_max(&self) -> u64 {
        self.j_max
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.n).map(<[i64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let entries = (0..n * n).map(|k| self.get(k % n, k / n)).collect();
        Self {
            n,
            entries,
            j_max: self.j_max,
        }
    }

    /// `sum |J[i][j]|`, an upper bound on `|E|` for every sign vector.
    pub fn abs_sum(&self) -> u128 {
        self.entries
            .iter()
            .map(|e| u128::from(e.unsigned_abs()))
            .sum()
    }

    /// Largest possible energy magnitude as an `i64`, if it fits.
    pub(crate) fn energy_bound_i64(&self) -> Option<i64> {
        i64::try_from(self.abs_sum()).ok()
    }

    /// Canonical text form: the size line followed by space-separated rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for row in self.entries.chunks(self.n) {
            let line: Vec<String> = row.iter().map(i64::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "n": self.n, "entries": self.rows() })
    }
}

#[derive(Deserialize)]
struct JsonMatrix {
    n: usize,
    entries: Vec<Vec<i64>>,
}

/// Parses the text matrix format.
///
/// Lines starting with `#` and blank lines are skipped. The first remaining
/// line holds `N`; the next `N` lines hold `N` signed integers each.
pub fn parse_matrix(source: &str) -> Result<CouplingMatrix> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, 1, ParseErrorKind::MissingHeader))?;
    let header_col = column_of(header, header.trim());
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let n = match tokens.as_slice() {
        [tok] if tok.bytes().all(|b| b.is_ascii_digit()) => tok.parse::<usize>().map_err(|_| {
            Error::parse(
                header_line,
                header_col,
                ParseErrorKind::MalformedHeader(tok.to_string()),
            )
        })?,
        _ => {
            return Err(Error::parse(
                header_line,
                header_col,
                ParseErrorKind::MalformedHeader(header.trim().to_string()),
            ))
        }
    };
    if n == 0 {
        return Err(Error::parse(
            header_line,
            header_col,
            ParseErrorKind::ZeroSize,
        ));
    }
    if n > MAX_REGISTER {
        return Err(Error::parse(
            header_line,
            header_col,
            ParseErrorKind::MalformedHeader(format!("{n} exceeds maximum size {MAX_REGISTER}")),
        ));
    }

    let mut entries = Vec::with_capacity(n * n);
    let mut last_line = header_line;
    for row in 1..=n {
        let Some((line_no, line)) = lines.next() else {
            return Err(Error::parse(
                last_line + 1,
                1,
                ParseErrorKind::MissingRows {
                    found: row - 1,
                    expected: n,
                },
            ));
        };
        last_line = line_no;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != n {
            return Err(Error::parse(
                line_no,
                column_of(line, line.trim()),
                ParseErrorKind::RowLength {
                    row,
                    found: tokens.len(),
                    expected: n,
                },
            ));
        }
        for tok in tokens {
            entries.push(
                parse_entry(tok)
                    .map_err(|kind| Error::parse(line_no, column_of(line, tok), kind))?,
            );
        }
    }
    if let Some((line_no, line)) = lines.next() {
        return Err(Error::parse(
            line_no,
            column_of(line, line.trim()),
            ParseErrorKind::TrailingContent,
        ));
    }
    CouplingMatrix::new(n, entries)
}

/// Parses the JSON matrix form `{"n": N, "entries": [[...], ...]}`.
pub fn parse_matrix_json(source: &str) -> Result<CouplingMatrix> {
    let parsed: JsonMatrix = serde_json::from_str(source)
        .map_err(|e| Error::parse(e.line(), e.column(), ParseErrorKind::Json(e.to_string())))?;
    if parsed.n == 0 {
        return Err(Error::parse(1, 1, ParseErrorKind::ZeroSize));
    }
    if parsed.entries.len() != parsed.n {
        return Err(Error::parse(
            1,
            1,
            ParseErrorKind::MissingRows {
                found: parsed.entries.len(),
                expected: parsed.n,
            },
        ));
    }
    for (r, row) in parsed.entries.iter().enumerate() {
        if row.len() != parsed.n {
            return Err(Error::parse(
                1,
                1,
                ParseErrorKind::RowLength {
                    row: r + 1,
                    found: row.len(),
                    expected: parsed.n,
                },
            ));
        }
    }
    CouplingMatrix::from_rows(&parsed.entries)
}

/// Reads a matrix file, using the JSON form for `.json` extensions.
pub fn load_matrix(path: &Path) -> std::io::Result<Result<CouplingMatrix>> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    Ok(if is_json {
        parse_matrix_json(&text)
    } else {
        parse_matrix(&text)
    })
}

fn parse_entry(tok: &str) -> std::result::Result<i64, ParseErrorKind> {
    let digits = tok.strip_prefix(['-', '+']).unwrap_or(tok);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseErrorKind::NotAnInteger(tok.to_string()));
    }
    tok.parse::<i64>()
        .map_err(|_| ParseErrorKind::EntryOverflow(tok.to_string()))
}

/// 1-based column of `part` inside `line`; `part` must be a subslice.
fn column_of(line: &str, part: &str) -> usize {
    (part.as_ptr() as usize).saturating_sub(line.as_ptr() as usize) + 1
}

impl FromStr for CouplingMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_matrix(s)
    }
}

impl fmt::Display for CouplingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A z-basis outcome over the `2N` sites. Bit `k` set means site `k` is up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfiguration {
    n: usize,
    bits: u64,
}

impl SpinConfiguration {
    pub fn new(n: usize, bits: u64) -> Result<Self> {
        if n == 0 || n > MAX_REGISTER {
            return Err(Error::InvalidArgument(format!(
                "register size {n} outside 1..={MAX_REGISTER}"
            )));
        }
        if bits & !full_mask(n) != 0 {
            return Err(Error::InvalidArgument(format!(
                "mask {bits:#x} uses bits beyond the {} sites",
                2 * n
            )));
        }
        Ok(Self { n, bits })
    }

    pub fn all_down(n: usize) -> Self {
        Self { n, bits: 0 }
    }

    pub fn all_up(n: usize) -> Self {
        Self {
            n,
            bits: full_mask(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn is_all_up(&self) -> bool {
        self.bits == full_mask(self.n)
    }

    pub fn is_all_down(&self) -> bool {
        self.bits == 0
    }

    /// Number of up spins in register A.
    pub fn ups_a(&self) -> u32 {
        (self.bits & low_mask(self.n)).count_ones()
    }

    /// Number of up spins in register B.
    pub fn ups_b(&self) -> u32 {
        (self.bits >> self.n).count_ones()
    }

    /// Exchanges the two register bit-blocks.
    pub fn swap_registers(&self) -> Self {
        Self {
            n: self.n,
            bits: swap_mask(self.bits, self.n),
        }
    }

    /// Parses `all-up`, `all-down`, or a `2N`-character bitstring.
    pub fn parse(n: usize, text: &str) -> Result<Self> {
        match text {
            "all-up" => Ok(Self::all_up(n)),
            "all-down" => Ok(Self::all_down(n)),
            bitstring => {
                let cfg = Self::from_bitstring(bitstring)?;
                if cfg.n != n {
                    return Err(Error::SizeMismatch {
                        expected: 2 * n,
                        actual: bitstring.len(),
                    });
                }
                Ok(cfg)
            }
        }
    }

    /// Character `k` is site `k`: register A first, then register B.
    pub fn from_bitstring(text: &str) -> Result<Self> {
        let len = text.len();
        if len == 0 || !len.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "bitstring {text:?} must have an even, nonzero length"
            )));
        }
        let mut bits = 0u64;
        for (k, c) in text.chars().enumerate() {
            match c {
                '1' => bits |= 1 << k,
                '0' => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "bitstring {text:?} contains {c:?}"
                    )))
                }
            }
        }
        Self::new(len / 2, bits)
    }

    pub fn to_bitstring(&self) -> String {
        bitstring(self.bits, self.n)
    }
}

impl fmt::Display for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

impl Serialize for SpinConfiguration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bitstring())
    }
}

pub(crate) fn bitstring(bits: u64, n: usize) -> String {
    (0..2 * n)
        .map(|k| if bits >> k & 1 == 1 { '1' } else { '0' })
        .collect()
}

#[inline]
pub(crate) fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[inline]
pub(crate) fn full_mask(n: usize) -> u64 {
    low_mask(2 * n)
}

pub(crate) fn swap_mask(bits: u64, n: usize) -> u64 {
    ((bits & low_mask(n)) << n) | (bits >> n)
}

/// x-basis energy `E(s) = sum_{i,j} J[i][j] s_i s_{N+j}` of a `+-1` sign vector.
pub fn energy_of(matrix: &CouplingMatrix, signs: &[i8]) -> Result<i128> {
    let n = matrix.n();
    if signs.len() != 2 * n {
        return Err(Error::SizeMismatch {
            expected: 2 * n,
            actual: signs.len(),
        });
    }
    if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
        return Err(Error::InvalidArgument(format!(
            "sign {bad} is not +1 or -1"
        )));
    }
    let (a, b) = signs.split_at(n);
    let mut energy = 0i128;
    for (i, &sa) in a.iter().enumerate() {
        let field: i128 = matrix
            .row(i)
            .iter()
            .zip(b)
            .map(|(&j, &sb)| i128::from(j) * i128::from(sb))
            .sum();
        energy += i128::from(sa) * field;
    }
    Ok(energy)
}

/// Energy of the sign vector encoded by `mask` (bit `k` set means `s_k = -1`).
pub fn energy_of_mask(matrix: &CouplingMatrix, mask: u64) -> i128 {
    let signs: Vec<i8> = (0..2 * matrix.n())
        .map(|k| if mask >> k & 1 == 1 { -1 } else { 1 })
        .collect();
    energy_of(matrix, &signs).expect("mask-derived sign vector has length 2N")
}

/// Whether `<all-up| H^m |all-down>` can be nonzero: `m >= n` and `m - n` even.
pub fn nonzero_order_parity(m: u64, n: u64) -> bool {
    m >= n && (m - n).is_multiple_of(2)
}

/// A nonnegative evolution time, held as an exact rational.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Time(Rational);

impl Time {
    pub fn zero() -> Self {
        Time(Rational::new())
    }

    /// Exact conversion; every finite `f64` is a dyadic rational.
    pub fn from_f64(t: f64) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidTime(t.to_string()));
        }
        Ok(Time(Rational::from_f64(t).expect("finite")))
    }

    pub fn from_rational(t: Rational) -> Result<Self> {
        if t < 0 {
            return Err(Error::InvalidTime(t.to_string()));
        }
        Ok(Time(t))
    }

    /// Parses a decimal (`0.1`, `2.5e-3`) or a ratio (`1/3`).
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidTime(text.to_string());
        let s = text.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p: Integer = p.trim().parse().map_err(|_| bad())?;
            let q: Integer = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            return Self::from_rational(Rational::from((p, q))).map_err(|_| bad());
        }
        let s = s.strip_prefix('+').unwrap_or(s);
        let (mantissa, exponent) = match s.find(['e', 'E']) {
            Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (s, 0),
        };
        if exponent.unsigned_abs() > 100_000 {
            return Err(bad());
        }
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part
            .bytes()
            .chain(frac_part.bytes())
            .all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let digits: Integer = format!("0{int_part}{frac_part}")
            .parse()
            .map_err(|_| bad())?;
        let scale = exponent - i32::try_from(frac_part.len()).map_err(|_| bad())?;
        let ten = Integer::from(10);
        let value = if scale >= 0 {
            Rational::from(digits * ten.pow(scale.unsigned_abs()))
        } else {
            Rational::from((digits, ten.pow(scale.unsigned_abs())))
        };
        Ok(Time(value))
    }

    pub fn as_rational(&self) -> &Rational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0
    }

    /// Nearest `f64`.
    pub fn to_f64(&self) -> f64 {
        rug::Float::with_val(53, &self.0).to_f64()
    }

    /// Digits after the point when the value is a terminating decimal.
    fn decimal_places(&self) -> Option<u32> {
        let mut d = self.0.denom().clone();
        let twos = d.find_one(0).unwrap_or(0);
        d >>= twos;
        let mut fives = 0;
        while d.is_divisible_u(5) {
            d /= 5u32;
            fives += 1;
        }
        (d == 1).then_some(twos.max(fives))
    }
}

impl FromStr for Time {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Time::parse(s)
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decimal_places() {
            Some(0) => write!(f, "{}", self.0.numer()),
            Some(places) if places <= 40 => {
                let scaled = (self.0.numer() * Integer::from(10u32).pow(places)) / self.0.denom();
                let digits = format!(
                    "{:0>width$}",
                    scaled.to_string(),
                    width = places as usize + 1
                );
                let (int, frac) = digits.split_at(digits.len() - places as usize);
                write!(f, "{int}.{frac}")
            }
            _ => write!(f, "{:e}", self.to_f64()),
        }
    }
}

/// A matrix together with an evolution time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuenchSpec {
    pub matrix: CouplingMatrix,
    pub time: Time,
}

impl QuenchSpec {
    pub fn new(matrix: CouplingMatrix, time: Time) -> Self {
        Self { matrix, time }
    }
}
