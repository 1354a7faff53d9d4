//! Exact integer permanents.
//!
//! [`permanent_fast`] is Ryser's inclusion-exclusion formula
//!
//! ```text
//! per(A) = (-1)^n sum_{S nonempty} (-1)^|S| prod_i sum_{j in S} a_ij
//! ```
//!
//! with column subsets visited in Gray-code order, so consecutive subsets
//! differ by one column and the row sums update in `O(n)`. The subset space is
//! cut into a fixed number of contiguous Gray-code ranges; each range restarts
//! from directly computed row sums, which makes the ranges independent work
//! units. [`permanent_naive`] sums over all `n!` permutations and exists as
//! the test oracle.

use rug::Integer;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exec::{split_range, Execution};
use crate::model::CouplingMatrix;

/// Largest size accepted by [`permanent_naive`].
pub const NAIVE_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PermanentAlgorithm {
    GrayCodeInclusionExclusion,
    NaivePermutationSum,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PermanentResult {
    #[serde(serialize_with = "serialize_integer")]
    pub value: Integer,
    pub n: usize,
    pub algorithm: PermanentAlgorithm,
}

pub(crate) fn serialize_integer<S: Serializer>(
    v: &Integer,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Sum of signed products, kept in `i128` until it would overflow.
#[derive(Default)]
struct Accumulator {
    small: i128,
    big: Integer,
}

impl Accumulator {
    #[inline]
    fn add_small(&mut self, v: i128) {
        match self.small.checked_add(v) {
            Some(s) => self.small = s,
            None => {
                self.big += self.small;
                self.small = v;
            }
        }
    }

    fn add_big(&mut self, v: Integer) {
        self.big += v;
    }

    fn finish(self) -> Integer {
        self.big + self.small
    }
}

/// Product of the row sums, exact.
enum Product {
    Small(i128),
    Big(Integer),
}

#[inline]
fn product(row_sums: &[i128]) -> Product {
    let mut acc: i128 = 1;
    for (k, &r) in row_sums.iter().enumerate() {
        match acc.checked_mul(r) {
            Some(p) => acc = p,
            None => {
                let mut big = Integer::from(acc);
                for &r in &row_sums[k..] {
                    big *= r;
                }
                return Product::Big(big);
            }
        }
    }
    Product::Small(acc)
}

#[inline]
fn gray(k: u64) -> u64 {
    k ^ (k >> 1)
}

/// Ryser sum over Gray-code indices `range` (each index `k` names subset `gray(k)`).
fn ryser_range(matrix: &CouplingMatrix, range: std::ops::Range<u64>) -> Integer {
    let n = matrix.n();
    let mut acc = Accumulator::default();
    if range.is_empty() {
        return acc.finish();
    }
    let mut subset = gray(range.start);
    let mut row_sums: Vec<i128> = (0..n)
        .map(|i| {
            matrix
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| subset >> j & 1 == 1)
                .map(|(_, &a)| i128::from(a))
                .sum()
        })
        .collect();

    let visit = |subset: u64, row_sums: &[i128], acc: &mut Accumulator| {
        // Sign (-1)^(n - |S|).
        let negate = (n as u32 - subset.count_ones()) % 2 == 1;
        match product(row_sums) {
            Product::Small(p) => acc.add_small(if negate { -p } else { p }),
            Product::Big(p) => acc.add_big(if negate { -p } else { p }),
        }
    };

    visit(subset, &row_sums, &mut acc);
    for k in range.start + 1..range.end {
        let col = k.trailing_zeros() as usize;
        let added = gray(k) >> col & 1 == 1;
        subset ^= 1 << col;
        for (i, r) in row_sums.iter_mut().enumerate() {
            let a = i128::from(matrix.get(i, col));
            if added {
                *r += a;
            } else {
                *r -= a;
            }
        }
        visit(subset, &row_sums, &mut acc);
    }
    acc.finish()
}

/// Exact permanent by Gray-code Ryser, using the default execution strategy.
pub fn permanent_fast(matrix: &CouplingMatrix) -> PermanentResult {
    permanent_fast_with(matrix, Execution::default())
}

pub fn permanent_fast_with(matrix: &CouplingMatrix, exec: Execution) -> PermanentResult {
    let n = matrix.n();
    // Subset 0 contributes a product of zero row sums; start at 1.
    let total = (1u64 << n) - 1;
    let parts = 1u64 << n.saturating_sub(4).min(10);
    let ranges = split_range(total, parts);
    let partials = exec.map_indexed(ranges.len(), |p| {
        let r = &ranges[p];
        ryser_range(matrix, r.start + 1..r.end + 1)
    });
    let value = partials.into_iter().fold(Integer::new(), |acc, v| acc + v);
    PermanentResult {
        value,
        n,
        algorithm: PermanentAlgorithm::GrayCodeInclusionExclusion,
    }
}

/// Exact permanent as a direct sum over all `n!` permutations (Heap's order).
pub fn permanent_naive(matrix: &CouplingMatrix) -> Result<PermanentResult> {
    let n = matrix.n();
    if n > NAIVE_MAX_N {
        return Err(Error::ResourceGuard {
            what: "naive permanent size",
            requested: n as u64,
            limit: NAIVE_MAX_N as u64,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut counters = vec![0usize; n];
    let mut small: i128 = 0;
    let mut big = Integer::new();

    let mut term = |perm: &[usize]| {
        // prod_j a[perm(j)][j]
        let mut p: Option<i128> = Some(1);
        for (j, &i) in perm.iter().enumerate() {
            p = p.and_then(|p| p.checked_mul(i128::from(matrix.get(i, j))));
        }
        match p.and_then(|p| small.checked_add(p)) {
            Some(s) => small = s,
            None => {
                let mut exact = Integer::from(1);
                for (j, &i) in perm.iter().enumerate() {
                    exact *= matrix.get(i, j);
                }
                big += exact;
            }
        }
    };

    term(&perm);
    let mut k = 0;
    while k < n {
        if counters[k] < k {
            if k % 2 == 0 {
                perm.swap(0, k);
            } else {
                perm.swap(counters[k], k);
            }
            term(&perm);
            counters[k] += 1;
            k = 0;
        } else {
            counters[k] = 0;
            k += 1;
        }
    }
    Ok(PermanentResult {
        value: big + small,
        n,
        algorithm: PermanentAlgorithm::NaivePermutationSum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;

    fn m(rows: &[Vec<i64>]) -> CouplingMatrix {
        CouplingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn fast_examples() {
        assert_eq!(
            permanent_fast(&CouplingMatrix::identity(3).unwrap()).value,
            1
        );
        assert_eq!(
            permanent_fast(&CouplingMatrix::filled(4, 1).unwrap()).value,
            24
        );
        assert_eq!(permanent_fast(&m(&[vec![1, -1], vec![1, 1]])).value, 0);
        assert_eq!(permanent_fast(&m(&[vec![1, 2], vec![3, 4]])).value, 10);
        assert_eq!(permanent_fast(&m(&[vec![-3]])).value, -3);
    }

    #[test]
    fn naive_examples() {
        assert_eq!(
            permanent_naive(&CouplingMatrix::identity(2).unwrap())
                .unwrap()
                .value,
            1
        );
        assert_eq!(
            permanent_naive(&CouplingMatrix::filled(3, 0).unwrap())
                .unwrap()
                .value,
            0
        );
        assert_eq!(
            permanent_naive(&m(&[vec![1, 2], vec![3, 4]]))
                .unwrap()
                .value,
            10
        );
        assert_eq!(
            permanent_naive(&CouplingMatrix::filled(5, 1).unwrap())
                .unwrap()
                .value,
            120
        );
        let err = permanent_naive(&CouplingMatrix::identity(13).unwrap()).unwrap_err();
        assert!(err.is_resource_guard());
    }

    #[test]
    fn all_ones_is_factorial() {
        let mut fact = Integer::from(1);
        for n in 1..=20usize {
            fact *= n as u32;
            assert_eq!(
                permanent_fast(&CouplingMatrix::filled(n, 1).unwrap()).value,
                fact
            );
        }
    }

    #[test]
    fn overflowing_products_fall_back_to_big_integers() {
        // per(c * ones(n)) = n! c^n, far outside i128 here.
        let c = i64::MAX;
        let expected = Integer::from(6) * Integer::from(c).pow(3);
        let big = CouplingMatrix::filled(3, c).unwrap();
        assert_eq!(permanent_fast(&big).value, expected);
        assert_eq!(permanent_naive(&big).unwrap().value, expected);

        let neg = CouplingMatrix::filled(3, i64::MIN).unwrap();
        let expected = Integer::from(6) * Integer::from(i64::MIN).pow(3);
        assert_eq!(permanent_fast(&neg).value, expected);
        assert_eq!(permanent_naive(&neg).unwrap().value, expected);
    }

    #[test]
    fn execution_modes_agree() {
        let mat =
            CouplingMatrix::new(9, (0..81).map(|k| (k * 7 % 5) as i64 - 2).collect()).unwrap();
        let seq = permanent_fast_with(&mat, Execution::Sequential);
        let par = permanent_fast_with(&mat, Execution::Parallel);
        assert_eq!(seq, par);
        assert_eq!(seq.value, permanent_naive(&mat).unwrap().value);
    }
}
