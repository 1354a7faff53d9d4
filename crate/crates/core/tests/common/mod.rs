#![allow(dead_code)]

use ising_quench::CouplingMatrix;
use proptest::prelude::*;

/// Square matrices of size `sizes` with entries in `lo..=hi`.
pub fn matrix(
    sizes: std::ops::RangeInclusive<usize>,
    lo: i64,
    hi: i64,
) -> impl Strategy<Value = CouplingMatrix> {
    sizes.prop_flat_map(move |n| {
        prop::collection::vec(lo..=hi, n * n).prop_map(move |e| CouplingMatrix::new(n, e).unwrap())
    })
}

pub fn unit_matrix(
    sizes: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = CouplingMatrix> {
    matrix(sizes, -1, 1)
}

pub fn swap_mask(bits: u64, n: usize) -> u64 {
    ((bits & ((1 << n) - 1)) << n) | (bits >> n)
}
