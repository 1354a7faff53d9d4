//! Seeded random coupling matrices for sweeps and tests.
//!
//! Generator: ChaCha8 from `rand_chacha` 0.9, seeded with `seed_from_u64(seed)`
//! and switched to stream `n`, so the same seed gives unrelated matrices for
//! different sizes. Entries are drawn row-major as `entries[next_u64() % len]`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::CouplingMatrix;

/// The `{-1, 0, 1}` entry set.
pub const UNIT_ENTRIES: [i64; 3] = [-1, 0, 1];

pub fn random_matrix(n: usize, entries: &[i64], seed: u64) -> Result<CouplingMatrix> {
    if entries.is_empty() {
        return Err(Error::InvalidArgument("entry set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    let len = entries.len() as u64;
    let values = (0..n * n)
        .map(|_| entries[(rng.next_u64() % len) as usize])
        .collect();
    CouplingMatrix::new(n, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_in_range() {
        let a = random_matrix(4, &UNIT_ENTRIES, 7).unwrap();
        let b = random_matrix(4, &UNIT_ENTRIES, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_matrix(4, &UNIT_ENTRIES, 8).unwrap());
        assert!(a.entries().iter().all(|e| UNIT_ENTRIES.contains(e)));
        assert!(random_matrix(2, &[], 0).is_err());
        let spread = random_matrix(10, &UNIT_ENTRIES, 1).unwrap();
        for v in UNIT_ENTRIES {
            assert!(spread.entries().contains(&v));
        }
    }
}
