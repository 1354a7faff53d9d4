mod common;

use common::{matrix, swap_mask};
use ising_quench::{
    energy_of, energy_of_mask, parse_matrix, parse_matrix_json, CouplingMatrix, SpinConfiguration,
    Time,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn text_round_trip(m in matrix(1..=8, i64::MIN, i64::MAX)) {
        prop_assert_eq!(parse_matrix(&m.to_text()).unwrap(), m.clone());
        prop_assert_eq!(m.to_string().parse::<CouplingMatrix>().unwrap(), m);
    }

    #[test]
    fn json_round_trip(m in matrix(1..=6, -1000, 1000)) {
        let doc = serde_json::to_string(&m.to_json()).unwrap();
        prop_assert_eq!(parse_matrix_json(&doc).unwrap(), m);
    }

    #[test]
    fn energy_symmetries(m in matrix(1..=6, -5, 5), mask in any::<u64>()) {
        let n = m.n();
        let full = (1u64 << (2 * n)) - 1;
        let mask = mask & full;
        let e = energy_of_mask(&m, mask);
        prop_assert_eq!(energy_of_mask(&m, mask ^ full), e);
        prop_assert_eq!(energy_of_mask(&m, mask ^ ((1 << n) - 1)), -e);
        prop_assert_eq!(energy_of_mask(&m.transpose(), swap_mask(mask, n)), e);
        prop_assert!(e.unsigned_abs() <= m.abs_sum());
    }

    #[test]
    fn bitstrings_round_trip(n in 1usize..=10, bits in any::<u64>()) {
        let c = SpinConfiguration::new(n, bits & ((1 << (2 * n)) - 1)).unwrap();
        prop_assert_eq!(SpinConfiguration::from_bitstring(&c.to_bitstring()).unwrap(), c);
        prop_assert_eq!(c.swap_registers().swap_registers(), c);
        prop_assert_eq!(c.ups_a() + c.ups_b(), c.bits().count_ones());
    }

    #[test]
    fn decimal_times_are_exact(int in 0u32..1000, frac in 0u32..1000) {
        let t = Time::parse(&format!("{int}.{frac:03}")).unwrap();
        let expected = rug::Rational::from((int * 1000 + frac, 1000));
        prop_assert_eq!(t.as_rational(), &expected);
    }
}

#[test]
fn energy_rejects_bad_vectors() {
    let m = CouplingMatrix::identity(2).unwrap();
    assert!(energy_of(&m, &[1, 1, 1]).is_err());
    assert!(energy_of(&m, &[1, 0, 1, 1]).is_err());
    assert_eq!(energy_of(&m, &[1, -1, 1, -1]).unwrap(), 2);
}
