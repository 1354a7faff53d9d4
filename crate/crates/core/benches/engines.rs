use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ising_quench::distribution::full_distribution_with;
use ising_quench::exec::Execution;
use ising_quench::instances::{random_matrix, UNIT_ENTRIES};
use ising_quench::permanent::permanent_fast_with;
use ising_quench::rug::Integer;
use ising_quench::series::apply_hamiltonian_with;
use ising_quench::spectrum::{signed_spectrum_with, SpectrumOptions};
use ising_quench::{SpinConfiguration, Time};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn permanent(c: &mut Criterion) {
    let mut group = c.benchmark_group("permanent_fast");
    for n in [12, 16, 20] {
        let m = random_matrix(n, &UNIT_ENTRIES, 1).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &m, |b, m| {
                b.iter(|| permanent_fast_with(black_box(m), exec))
            });
        }
    }
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("signed_spectrum");
    group.sample_size(10);
    for n in [6, 8, 10] {
        let m = random_matrix(n, &UNIT_ENTRIES, 2).unwrap();
        for (name, exec) in MODES {
            let options = SpectrumOptions {
                exec,
                ..Default::default()
            };
            group.bench_with_input(BenchmarkId::new(name, n), &m, |b, m| {
                b.iter(|| {
                    signed_spectrum_with(black_box(m), SpinConfiguration::all_up(n), &options)
                        .unwrap()
                })
            });
        }
    }
    group.finish();
}

fn hamiltonian(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_hamiltonian");
    group.sample_size(10);
    for n in [4, 6, 8] {
        let m = random_matrix(n, &UNIT_ENTRIES, 3).unwrap();
        let state: Vec<Integer> = (0..1i64 << (2 * n))
            .map(|k| Integer::from(k % 7 - 3))
            .collect();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &state, |b, s| {
                b.iter(|| apply_hamiltonian_with(&m, black_box(s), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn distribution(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_distribution");
    group.sample_size(10);
    let time = Time::parse("0.5").unwrap();
    for n in [4, 6, 8] {
        let m = random_matrix(n, &UNIT_ENTRIES, 4).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &m, |b, m| {
                b.iter(|| full_distribution_with(black_box(m), &time, 53, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, permanent, spectrum, hamiltonian, distribution);
criterion_main!(benches);
