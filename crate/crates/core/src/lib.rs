//! Exact numerics for bipartite Ising quenches.
//!
//! Two registers of `N` spins each start all down and evolve under
//! `H = sum_{i,j} J[i][j] X_i X_{N+j}` with integer couplings `J`. To lowest
//! order in `t`, the amplitude of the all-up outcome is `(-it)^N per(J)`.
//! This crate computes that amplitude and the full outcome distribution
//! exactly, along three independent routes:
//!
//! * [`spectrum`]: an x-basis signed energy histogram, evaluated at any time
//!   and precision with certified error bars;
//! * [`series`]: exact integer moments `<target|H^m|down>` from repeated
//!   application of `H` to a z-basis state vector;
//! * [`distribution`]: a Walsh-Hadamard route to all `4^N` probabilities,
//!   with a seeded sampler.
//!
//! [`permanent`] provides the exact permanents the routes are compared
//! against, and [`bounds`] checks the relative error `eta_t` of the
//! leading-order prediction against its analytic bound.

pub mod bounds;
mod certify;
pub mod distribution;
pub mod error;
pub mod exec;
pub mod instances;
pub mod model;
pub mod permanent;
pub mod series;
pub mod spectrum;

pub use bounds::{
    bound_report, eta_bound, eta_measured, time_threshold, verify_sweep, BoundReport,
    EtaMeasurement, PrecisionPolicy, SweepConfig, SweepRow, Verdict,
};
pub use distribution::{
    empirical_check, full_distribution, sample, sample_with, EmpiricalReport, OutcomeDistribution,
    SampleBatch, SamplerMethod,
};
pub use error::{Error, ParseErrorKind, Result};
pub use exec::Execution;
pub use instances::random_matrix;
pub use model::{
    energy_of, energy_of_mask, load_matrix, nonzero_order_parity, parse_matrix, parse_matrix_json,
    CouplingMatrix, QuenchSpec, SpinConfiguration, Time,
};
pub use permanent::{permanent_fast, permanent_naive, PermanentAlgorithm, PermanentResult};
pub use series::{
    apply_hamiltonian, leading_coefficient_check, moment_sequence, series_amplitude,
    LeadingCoefficientReport, MomentSequence, SeriesEvaluation,
};
pub use spectrum::{
    amplitude_adaptive, amplitude_at, moment_from_spectrum, probability_at, signed_spectrum,
    Amplitude, Probability, SignedEnergySpectrum,
};

pub use rug;
