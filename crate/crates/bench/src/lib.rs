//! Shared fixtures for the benchmarks in `benches/`.

use wigner_core::{sample_matrix, EnsembleSpec, EntryDistribution, SymmetricMatrix};

/// Rademacher ensemble with w = 1.
pub fn rademacher() -> EnsembleSpec {
    EnsembleSpec::paper_symmetric(EntryDistribution::rademacher(1.0).expect("valid scale")).expect("valid spec")
}

/// Replica 0 of size n under a fixed seed.
pub fn fixture_matrix(n: usize) -> SymmetricMatrix {
    sample_matrix(&rademacher(), n, 0x5eed, 0).expect("sampling succeeds")
}
