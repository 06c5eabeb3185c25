//! Criterion benchmarks for `ssnmf-core`; see `benches/`.
//!
//! Shared fixtures live here so every bench target builds identical inputs.

use ssnmf_core::datagen::{self, SyntheticInstance, SyntheticSpec};

/// Synthetic instance with the default band count and `r = 10`.
pub fn fixture(n: usize, epsilon: f64, seed: u64) -> SyntheticInstance {
    let spec = SyntheticSpec {
        n,
        epsilon,
        seed,
        ..Default::default()
    };
    datagen::generate(&spec).expect("fixture parameters are valid")
}
