//! Shared fixtures for the criterion benchmarks.

use famar_core::sim::{generate, GeneratedData, SimConfig};

/// A mid-sized synthetic dataset reused across benchmarks.
pub fn bench_dataset() -> (SimConfig, GeneratedData) {
    let config = SimConfig {
        n: 200,
        n_pretrain: 100,
        n_new: 0,
        p1: 20,
        p2: 20,
        seed: 1234,
        replications: 1,
        ..SimConfig::experiment_base()
    };
    let data = generate(&config, 0).expect("valid benchmark recipe");
    (config, data)
}
