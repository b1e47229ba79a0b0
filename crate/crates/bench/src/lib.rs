//! Shared fixtures for the kernel benchmarks in `benches/kernels.rs`.

use kfree_core::TupleConfig;

/// The configurations benchmarked: squarefree numbers, twin squarefree
/// numbers and cube-free triples.
pub fn fixture_configs() -> Vec<(&'static str, TupleConfig)> {
    vec![
        ("k2_h0", TupleConfig::new(2, &[0]).expect("valid")),
        ("k2_h01", TupleConfig::new(2, &[0, 1]).expect("valid")),
        ("k3_h012", TupleConfig::new(3, &[0, 1, 2]).expect("valid")),
    ]
}
