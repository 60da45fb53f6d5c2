//! Shared fixtures for the criterion benchmarks.

use ezgp::harness::{replication, Example};
use ezgp::{normalize_quantitative, Dataset, ModelKind, ModelParams};

/// Normalized Example 4 training data (81 runs) and the first `n` rows of it.
pub fn example4(n: usize) -> Dataset {
    let d = normalize_quantitative(&replication(Example::Ex4, 0, 0).expect("fixed protocol").train);
    let idx: Vec<usize> = (0..n.min(d.len())).collect();
    d.subset(&idx).expect("valid rows")
}

/// The optimizer's canonical starting point for `kind` on `d`.
pub fn params(kind: ModelKind, d: &Dataset) -> ModelParams {
    ModelParams::canonical(kind, d.schema(), d.response_variance())
}
