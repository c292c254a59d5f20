//! Shared fixtures for the benchmarks in `benches/`.

use disc_core::sbm::{sample_sbm, two_graph_specs, SbmInstance};
use disc_core::synth::{generate, Problem, ToySpec};
use disc_core::DataMatrix;

/// The two datasets of the newly-connected toy problem with `n` samples.
pub fn toy_pair(n: usize) -> (DataMatrix, DataMatrix) {
    let mut toy = generate(&ToySpec::new(Problem::NewlyConnected).with_n(n)).expect("valid toy spec");
    let b = toy.datasets.pop().unwrap();
    let a = toy.datasets.pop().unwrap();
    (a, b)
}

/// A sampled `[l, l, s]` block model with `p = 0.8`, `q = 0.2`.
pub fn sbm_b(l: usize, s: usize) -> SbmInstance {
    let (_, b) = two_graph_specs(l, s, 0.8, 0.2, 0).expect("valid block sizes");
    sample_sbm(&b).expect("valid spec")
}
