//! Shared fixtures for the benchmarks.

use jdag_core::{simulate, GroupedDataset, GroupedWeights, SimSpec, WeightMatrix};
use nalgebra::DMatrix;

/// Centered K-group data of dimension `d` with `n` rows per group.
pub fn dataset(k: usize, d: usize, n: usize, seed: u64) -> GroupedDataset {
    let sim = simulate(&SimSpec {
        k,
        d,
        n,
        seed,
        ..SimSpec::default()
    })
    .expect("valid spec");
    GroupedDataset::unlabeled(sim.data)
        .expect("consistent shapes")
        .centered()
}

/// Small dense off-diagonal weights, deterministic in `(k, d)`.
pub fn weights(k: usize, d: usize) -> GroupedWeights {
    let mats = (0..k)
        .map(|g| {
            let m = DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    0.0
                } else {
                    0.05 * (((i * 7 + j * 13 + g * 3) % 11) as f64 - 5.0) / 5.0
                }
            });
            WeightMatrix::new(m).expect("zero diagonal")
        })
        .collect();
    GroupedWeights::new(mats).expect("same shapes")
}
