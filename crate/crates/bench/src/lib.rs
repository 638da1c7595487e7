//! Seeded inputs shared by the benchmarks.

use unlearn_core::harness::{generate_synthetic, Bounds, SyntheticKind};
use unlearn_core::mst::random_connected_graph;
use unlearn_core::svm::MarginDistribution;
use unlearn_core::{rng, Dataset, ScalarSample, WeightedGraph};

pub fn blob(n: usize, d: usize, seed: u64) -> Dataset {
    let kind = SyntheticKind::GaussianBlob { d, separation: 1.0 };
    generate_synthetic(&kind, n, &Bounds::default(), seed)
        .and_then(|s| s.into_dataset())
        .expect("blob fixture")
}

pub fn centered_blob(n: usize, d: usize, seed: u64) -> Dataset {
    unlearn_core::harness::center_for_pca(&blob(n, d, seed)).expect("centered fixture")
}

pub fn margin_data(n: usize, d: usize, gamma: f64, seed: u64) -> Dataset {
    MarginDistribution::new(d, gamma, 1.0)
        .and_then(|m| m.sample(n, &mut rng::seeded(seed)))
        .expect("margin fixture")
}

pub fn graph(n: usize, p: f64, seed: u64) -> WeightedGraph {
    random_connected_graph(n, p, 1.0, false, &mut rng::seeded(seed)).expect("graph fixture")
}

pub fn scalars(n: usize, seed: u64) -> ScalarSample {
    generate_synthetic(&SyntheticKind::UniformScalar, n, &Bounds::default(), seed)
        .and_then(|s| s.into_scalars())
        .expect("scalar fixture")
}
