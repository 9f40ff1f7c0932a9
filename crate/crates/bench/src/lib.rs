//! Inputs shared by the criterion benches.

use bsmf::{DenseMatrix, SocialGraph, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Non-negative matrix with roughly `density` of its entries set.
pub fn random_endorsements(n_sources: usize, n_claims: usize, density: f64, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(n_sources, n_claims, |_, _| if rng.gen_bool(density) { rng.gen() } else { 0.0 })
}

/// Directed retweet counts, `out_degree` distinct targets per node.
pub fn random_graph(n: usize, out_degree: usize, seed: u64) -> SocialGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n * out_degree);
    for i in 0..n {
        let mut targets = rand::seq::index::sample(&mut rng, n - 1, out_degree.min(n - 1)).into_vec();
        targets.sort_unstable();
        for t in targets {
            let j = if t >= i { t + 1 } else { t };
            entries.push((i, j, f64::from(rng.gen_range(1u8..5))));
        }
    }
    SocialGraph::new(SparseMatrix::from_triplets(n, n, entries).expect("valid triplets")).expect("valid graph")
}
