mod common;

use defake_core::graph::Adjacency;
use defake_core::sampler::{estimate_layer_probabilities, sample_layer_nodes};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn corrected_aggregation_is_unbiased() {
    let layer = common::random_layer(50, 0.1, 4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = common::gaussian_matrix(4, 3, &mut rng);
    let worst = common::aggregation_bias(&layer, &w, 20, 2, 100_000, 20_000, 5);
    assert!(worst < 0.02, "worst per-node relative L2 {worst}");
}

#[test]
fn sampled_layers_respect_the_walk_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let n = rng.gen_range(1..80);
        let adj = Adjacency::from_edges(n, &common::sparse_edges(n, 2 * n, &mut rng)).unwrap();
        let (roots, depth) = (rng.gen_range(1..30), rng.gen_range(0..4));
        let nodes = sample_layer_nodes(&adj, roots, depth, &mut rng).unwrap();
        assert!(nodes.len() <= (roots * (depth + 1)).min(n));
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn arc_probabilities_are_symmetric() {
    let layer = common::random_layer(30, 0.15, 1, 9);
    let adj = &layer.adjacency;
    let p = estimate_layer_probabilities(adj, 5, 2, 5000, 1, 0).unwrap();
    for u in 0..30 {
        for arc in adj.arc_range(u) {
            let v = adj.indices()[arc];
            assert_eq!(p.arc[arc], p.arc[adj.arc_index(v, u).unwrap()]);
        }
    }
}
