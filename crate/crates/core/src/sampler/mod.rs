//! Random-walk subgraph sampling and the bias-correction coefficients derived
//! from node and edge inclusion probabilities.
//!
//! One sample picks `roots` start nodes uniformly per layer (without
//! replacement when `roots <= n`), walks `depth` uniform-neighbor steps from
//! each, and takes the induced subgraph on everything visited. A walker on an
//! isolated node stays where it is.

mod cache;
mod estimate;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{induced_dual_subgraph, Adjacency, DualLayerGraph, DualLayerSubgraph};

pub use cache::{cache_key, load_or_estimate, read_cache, write_cache};
pub use estimate::{
    compute_coefficients, compute_layer_coefficients, estimate_layer_probabilities, estimate_probabilities, LayerCoefficients,
    LayerProbabilities, NormalizationCoefficients, SamplingProbabilities,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Walk roots drawn per layer for each subgraph.
    pub roots: usize,
    /// Steps per walk.
    pub depth: usize,
    /// Subgraphs (minibatches) per training epoch; `None` sizes an epoch so
    /// that the expected sampled news nodes roughly cover the news layer.
    pub subgraphs_per_epoch: Option<usize>,
    /// Independent samples used to estimate inclusion probabilities.
    pub presample_rounds: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            roots: 3000,
            depth: 2,
            subgraphs_per_epoch: None,
            presample_rounds: 10_000,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.roots == 0 {
            return Err(Error::Config("the sampler needs at least one root".into()));
        }
        if self.presample_rounds == 0 {
            return Err(Error::Config("presample_rounds must be positive".into()));
        }
        if self.subgraphs_per_epoch == Some(0) {
            return Err(Error::Config("subgraphs_per_epoch must be positive".into()));
        }
        Ok(())
    }

    /// Minibatches per epoch for a news layer of `news_nodes` nodes.
    pub fn minibatches_per_epoch(&self, news_nodes: usize) -> usize {
        self.subgraphs_per_epoch
            .unwrap_or_else(|| news_nodes.div_ceil(self.roots * (self.depth + 1)).max(1))
    }
}

/// Nodes visited by `roots` random walks of `depth` steps, sorted and
/// deduplicated. At most `roots * (depth + 1)` nodes are returned.
pub fn sample_layer_nodes<R: Rng + ?Sized>(adj: &Adjacency, roots: usize, depth: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = adj.node_count();
    if n == 0 {
        return Err(Error::InvalidInput("cannot sample from an empty layer".into()));
    }
    let starts: Vec<usize> = if roots <= n {
        sample(rng, n, roots).into_vec()
    } else {
        (0..roots).map(|_| rng.gen_range(0..n)).collect()
    };
    let mut visited = Vec::with_capacity(roots * (depth + 1));
    for root in starts {
        let mut cur = root;
        visited.push(cur);
        for _ in 0..depth {
            let nbrs = adj.neighbors(cur);
            if !nbrs.is_empty() {
                cur = nbrs[rng.gen_range(0..nbrs.len())];
            }
            visited.push(cur);
        }
    }
    visited.sort_unstable();
    visited.dedup();
    Ok(visited)
}

/// Draws one dual-layer subgraph: walks on each layer independently, then
/// the induced subgraph including posting edges between sampled nodes.
pub fn random_walk_sample<R: Rng + ?Sized>(graph: &DualLayerGraph, config: &SamplerConfig, rng: &mut R) -> Result<DualLayerSubgraph> {
    config.validate()?;
    let news = sample_layer_nodes(&graph.news.adjacency, config.roots, config.depth, rng)?;
    let users = sample_layer_nodes(&graph.users.adjacency, config.roots, config.depth, rng)?;
    induced_dual_subgraph(graph, &news, &users)
}
