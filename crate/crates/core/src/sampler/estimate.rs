//! Pre-sampling estimates of inclusion probabilities and the aggregator (`alpha`)
//! and loss (`lambda`) normalizations built from them.
//!
//! Round `k` of layer `l` draws from a ChaCha8 stream `2k + l` under the
//! configured seed, so rounds are independent of how they are scheduled
//! across threads. Counts are merged by addition.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{sample_layer_nodes, SamplerConfig};
use crate::error::{Error, Result};
use crate::graph::{Adjacency, DualLayerGraph};

const ROUNDS_PER_TASK: usize = 128;

/// Inclusion probabilities for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerProbabilities {
    /// `p_i` per node.
    pub node: Vec<f64>,
    /// `p_{v,i}` per stored arc (both directions of an edge hold the same value).
    pub arc: Vec<f64>,
    /// Whether the arc's endpoints were ever sampled together.
    pub arc_seen: Vec<bool>,
    /// Pre-sampling rounds behind the estimate; 0 for exact probabilities.
    pub rounds: usize,
}

impl LayerProbabilities {
    /// Wraps known probabilities (no smoothing applied).
    pub fn exact(node: Vec<f64>, arc: Vec<f64>) -> Self {
        let arc_seen = arc.iter().map(|&p| p > 0.0).collect();
        Self {
            node,
            arc,
            arc_seen,
            rounds: 0,
        }
    }

    /// Add-one smoothed frequencies `(count + 1) / (rounds + 1)`.
    fn from_counts(node_counts: &[u64], arc_counts: &[u64], rounds: usize) -> Self {
        let denom = (rounds + 1) as f64;
        Self {
            node: node_counts.iter().map(|&c| (c + 1) as f64 / denom).collect(),
            arc: arc_counts.iter().map(|&c| (c + 1) as f64 / denom).collect(),
            arc_seen: arc_counts.iter().map(|&c| c > 0).collect(),
            rounds,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingProbabilities {
    pub news: LayerProbabilities,
    pub users: LayerProbabilities,
    pub rounds: usize,
}

struct Counts {
    node: Vec<u64>,
    arc: Vec<u64>,
}

impl Counts {
    fn zeros(adj: &Adjacency) -> Self {
        Self {
            node: vec![0; adj.node_count()],
            arc: vec![0; adj.arc_count()],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.node.iter_mut().zip(other.node) {
            *a += b;
        }
        for (a, b) in self.arc.iter_mut().zip(other.arc) {
            *a += b;
        }
        self
    }
}

fn count_rounds(adj: &Adjacency, roots: usize, depth: usize, seed: u64, stream_tag: u64, rounds: std::ops::Range<usize>) -> Result<Counts> {
    let mut counts = Counts::zeros(adj);
    let mut mark = vec![false; adj.node_count()];
    for round in rounds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * round as u64 + stream_tag);
        let nodes = sample_layer_nodes(adj, roots, depth, &mut rng)?;
        for &u in &nodes {
            mark[u] = true;
        }
        for &u in &nodes {
            counts.node[u] += 1;
            for arc in adj.arc_range(u) {
                if mark[adj.indices()[arc]] {
                    counts.arc[arc] += 1;
                }
            }
        }
        for &u in &nodes {
            mark[u] = false;
        }
    }
    Ok(counts)
}

/// Monte-Carlo inclusion probabilities of one layer over `rounds` samples.
/// `stream_tag` (0 or 1) separates the two layers' random streams.
pub fn estimate_layer_probabilities(
    adj: &Adjacency,
    roots: usize,
    depth: usize,
    rounds: usize,
    seed: u64,
    stream_tag: u64,
) -> Result<LayerProbabilities> {
    if rounds == 0 {
        return Err(Error::Config("at least one pre-sampling round is required".into()));
    }
    let tasks = rounds.div_ceil(ROUNDS_PER_TASK);
    let counts = (0..tasks)
        .into_par_iter()
        .map(|t| {
            let lo = t * ROUNDS_PER_TASK;
            count_rounds(adj, roots, depth, seed, stream_tag, lo..(lo + ROUNDS_PER_TASK).min(rounds))
        })
        .try_reduce(|| Counts::zeros(adj), |a, b| Ok(a.merge(b)))?;
    Ok(LayerProbabilities::from_counts(&counts.node, &counts.arc, rounds))
}

/// Per-layer inclusion probabilities for the dual graph.
pub fn estimate_probabilities(graph: &DualLayerGraph, config: &SamplerConfig) -> Result<SamplingProbabilities> {
    config.validate()?;
    let rounds = config.presample_rounds;
    let news = estimate_layer_probabilities(&graph.news.adjacency, config.roots, config.depth, rounds, config.seed, 0)?;
    let users = estimate_layer_probabilities(&graph.users.adjacency, config.roots, config.depth, rounds, config.seed, 1)?;
    Ok(SamplingProbabilities { news, users, rounds })
}

/// Bias-correction coefficients for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerCoefficients {
    /// `alpha_{v,i} = p_{v,i} / p_i`, stored on the arc in row `i` pointing at
    /// `v`. `None` for arcs never co-sampled during pre-sampling; aggregation
    /// falls back to 1 for those.
    pub alpha: Vec<Option<f64>>,
    /// `lambda_i = |V| * p_i`.
    pub lambda: Vec<f64>,
}

impl LayerCoefficients {
    /// `alpha = 1`, `lambda = 1` everywhere.
    pub fn identity(adj: &Adjacency) -> Self {
        Self {
            alpha: vec![Some(1.0); adj.arc_count()],
            lambda: vec![1.0; adj.node_count()],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationCoefficients {
    pub news: LayerCoefficients,
    pub users: LayerCoefficients,
}

pub fn compute_layer_coefficients(probs: &LayerProbabilities, adj: &Adjacency) -> Result<LayerCoefficients> {
    let n = adj.node_count();
    if probs.node.len() != n || probs.arc.len() != adj.arc_count() {
        return Err(Error::dim(
            "compute_coefficients",
            format!(
                "{} node / {} arc probabilities for {} nodes / {} arcs",
                probs.node.len(),
                probs.arc.len(),
                n,
                adj.arc_count()
            ),
        ));
    }
    if let Some(i) = probs.node.iter().position(|&p| p.is_nan() || p <= 0.0) {
        return Err(Error::Numeric(format!("node {i} has inclusion probability {}", probs.node[i])));
    }
    let mut alpha = Vec::with_capacity(adj.arc_count());
    for i in 0..n {
        for arc in adj.arc_range(i) {
            alpha.push(probs.arc_seen[arc].then(|| probs.arc[arc] / probs.node[i]));
        }
    }
    let lambda = probs.node.iter().map(|&p| n as f64 * p).collect();
    Ok(LayerCoefficients { alpha, lambda })
}

pub fn compute_coefficients(probs: &SamplingProbabilities, graph: &DualLayerGraph) -> Result<NormalizationCoefficients> {
    Ok(NormalizationCoefficients {
        news: compute_layer_coefficients(&probs.news, &graph.news.adjacency)?,
        users: compute_layer_coefficients(&probs.users, &graph.users.adjacency)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Adjacency {
        Adjacency::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn path_probabilities_converge_to_enumeration() {
        let p = estimate_layer_probabilities(&path3(), 1, 1, 100_000, 7, 0).unwrap();
        for (got, want) in p.node.iter().zip([0.5, 1.0, 0.5]) {
            assert!((got - want).abs() < 0.02, "{got} vs {want}");
        }
        // edge {a,b} is present exactly when a is, edge {b,c} when c is
        for arc in 0..4 {
            assert!((p.arc[arc] - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn cycle_probabilities_are_uniform() {
        let edges: Vec<(usize, usize)> = (0..12).map(|i| (i, (i + 1) % 12)).collect();
        let adj = Adjacency::from_edges(12, &edges).unwrap();
        let p = estimate_layer_probabilities(&adj, 2, 2, 20_000, 1, 0).unwrap();
        let mean = p.node.iter().sum::<f64>() / 12.0;
        for &pi in &p.node {
            assert!((pi - mean).abs() < 0.02, "{pi} vs {mean}");
        }
    }

    #[test]
    fn roots_covering_the_layer_give_probability_one() {
        let p = estimate_layer_probabilities(&path3(), 3, 1, 50, 0, 0).unwrap();
        assert!(p.node.iter().all(|&x| x == 1.0));
        assert!(p.arc.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let edges: Vec<(usize, usize)> = (0..30).map(|i| (i, (i * 7 + 3) % 30)).collect();
        let adj = Adjacency::from_edges(30, &edges).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| estimate_layer_probabilities(&adj, 3, 2, 1000, 9, 0).unwrap());
        let b = four.install(|| estimate_layer_probabilities(&adj, 3, 2, 1000, 9, 0).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn edge_probability_never_exceeds_endpoints() {
        let edges: Vec<(usize, usize)> = (0..40).map(|i| (i, (i * 11 + 5) % 40)).collect();
        let adj = Adjacency::from_edges(40, &edges).unwrap();
        let p = estimate_layer_probabilities(&adj, 4, 2, 3000, 2, 0).unwrap();
        let slack = 1.0 / 3001.0;
        for i in 0..40 {
            for arc in adj.arc_range(i) {
                let v = adj.indices()[arc];
                assert!(p.arc[arc] <= p.node[i].min(p.node[v]) + slack);
                assert_eq!(p.arc[arc], p.arc[adj.arc_index(v, i).unwrap()]);
            }
        }
        assert!(p.node.iter().all(|&x| x >= slack && x <= 1.0));
    }

    #[test]
    fn always_sampled_gives_unit_alpha_and_layer_size_lambda() {
        let adj = path3();
        let probs = LayerProbabilities::exact(vec![1.0; 3], vec![1.0; 4]);
        let c = compute_layer_coefficients(&probs, &adj).unwrap();
        assert!(c.alpha.iter().all(|&a| a == Some(1.0)));
        assert_eq!(c.lambda, vec![3.0; 3]);
    }

    #[test]
    fn exact_path_probabilities_give_enumerated_lambda() {
        let adj = path3();
        let probs = LayerProbabilities::exact(vec![0.5, 1.0, 0.5], vec![0.5; 4]);
        let c = compute_layer_coefficients(&probs, &adj).unwrap();
        assert_eq!(c.lambda, vec![1.5, 3.0, 1.5]);
        // arcs: 0->1, 1->0, 1->2, 2->1. alpha is over the row (destination) node.
        assert_eq!(c.alpha, vec![Some(1.0), Some(0.5), Some(0.5), Some(1.0)]);
    }

    #[test]
    fn unseen_arcs_have_no_alpha() {
        let adj = path3();
        let mut probs = LayerProbabilities::exact(vec![0.5, 1.0, 0.5], vec![0.5; 4]);
        probs.arc_seen[0] = false;
        let c = compute_layer_coefficients(&probs, &adj).unwrap();
        assert_eq!(c.alpha[0], None);
    }
}
