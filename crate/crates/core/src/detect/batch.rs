use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, DualLayerGraph, DualLayerSubgraph, NormalizedAdjacency};
use crate::news::aggregation_matrix;
use crate::nn::{CsrMatrix, DenseMatrix, Real};
use crate::sampler::NormalizationCoefficients;
use crate::users::adjacency_block;

/// Normalized adjacency of both full layers, computed once per graph.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorms {
    pub news: NormalizedAdjacency,
    pub users: NormalizedAdjacency,
}

impl LayerNorms {
    pub fn new(graph: &DualLayerGraph) -> Self {
        Self {
            news: normalize_adjacency(&graph.news),
            users: normalize_adjacency(&graph.users),
        }
    }
}

/// Row-normalized posting matrix: entry `(t, u)` is `1 / |U_t|` for every
/// user `u` who posted news `t`. `inter` holds `(user, news)` pairs.
pub fn fusion_matrix(news: usize, users: usize, inter: &[(usize, usize)]) -> Result<CsrMatrix<f64>> {
    let mut count = vec![0usize; news];
    for &(u, t) in inter {
        if u >= users || t >= news {
            return Err(Error::dim(
                "fusion_matrix",
                format!("edge ({u}, {t}) outside {users} users / {news} news"),
            ));
        }
        count[t] += 1;
    }
    let triplets = inter.iter().map(|&(u, t)| (t, u, 1.0 / count[t] as f64)).collect();
    CsrMatrix::from_triplets(news, users, triplets)
}

/// Everything one forward/backward pass needs, in local row order.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    /// Global news id of each news row.
    pub news_nodes: Vec<usize>,
    /// Global user id of each user row.
    pub user_nodes: Vec<usize>,
    pub news_agg: Arc<CsrMatrix<T>>,
    pub news_x: DenseMatrix<T>,
    pub user_agg: Arc<CsrMatrix<T>>,
    pub user_x: DenseMatrix<T>,
    pub fusion: Arc<CsrMatrix<T>>,
    /// Labeled training rows, their classes and `1 / lambda` weights.
    pub rows: Vec<usize>,
    pub targets: Vec<usize>,
    pub weights: Vec<T>,
    /// Adjacency among the batch's users; `None` skips the reconstruction loss.
    pub user_target: Option<Arc<DenseMatrix<T>>>,
    pub user_weights: Vec<T>,
    pub missing_alpha: usize,
}

fn labeled_rows<T: Real>(
    graph: &DualLayerGraph,
    news_nodes: &[usize],
    trainable: Option<&[bool]>,
    lambda: impl Fn(usize) -> f64,
) -> (Vec<usize>, Vec<usize>, Vec<T>) {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    for (r, &g) in news_nodes.iter().enumerate() {
        let Some(y) = graph.news.labels[g] else { continue };
        if trainable.is_some_and(|t| !t[g]) {
            continue;
        }
        rows.push(r);
        targets.push(y as usize);
        weights.push(T::from_f64_lossy(1.0 / lambda(g)));
    }
    (rows, targets, weights)
}

impl<T: Real> Batch<T> {
    /// Batch for a sampled subgraph. `coefficients = None` uses `alpha = 1`
    /// and `lambda = 1`. Only labeled news with `trainable[id]` enter `L_t`.
    pub fn from_subgraph(
        graph: &DualLayerGraph,
        norms: &LayerNorms,
        sub: &DualLayerSubgraph,
        coefficients: Option<&NormalizationCoefficients>,
        trainable: &[bool],
        with_user_target: bool,
    ) -> Result<Self> {
        if trainable.len() != graph.news.node_count() {
            return Err(Error::dim(
                "batch",
                format!("{} trainable flags for {} news", trainable.len(), graph.news.node_count()),
            ));
        }
        let news_agg = aggregation_matrix(&sub.news, &norms.news, coefficients.map(|c| &c.news))?;
        let user_agg = aggregation_matrix(&sub.users, &norms.users, coefficients.map(|c| &c.users))?;
        let news_lambda = |g: usize| coefficients.map_or(1.0, |c| c.news.lambda[g]);
        let (rows, targets, weights) = labeled_rows(graph, &sub.news.to_global, Some(trainable), news_lambda);
        let user_weights = sub
            .users
            .to_global
            .iter()
            .map(|&g| T::from_f64_lossy(1.0 / coefficients.map_or(1.0, |c| c.users.lambda[g])))
            .collect();
        Ok(Self {
            news_nodes: sub.news.to_global.clone(),
            user_nodes: sub.users.to_global.clone(),
            news_agg: Arc::new(news_agg.matrix.cast()),
            news_x: sub.news.layer.attributes.cast(),
            user_agg: Arc::new(user_agg.matrix.cast()),
            user_x: sub.users.layer.attributes.cast(),
            fusion: Arc::new(fusion_matrix(sub.news.len(), sub.users.len(), &sub.inter)?.cast()),
            rows,
            targets,
            weights,
            user_target: with_user_target.then(|| Arc::new(adjacency_block(&sub.users.layer.adjacency))),
            user_weights,
            missing_alpha: news_agg.missing_alpha + user_agg.missing_alpha,
        })
    }

    /// Whole-graph batch with `alpha = lambda = 1`. `trainable = None` marks
    /// every labeled news node.
    pub fn full(graph: &DualLayerGraph, norms: &LayerNorms, trainable: Option<&[bool]>, with_user_target: bool) -> Result<Self> {
        let (nn, nu) = (graph.news.node_count(), graph.users.node_count());
        if trainable.is_some_and(|t| t.len() != nn) {
            return Err(Error::dim("batch", format!("trainable flags do not cover {nn} news")));
        }
        let news_nodes: Vec<usize> = (0..nn).collect();
        let (rows, targets, weights) = labeled_rows(graph, &news_nodes, trainable, |_| 1.0);
        Ok(Self {
            news_nodes,
            user_nodes: (0..nu).collect(),
            news_agg: Arc::new(norms.news.matrix().cast()),
            news_x: graph.news.attributes.cast(),
            user_agg: Arc::new(norms.users.matrix().cast()),
            user_x: graph.users.attributes.cast(),
            fusion: Arc::new(fusion_matrix(nn, nu, graph.inter_edges())?.cast()),
            rows,
            targets,
            weights,
            user_target: with_user_target.then(|| Arc::new(adjacency_block(&graph.users.adjacency))),
            user_weights: vec![T::one(); nu],
            missing_alpha: 0,
        })
    }
}
