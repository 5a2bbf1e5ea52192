use std::collections::HashMap;

use super::{Adjacency, AttributedLayer, DualLayerGraph};
use crate::error::{Error, Result};

/// Induced subgraph of one layer with local node ids `0..to_global.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSlice {
    pub layer: AttributedLayer,
    /// Local id -> global id, ascending.
    pub to_global: Vec<usize>,
    pub to_local: HashMap<usize, usize>,
    /// Local arc index -> arc index in the parent adjacency.
    pub arc_to_global: Vec<usize>,
}

impl LayerSlice {
    pub fn len(&self) -> usize {
        self.to_global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_global.is_empty()
    }
}

/// Sampled dual-layer subgraph. Posting edges are `(local user, local news)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualLayerSubgraph {
    pub news: LayerSlice,
    pub users: LayerSlice,
    pub inter: Vec<(usize, usize)>,
}

/// Subgraph of `layer` induced by `nodes` (deduplicated; order irrelevant).
pub fn induced_layer(layer: &AttributedLayer, nodes: &[usize]) -> Result<LayerSlice> {
    let n = layer.node_count();
    let mut to_global = nodes.to_vec();
    to_global.sort_unstable();
    to_global.dedup();
    if let Some(&bad) = to_global.last().filter(|&&v| v >= n) {
        return Err(Error::InvalidInput(format!("node {bad} outside layer of {n} nodes")));
    }
    let to_local: HashMap<usize, usize> = to_global.iter().enumerate().map(|(l, &g)| (g, l)).collect();

    let mut indptr = Vec::with_capacity(to_global.len() + 1);
    let mut indices = Vec::new();
    let mut arc_to_global = Vec::new();
    indptr.push(0);
    for &g in &to_global {
        for arc in layer.adjacency.arc_range(g) {
            let v = layer.adjacency.indices[arc];
            if let Some(&lv) = to_local.get(&v) {
                indices.push(lv);
                arc_to_global.push(arc);
            }
        }
        indptr.push(indices.len());
    }

    let sub = AttributedLayer {
        adjacency: Adjacency { indptr, indices },
        attributes: layer.attributes.select_rows(&to_global),
        labels: to_global.iter().map(|&g| layer.labels[g]).collect(),
        roles: to_global.iter().map(|&g| layer.roles[g]).collect(),
    };
    Ok(LayerSlice {
        layer: sub,
        to_global,
        to_local,
        arc_to_global,
    })
}

/// Induced subgraph on both layers plus the posting edges whose endpoints
/// were both selected.
pub fn induced_dual_subgraph(graph: &DualLayerGraph, news_nodes: &[usize], user_nodes: &[usize]) -> Result<DualLayerSubgraph> {
    if news_nodes.is_empty() {
        return Err(Error::InvalidInput("a minibatch needs at least one news node".into()));
    }
    let news = induced_layer(&graph.news, news_nodes)?;
    let users = induced_layer(&graph.users, user_nodes)?;
    let mut inter = Vec::new();
    for (lt, &t) in news.to_global.iter().enumerate() {
        for u in graph.posting_users(t) {
            if let Some(&lu) = users.to_local.get(u) {
                inter.push((lu, lt));
            }
        }
    }
    inter.sort_unstable();
    Ok(DualLayerSubgraph { news, users, inter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_layer;
    use crate::nn::DenseMatrix;
    use proptest::prelude::*;

    fn layer(n: usize, edges: &[(usize, usize)]) -> AttributedLayer {
        let attrs = DenseMatrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64);
        build_layer(n, edges, attrs, None).unwrap()
    }

    fn dual() -> DualLayerGraph {
        let news = layer(4, &[(0, 1), (1, 2), (2, 3)]);
        let users = layer(3, &[(0, 1), (1, 2)]);
        DualLayerGraph::new(news, users, vec![(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn full_node_sets_reproduce_the_graph() {
        let g = dual();
        let s = induced_dual_subgraph(&g, &[0, 1, 2, 3], &[2, 1, 0]).unwrap();
        assert_eq!(s.news.layer, g.news);
        assert_eq!(s.users.layer, g.users);
        assert_eq!(s.inter, g.inter_edges().to_vec());
        assert_eq!(s.news.arc_to_global, (0..g.news.adjacency.arc_count()).collect::<Vec<_>>());
    }

    #[test]
    fn news_without_sampled_poster_has_no_inter_edges() {
        let g = dual();
        let s = induced_dual_subgraph(&g, &[1], &[0]).unwrap();
        assert_eq!(s.inter, vec![(0, 0)]);
        let s = induced_dual_subgraph(&g, &[1], &[2]).unwrap();
        assert!(s.inter.is_empty());
    }

    #[test]
    fn triangle_pair_keeps_one_edge() {
        let tri = layer(3, &[(0, 1), (1, 2), (0, 2)]);
        let s = induced_layer(&tri, &[0, 2]).unwrap();
        assert_eq!(s.layer.adjacency.edges(), vec![(0, 1)]);
        assert_eq!(s.to_global, vec![0, 2]);
        assert_eq!(s.to_local[&2], 1);
        assert_eq!(s.layer.attributes.row(1), tri.attributes.row(2));
    }

    #[test]
    fn empty_news_set_is_rejected() {
        assert!(induced_dual_subgraph(&dual(), &[], &[0]).is_err());
    }

    proptest! {
        #[test]
        fn induced_subgraph_is_exact_and_idempotent(
            edges in proptest::collection::vec((0usize..12, 0usize..12), 0..40),
            pick in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let l = layer(12, &edges);
            let nodes: Vec<usize> = (0..12).filter(|&i| pick[i]).collect();
            let s = induced_layer(&l, &nodes).unwrap();
            prop_assert!(s.layer.adjacency.is_symmetric());
            for (a, &ga) in s.to_global.iter().enumerate() {
                prop_assert_eq!(s.to_local[&ga], a);
                for (b, &gb) in s.to_global.iter().enumerate() {
                    prop_assert_eq!(s.layer.adjacency.has_edge(a, b), l.adjacency.has_edge(ga, gb));
                }
            }
            for (k, &arc) in s.arc_to_global.iter().enumerate() {
                prop_assert_eq!(s.to_global[s.layer.adjacency.indices()[k]], l.adjacency.indices()[arc]);
            }
            let all: Vec<usize> = (0..s.len()).collect();
            let again = induced_layer(&s.layer, &all).unwrap();
            prop_assert_eq!(&again.layer, &s.layer);
        }
    }
}
