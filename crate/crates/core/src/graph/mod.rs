//! Attributed dual-layer graphs: a news propagation layer, a user interaction
//! layer and the posting edges between them.

mod jaccard;
mod normalize;
mod subgraph;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

pub use jaccard::{closed_jaccard, jaccard_filter_user_edges, DEFAULT_JACCARD_THRESHOLD};
pub use normalize::{normalize_adjacency, NormalizedAdjacency};
pub use subgraph::{induced_dual_subgraph, induced_layer, DualLayerSubgraph, LayerSlice};

/// Binary veracity label: 0 = real, 1 = fake.
pub type Label = u8;

pub const REAL: Label = 0;
pub const FAKE: Label = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    SourceNews,
    CascadePost,
    User,
}

/// Symmetric 0/1 adjacency in compressed sparse row form, without self-loops.
/// Neighbor lists are sorted ascending; every arc `(u, v)` has its reverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            indptr: vec![0; n + 1],
            indices: Vec::new(),
        }
    }

    /// Symmetrizes `edges`, drops self-loops and duplicates.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut arcs = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Data(format!("edge ({u}, {v}) references a node outside 0..{n}")));
            }
            if u != v {
                arcs.push((u, v));
                arcs.push((v, u));
            }
        }
        Ok(Self::from_sorted_arcs(n, arcs))
    }

    fn from_sorted_arcs(n: usize, mut arcs: Vec<(usize, usize)>) -> Self {
        arcs.sort_unstable();
        arcs.dedup();
        let mut indptr = vec![0usize; n + 1];
        for &(u, _) in &arcs {
            indptr[u + 1] += 1;
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self {
            indptr,
            indices: arcs.into_iter().map(|(_, v)| v).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.indptr.len() - 1
    }

    /// Number of stored arcs (twice the undirected edge count).
    pub fn arc_count(&self) -> usize {
        self.indices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.indices.len() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    /// Positions of node `i`'s arcs in the flat arc arrays.
    pub fn arc_range(&self, i: usize) -> Range<usize> {
        self.indptr[i]..self.indptr[i + 1]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Flat index of arc `u -> v`.
    pub fn arc_index(&self, u: usize, v: usize) -> Option<usize> {
        self.neighbors(u).binary_search(&v).ok().map(|k| self.indptr[u] + k)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.arc_index(u, v).is_some()
    }

    /// Undirected edges as `(u, v)` with `u < v`, in row order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.node_count() {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.node_count()).all(|u| self.neighbors(u).iter().all(|&v| v != u && self.has_edge(v, u)))
    }

    fn digest_into(&self, h: &mut Sha256) {
        h.update((self.node_count() as u64).to_le_bytes());
        for &p in &self.indptr {
            h.update((p as u64).to_le_bytes());
        }
        for &i in &self.indices {
            h.update((i as u64).to_le_bytes());
        }
    }
}

/// One layer of the dual-layer graph: structure, node attributes, optional
/// labels and per-node roles.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributedLayer {
    pub adjacency: Adjacency,
    pub attributes: DenseMatrix<f64>,
    /// Per-node label; `None` for unlabeled nodes and for every user.
    pub labels: Vec<Option<Label>>,
    pub roles: Vec<NodeRole>,
}

/// Builds a layer over nodes `0..n`. Without labels every node is a user;
/// with labels every node starts as source news (see [`AttributedLayer::with_roles`]).
pub fn build_layer(
    n: usize,
    edges: &[(usize, usize)],
    attributes: DenseMatrix<f64>,
    labels: Option<Vec<Option<Label>>>,
) -> Result<AttributedLayer> {
    if attributes.rows() != n {
        return Err(Error::dim(
            "build_layer",
            format!("{} attribute rows for {n} nodes", attributes.rows()),
        ));
    }
    let adjacency = Adjacency::from_edges(n, edges)?;
    let (labels, role) = match labels {
        Some(l) => {
            if l.len() != n {
                return Err(Error::dim("build_layer", format!("{} labels for {n} nodes", l.len())));
            }
            if let Some(bad) = l.iter().flatten().find(|&&y| y > 1) {
                return Err(Error::Data(format!("label {bad} is not binary")));
            }
            (l, NodeRole::SourceNews)
        }
        None => (vec![None; n], NodeRole::User),
    };
    Ok(AttributedLayer {
        adjacency,
        attributes,
        labels,
        roles: vec![role; n],
    })
}

impl AttributedLayer {
    pub fn node_count(&self) -> usize {
        self.adjacency.node_count()
    }

    pub fn attr_dim(&self) -> usize {
        self.attributes.cols()
    }

    pub fn with_roles(mut self, roles: Vec<NodeRole>) -> Result<Self> {
        if roles.len() != self.node_count() {
            return Err(Error::dim(
                "with_roles",
                format!("{} roles for {} nodes", roles.len(), self.node_count()),
            ));
        }
        self.roles = roles;
        Ok(self)
    }

    pub fn source_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.roles[i] == NodeRole::SourceNews).collect()
    }

    /// Same attributes and labels over a different edge set.
    pub fn with_adjacency(&self, adjacency: Adjacency) -> Result<Self> {
        if adjacency.node_count() != self.node_count() {
            return Err(Error::dim(
                "with_adjacency",
                format!("{} nodes vs {}", adjacency.node_count(), self.node_count()),
            ));
        }
        Ok(Self {
            adjacency,
            attributes: self.attributes.clone(),
            labels: self.labels.clone(),
            roles: self.roles.clone(),
        })
    }
}

/// News layer, user layer and `(user, news)` posting edges.
#[derive(Clone, Debug, PartialEq)]
pub struct DualLayerGraph {
    pub news: AttributedLayer,
    pub users: AttributedLayer,
    inter_edges: Vec<(usize, usize)>,
    posters_ptr: Vec<usize>,
    posters: Vec<usize>,
}

impl DualLayerGraph {
    pub fn new(news: AttributedLayer, users: AttributedLayer, mut inter_edges: Vec<(usize, usize)>) -> Result<Self> {
        let (nn, nu) = (news.node_count(), users.node_count());
        if let Some(&(u, t)) = inter_edges.iter().find(|&&(u, t)| u >= nu || t >= nn) {
            return Err(Error::Data(format!(
                "posting edge (user {u}, news {t}) outside {nu} users / {nn} news"
            )));
        }
        inter_edges.sort_unstable();
        inter_edges.dedup();
        let mut by_news: Vec<(usize, usize)> = inter_edges.iter().map(|&(u, t)| (t, u)).collect();
        by_news.sort_unstable();
        let mut posters_ptr = vec![0usize; nn + 1];
        for &(t, _) in &by_news {
            posters_ptr[t + 1] += 1;
        }
        for i in 0..nn {
            posters_ptr[i + 1] += posters_ptr[i];
        }
        Ok(Self {
            news,
            users,
            inter_edges,
            posters_ptr,
            posters: by_news.into_iter().map(|(_, u)| u).collect(),
        })
    }

    /// Posting edges as `(user, news)`, sorted.
    pub fn inter_edges(&self) -> &[(usize, usize)] {
        &self.inter_edges
    }

    /// Users who posted news node `t`, ascending.
    pub fn posting_users(&self, t: usize) -> &[usize] {
        &self.posters[self.posters_ptr[t]..self.posters_ptr[t + 1]]
    }

    /// Hash of both layers' structure and the posting edges.
    pub fn structure_digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        self.news.adjacency.digest_into(&mut h);
        self.users.adjacency.digest_into(&mut h);
        h.update((self.inter_edges.len() as u64).to_le_bytes());
        for &(u, t) in &self.inter_edges {
            h.update((u as u64).to_le_bytes());
            h.update((t as u64).to_le_bytes());
        }
        h.finalize().into()
    }

    /// Source-news node of every news node's cascade, where a cascade is a
    /// connected component of the news layer holding exactly one source.
    pub fn cascade_sources(&self) -> Result<Vec<usize>> {
        let layer = &self.news;
        let n = layer.node_count();
        let mut source_of = vec![usize::MAX; n];
        let mut stack = Vec::new();
        for start in 0..n {
            if source_of[start] != usize::MAX {
                continue;
            }
            let mut component = vec![start];
            source_of[start] = 0;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in layer.adjacency.neighbors(u) {
                    if source_of[v] == usize::MAX {
                        source_of[v] = 0;
                        component.push(v);
                        stack.push(v);
                    }
                }
            }
            let sources: Vec<usize> = component
                .iter()
                .copied()
                .filter(|&i| layer.roles[i] == NodeRole::SourceNews)
                .collect();
            if sources.len() != 1 {
                component.sort_unstable();
                return Err(Error::Data(format!(
                    "cascade containing news node {} has {} source nodes",
                    component[0],
                    sources.len()
                )));
            }
            for &i in &component {
                source_of[i] = sources[0];
            }
        }
        Ok(source_of)
    }
}
