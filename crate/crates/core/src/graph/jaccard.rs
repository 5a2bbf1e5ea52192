use super::{Adjacency, AttributedLayer};

/// Default similarity below which a user-user edge is considered spurious.
pub const DEFAULT_JACCARD_THRESHOLD: f64 = 0.1;

/// Jaccard similarity of the closed neighborhoods `N(u) + {u}` and `N(v) + {v}`.
pub fn closed_jaccard(adj: &Adjacency, u: usize, v: usize) -> f64 {
    let mut a: Vec<usize> = adj.neighbors(u).to_vec();
    insert_sorted(&mut a, u);
    let mut b: Vec<usize> = adj.neighbors(v).to_vec();
    insert_sorted(&mut b, v);
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    common as f64 / (a.len() + b.len() - common) as f64
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

/// Keeps edge `(u, v)` iff its closed-neighborhood Jaccard similarity on the
/// original adjacency is at least `threshold`. Nodes left isolated stay in
/// the layer.
pub fn jaccard_filter_user_edges(layer: &AttributedLayer, threshold: f64) -> AttributedLayer {
    let adj = &layer.adjacency;
    let kept: Vec<(usize, usize)> = adj
        .edges()
        .into_iter()
        .filter(|&(u, v)| closed_jaccard(adj, u, v) >= threshold)
        .collect();
    let filtered = Adjacency::from_edges(adj.node_count(), &kept).expect("edges come from the same node range");
    layer.with_adjacency(filtered).expect("node count unchanged")
}
