use super::{Adjacency, AttributedLayer};
use crate::nn::CsrMatrix;

/// `D^-1/2 (A + I) D^-1/2`, where `D` is the degree matrix of `A + I`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix<f64>,
    inv_sqrt_degree: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn from_adjacency(adj: &Adjacency) -> Self {
        let n = adj.node_count();
        let inv_sqrt_degree: Vec<f64> = (0..n).map(|i| 1.0 / ((adj.degree(i) + 1) as f64).sqrt()).collect();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(adj.arc_count() + n);
        let mut values = Vec::with_capacity(adj.arc_count() + n);
        indptr.push(0);
        for i in 0..n {
            let mut diag_done = false;
            for &v in adj.neighbors(i) {
                if !diag_done && v > i {
                    indices.push(i);
                    values.push(inv_sqrt_degree[i] * inv_sqrt_degree[i]);
                    diag_done = true;
                }
                indices.push(v);
                values.push(inv_sqrt_degree[i] * inv_sqrt_degree[v]);
            }
            if !diag_done {
                indices.push(i);
                values.push(inv_sqrt_degree[i] * inv_sqrt_degree[i]);
            }
            indptr.push(indices.len());
        }
        let matrix = CsrMatrix::new(n, n, indptr, indices, values).expect("well-formed by construction");
        Self { matrix, inv_sqrt_degree }
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    /// Entry `(i, v)` assuming `v == i` or `(i, v)` is an edge.
    pub fn entry(&self, i: usize, v: usize) -> f64 {
        self.inv_sqrt_degree[i] * self.inv_sqrt_degree[v]
    }
}

pub fn normalize_adjacency(layer: &AttributedLayer) -> NormalizedAdjacency {
    NormalizedAdjacency::from_adjacency(&layer.adjacency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_layer;
    use crate::nn::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isolated_node_is_one() {
        let l = build_layer(1, &[], DenseMatrix::zeros(1, 1), None).unwrap();
        assert_eq!(normalize_adjacency(&l).matrix().to_dense().as_slice(), &[1.0]);
    }

    #[test]
    fn two_node_path_is_all_half() {
        let l = build_layer(2, &[(0, 1)], DenseMatrix::zeros(2, 1), None).unwrap();
        let d = normalize_adjacency(&l).matrix().to_dense();
        for &v in d.as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_dense_oracle_on_random_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 10;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.3) {
                    edges.push((u, v));
                }
            }
        }
        let l = build_layer(n, &edges, DenseMatrix::zeros(n, 1), None).unwrap();
        let norm = normalize_adjacency(&l);

        // dense oracle: A + I, degree vector, D^-1/2 (A+I) D^-1/2
        let mut a = vec![vec![0.0f64; n]; n];
        for &(u, v) in &edges {
            a[u][v] = 1.0;
            a[v][u] = 1.0;
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        let got = norm.matrix().to_dense();
        for i in 0..n {
            for j in 0..n {
                let want = a[i][j] / (deg[i].sqrt() * deg[j].sqrt());
                assert!((got.get(i, j) - want).abs() < 1e-12);
            }
        }
        // pattern = A plus diagonal
        assert_eq!(norm.matrix().nnz(), l.adjacency.arc_count() + n);
        assert!(norm.matrix().values().iter().all(|&v| v > 0.0 && v <= 1.0));
    }
}
