#![allow(dead_code)]

use std::path::{Path, PathBuf};

use defake_core::graph::{build_layer, induced_layer, normalize_adjacency, AttributedLayer};
use defake_core::news::{aggregation_matrix, gcn_forward};
use defake_core::nn::DenseMatrix;
use defake_core::sampler::{compute_layer_coefficients, estimate_layer_probabilities, sample_layer_nodes};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Copies a fixture bundle into a fresh temporary directory.
pub fn fixture_copy(name: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(fixture(name)).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    dir
}

/// Erdos-Renyi edge list without self loops.
pub fn er_edges(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// `m` uniformly random edges, duplicates and self loops dropped.
pub fn sparse_edges(n: usize, m: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (0..m)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(rand_distr::StandardNormal))
}

pub fn random_layer(n: usize, p: f64, dim: usize, seed: u64) -> AttributedLayer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = er_edges(n, p, &mut rng);
    build_layer(n, &edges, gaussian_matrix(n, dim, &mut rng), None).unwrap()
}

/// Dense `D^-1/2 (A + I) D^-1/2` built directly from an edge list.
pub fn dense_normalized(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(u, v) in edges {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    let d: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (d[i] * d[j]).sqrt();
        }
    }
    a
}

/// Largest per-node relative L2 gap between the conditional Monte-Carlo mean
/// of the alpha-corrected one-layer aggregation and the full-graph `A H W`.
pub fn aggregation_bias(
    layer: &AttributedLayer,
    w: &DenseMatrix<f64>,
    roots: usize,
    depth: usize,
    presamples: usize,
    subgraphs: usize,
    seed: u64,
) -> f64 {
    let adj = &layer.adjacency;
    let n = layer.node_count();
    let norm = normalize_adjacency(layer);
    let probs = estimate_layer_probabilities(adj, roots, depth, presamples, seed, 0).unwrap();
    let coefficients = compute_layer_coefficients(&probs, adj).unwrap();
    let full = gcn_forward(norm.matrix(), &layer.attributes, w).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut sum = DenseMatrix::<f64>::zeros(n, w.cols());
    let mut hits = vec![0usize; n];
    for _ in 0..subgraphs {
        let nodes = sample_layer_nodes(adj, roots, depth, &mut rng).unwrap();
        let slice = induced_layer(layer, &nodes).unwrap();
        let agg = aggregation_matrix(&slice, &norm, Some(&coefficients)).unwrap();
        let out = gcn_forward(&agg.matrix, &slice.layer.attributes, w).unwrap();
        for (local, &g) in slice.to_global.iter().enumerate() {
            hits[g] += 1;
            for (s, &o) in sum.row_mut(g).iter_mut().zip(out.row(local)) {
                *s += o;
            }
        }
    }
    (0..n)
        .map(|v| {
            if hits[v] == 0 {
                return f64::INFINITY;
            }
            let (mut diff, mut norm2) = (0.0, 0.0);
            for (s, &f) in sum.row(v).iter().zip(full.row(v)) {
                diff += (s / hits[v] as f64 - f).powi(2);
                norm2 += f * f;
            }
            (diff / norm2).sqrt()
        })
        .fold(0.0, f64::max)
}
