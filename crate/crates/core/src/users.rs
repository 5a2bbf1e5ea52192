//! Graph autoencoder on the user layer: the GCN encoder shared with the news
//! layer and an inner-product decoder `sigmoid(Z Z^T)` over the sampled users.
//!
//! The reconstruction target is the 0/1 adjacency among sampled users with a
//! zero diagonal. The decoded diagonal is `sigmoid(|z_j|^2) >= 0.5`, so every
//! row carries a diagonal error term of at least 0.25; it is kept as is.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::news::GcnEncoder;
use crate::nn::{sigmoid, CsrMatrix, DenseMatrix, Real, Tape, Var};

pub type UserEncoder<T> = GcnEncoder<T>;

/// User embeddings `Z` for the sampled users.
pub fn encode_users<T: Real>(encoder: &UserEncoder<T>, agg: &CsrMatrix<T>, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    encoder.encode(agg, x)
}

/// `sigmoid(Z Z^T)`.
pub fn decode_adjacency<T: Real>(z: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    Ok(z.matmul_nt(z)?.map(sigmoid))
}

/// Dense 0/1 adjacency of a (small) sampled layer, zero diagonal.
pub fn adjacency_block<T: Real>(adj: &Adjacency) -> DenseMatrix<T> {
    let n = adj.node_count();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for &v in adj.neighbors(i) {
            out.set(i, v, T::one());
        }
    }
    out
}

/// `sum_j |a_j - a_hat_j|^2 / lambda_j`.
pub fn user_loss<T: Real>(target: &DenseMatrix<T>, decoded: &DenseMatrix<T>, lambda: &[f64]) -> Result<f64> {
    if target.shape() != decoded.shape() || lambda.len() != target.rows() {
        return Err(Error::dim(
            "user_loss",
            format!(
                "target {:?}, decoded {:?}, {} lambdas",
                target.shape(),
                decoded.shape(),
                lambda.len()
            ),
        ));
    }
    let mut total = 0.0;
    for (j, &l) in lambda.iter().enumerate() {
        let row: f64 = target
            .row(j)
            .iter()
            .zip(decoded.row(j))
            .map(|(&a, &b)| (a.as_f64() - b.as_f64()).powi(2))
            .sum();
        total += row / l;
    }
    Ok(total)
}

/// Records the reconstruction loss of `z` against `target` on `tape`.
pub fn record_user_loss<T: Real>(tape: &mut Tape<T>, z: Var, target: Arc<DenseMatrix<T>>, inv_lambda: Vec<T>) -> Result<Var> {
    let logits = tape.matmul_nt(z, z)?;
    let decoded = tape.sigmoid(logits)?;
    tape.weighted_sq_error(decoded, target, inv_lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_layer, normalize_adjacency};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_embeddings_decode_to_one_half() {
        let a = decode_adjacency(&DenseMatrix::<f64>::zeros(4, 3)).unwrap();
        assert!(a.as_slice().iter().all(|&v| v == 0.5));
        let loss = user_loss(&DenseMatrix::zeros(4, 4), &a, &[1.0; 4]).unwrap();
        assert_eq!(loss, 0.25 * 16.0);
    }

    #[test]
    fn identical_and_orthogonal_rows() {
        let z = DenseMatrix::<f64>::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = decode_adjacency(&z).unwrap();
        assert!((a.get(0, 1) - 0.731_058_578_630_004_9f64).abs() < 1e-15);
        assert_eq!(a.get(0, 2), 0.5);
        assert_eq!(a, a.transpose());
        assert!((0..3).all(|j| a.get(j, j) >= 0.5));
    }

    #[test]
    fn two_user_hand_computation() {
        let z = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let a_hat = decode_adjacency(&z).unwrap();
        let adj = Adjacency::from_edges(2, &[(0, 1)]).unwrap();
        let target = adjacency_block::<f64>(&adj);
        let s = 1.0 / (1.0 + (-1.0f64).exp());
        // each row: off-diagonal (1 - s)^2 plus diagonal (0 - s)^2
        let row = (1.0 - s).powi(2) + s * s;
        let loss = user_loss(&target, &a_hat, &[1.0, 2.0]).unwrap();
        assert!((loss - (row + row / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn perfect_reconstruction_is_zero() {
        let t = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(user_loss(&t, &t, &[3.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn isolated_user_and_zero_attributes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DenseMatrix::from_rows(&[vec![0.5, -1.5]]).unwrap();
        let l = build_layer(1, &[], x.clone(), None).unwrap();
        let agg = normalize_adjacency(&l).matrix().clone();
        let mut enc = UserEncoder::<f64>::new("user", &[2, 2, 2], &mut rng).unwrap();
        for p in &mut enc.layers {
            p.value = DenseMatrix::identity(2);
        }
        // ReLU drops the negative coordinate after the first layer.
        assert_eq!(encode_users(&enc, &agg, &x).unwrap().as_slice(), &[0.5, 0.0]);
        let z = encode_users(&enc, &agg, &DenseMatrix::zeros(1, 2)).unwrap();
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn loss_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 7;
        let z = DenseMatrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0));
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.4) {
                    edges.push((u, v));
                }
            }
        }
        let lam: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let adj = Adjacency::from_edges(n, &edges).unwrap();
        let base = user_loss(&adjacency_block(&adj), &decode_adjacency(&z).unwrap(), &lam).unwrap();

        let perm: Vec<usize> = vec![3, 0, 6, 1, 5, 2, 4];
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let pz = z.select_rows(&perm);
        let pedges: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (inv[u], inv[v])).collect();
        let plam: Vec<f64> = perm.iter().map(|&o| lam[o]).collect();
        let padj = Adjacency::from_edges(n, &pedges).unwrap();
        let permuted = user_loss(&adjacency_block(&padj), &decode_adjacency(&pz).unwrap(), &plam).unwrap();
        assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn tape_loss_matches_value_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = DenseMatrix::from_fn(5, 2, |_, _| rng.gen_range(-1.0..1.0));
        let adj = Adjacency::from_edges(5, &[(0, 1), (2, 3), (1, 4)]).unwrap();
        let target = adjacency_block::<f64>(&adj);
        let lam = [1.0, 2.0, 3.0, 4.0, 5.0];
        let value = user_loss(&target, &decode_adjacency(&z).unwrap(), &lam).unwrap();
        let mut tape = Tape::new();
        let zv = tape.constant(z);
        let inv = lam.iter().map(|l| 1.0 / l).collect();
        let recorded = record_user_loss(&mut tape, zv, Arc::new(target), inv).unwrap();
        assert!((tape.value(recorded).item() - value).abs() < 1e-12);
    }
}
