//! Graph convolution encoder with bias-corrected minibatch aggregation, and
//! the lambda-weighted cross-entropy used on the news layer.
//!
//! One layer computes `h_i = sum_v (A_iv / alpha_{v,i}) W^T h_v` over the
//! sampled neighbors `v` of `i` plus `i` itself (`alpha_{i,i} = 1`), where `A`
//! is the symmetrically normalized adjacency of the full layer. Hidden layers
//! apply ReLU; the last layer is linear.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Label, LayerSlice, NormalizedAdjacency};
use crate::nn::{CsrMatrix, DenseMatrix, Parameter, Real, Tape, Var, PROB_CLAMP};
use crate::sampler::LayerCoefficients;

/// Stack of GCN weight matrices `W^(0) .. W^(L-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnEncoder<T> {
    pub layers: Vec<Parameter<T>>,
}

pub type NewsEncoder<T> = GcnEncoder<T>;

/// Glorot-uniform initialized matrix.
pub fn glorot<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| T::from_f64_lossy(rng.gen_range(-limit..=limit)))
}

impl<T: Real> GcnEncoder<T> {
    /// `dims = [d_in, d_1, ..., d_L]`; parameters are named `{prefix}.{layer}`.
    pub fn new<R: Rng + ?Sized>(prefix: &str, dims: &[usize], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("encoder dims {dims:?} need at least two positive entries")));
        }
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| Parameter::new(format!("{prefix}.{l}"), glorot(w[0], w[1], rng)))
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Parameter<T>>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].value.cols() != pair[1].value.rows() {
                return Err(Error::dim(
                    "encoder",
                    format!(
                        "{} is {:?} but {} is {:?}",
                        pair[0].name,
                        pair[0].value.shape(),
                        pair[1].name,
                        pair[1].value.shape()
                    ),
                ));
            }
        }
        if layers.is_empty() {
            return Err(Error::Config("an encoder needs at least one layer".into()));
        }
        Ok(Self { layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].value.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().value.cols()
    }

    /// Records every weight on `tape`, in layer order.
    pub fn record(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.layers.iter().map(|p| tape.param(p)).collect()
    }

    /// Full forward pass on `tape` from the constant input `x`.
    pub fn forward(&self, tape: &mut Tape<T>, agg: &Arc<CsrMatrix<T>>, x: Var, weights: &[Var]) -> Result<Var> {
        let mut h = x;
        for (l, &w) in weights.iter().enumerate() {
            h = gcn_layer(tape, agg, h, w, l + 1 < weights.len())?;
        }
        Ok(h)
    }

    /// Value-level forward pass (no gradients).
    pub fn encode(&self, agg: &CsrMatrix<T>, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        let mut h = x.clone();
        for (l, p) in self.layers.iter().enumerate() {
            h = gcn_forward(agg, &h, &p.value)?;
            if l + 1 < self.layers.len() {
                h = h.map(|v| if v > T::zero() { v } else { T::zero() });
            }
        }
        Ok(h)
    }
}

/// One recorded GCN layer `agg * (h W)`, optionally followed by ReLU.
pub fn gcn_layer<T: Real>(tape: &mut Tape<T>, agg: &Arc<CsrMatrix<T>>, h: Var, w: Var, relu: bool) -> Result<Var> {
    let hw = tape.matmul(h, w)?;
    let out = tape.spmm(Arc::clone(agg), hw)?;
    if relu {
        tape.relu(out)
    } else {
        Ok(out)
    }
}

/// Linear aggregation `agg * (h_prev W)` of one layer.
pub fn gcn_forward<T: Real>(agg: &CsrMatrix<T>, h_prev: &DenseMatrix<T>, w: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if agg.cols() != h_prev.rows() {
        return Err(Error::dim(
            "gcn_forward",
            format!("aggregation over {} nodes, embeddings for {}", agg.cols(), h_prev.rows()),
        ));
    }
    agg.spmm(&h_prev.matmul(w)?)
}

/// Aggregation operator of a sampled slice.
#[derive(Clone, Debug)]
pub struct Aggregation {
    pub matrix: CsrMatrix<f64>,
    /// Sampled arcs whose `alpha` was unknown and replaced by 1.
    pub missing_alpha: usize,
}

/// Builds the `alpha`-corrected aggregation matrix over the nodes of `slice`.
/// Entry `(i, v)` is `A_iv / alpha_{v,i}` for every arc kept in the slice and
/// `A_ii` on the diagonal. `coefficients = None` means `alpha = 1`.
pub fn aggregation_matrix(slice: &LayerSlice, norm: &NormalizedAdjacency, coefficients: Option<&LayerCoefficients>) -> Result<Aggregation> {
    let adj = &slice.layer.adjacency;
    let n = slice.len();
    if let Some(c) = coefficients {
        if let Some(&top) = slice.arc_to_global.iter().max() {
            if top >= c.alpha.len() {
                return Err(Error::dim(
                    "aggregation_matrix",
                    format!("arc {top} beyond {} coefficients", c.alpha.len()),
                ));
            }
        }
    }
    let mut missing_alpha = 0;
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(adj.arc_count() + n);
    let mut values = Vec::with_capacity(adj.arc_count() + n);
    indptr.push(0);
    for i in 0..n {
        let gi = slice.to_global[i];
        let mut diag_done = false;
        for arc in adj.arc_range(i) {
            let v = adj.indices()[arc];
            if !diag_done && v > i {
                indices.push(i);
                values.push(norm.entry(gi, gi));
                diag_done = true;
            }
            let alpha = match coefficients {
                None => 1.0,
                Some(c) => c.alpha[slice.arc_to_global[arc]].unwrap_or_else(|| {
                    missing_alpha += 1;
                    1.0
                }),
            };
            indices.push(v);
            values.push(norm.entry(gi, slice.to_global[v]) / alpha);
        }
        if !diag_done {
            indices.push(i);
            values.push(norm.entry(gi, gi));
        }
        indptr.push(indices.len());
    }
    if missing_alpha > 0 {
        log::debug!("{missing_alpha} sampled arcs had no pre-sampled alpha; used 1");
    }
    Ok(Aggregation {
        matrix: CsrMatrix::new(n, n, indptr, indices, values)?,
        missing_alpha,
    })
}

/// `sum_i CE(y_hat_i, y_i) / lambda_i` over the given nodes, where `y_hat_i`
/// is the predicted probability of the fake class, clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn news_loss(y_hat: &[f64], labels: &[Label], lambda: &[f64]) -> Result<f64> {
    if y_hat.len() != labels.len() || y_hat.len() != lambda.len() {
        return Err(Error::dim(
            "news_loss",
            format!("{} predictions, {} labels, {} lambdas", y_hat.len(), labels.len(), lambda.len()),
        ));
    }
    if y_hat.is_empty() {
        return Err(Error::InvalidInput("news loss over an empty node set".into()));
    }
    let mut total = 0.0;
    for ((&p, &y), &l) in y_hat.iter().zip(labels).zip(lambda) {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let ce = if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
        total += ce / l;
    }
    Ok(total)
}
