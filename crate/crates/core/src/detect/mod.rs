//! User-aware news classification: fusion of user embeddings into news
//! embeddings, the two-class softmax head, the joint loss and training.
//!
//! A news node `i` posted by users `U_i` receives `h_i + mean_{j in U_i} z_j`.
//! Source news have no posting users, so fusion reaches them only through
//! the news layer's own aggregation. With the default
//! [`FusionPoint::BeforeFinalLayer`] the fused cascade embeddings feed the
//! last GCN layer, which is what lets user signal inform source predictions;
//! [`FusionPoint::AfterFinalLayer`] fuses right before the head.

mod batch;
mod train;
mod verify;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::news::{gcn_layer, glorot};
use crate::nn::{row_softmax, CsrMatrix, DenseMatrix, Parameter, Real, Tape, Var};
use crate::sampler::SamplerConfig;
use crate::users::record_user_loss;

pub use batch::{fusion_matrix, Batch, LayerNorms};
pub use train::{infer, train_epoch, EpochSummary, Inference, LossRecord, ModelState};
pub use verify::{check_gradients, gradcheck_random};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// News layer only; `L = L_t`.
    #[serde(rename = "defake")]
    DeFake,
    /// Both encoders trained, user embeddings fused without gradient flow.
    #[serde(rename = "udefake")]
    UDeFake,
    /// Both encoders trained jointly through the fusion.
    #[serde(rename = "us-defake")]
    UsDeFake,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::DeFake, Variant::UDeFake, Variant::UsDeFake];

    pub fn name(self) -> &'static str {
        match self {
            Variant::DeFake => "defake",
            Variant::UDeFake => "udefake",
            Variant::UsDeFake => "us-defake",
        }
    }

    pub fn uses_users(self) -> bool {
        self != Variant::DeFake
    }

    fn training_fusion(self) -> FusionMode {
        match self {
            Variant::DeFake => FusionMode::Off,
            Variant::UDeFake => FusionMode::Detached,
            Variant::UsDeFake => FusionMode::Connected,
        }
    }

    fn inference_fusion(self) -> FusionMode {
        match self {
            Variant::DeFake => FusionMode::Off,
            _ => FusionMode::Connected,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?} (expected defake, udefake or us-defake)")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionPoint {
    #[default]
    BeforeFinalLayer,
    AfterFinalLayer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionMode {
    Off,
    /// Fuse a constant copy of `Z`: no adjoint reaches the user encoder.
    Detached,
    Connected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Width of every hidden and output embedding, news and users alike.
    pub dim: usize,
    /// GCN layers per encoder.
    pub layers: usize,
    pub fusion: FusionPoint,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 512,
            layers: 2,
            fusion: FusionPoint::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub variant: Variant,
    /// Seeds parameter initialization and minibatch sampling.
    pub seed: u64,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 0.01,
            variant: Variant::UsDeFake,
            seed: 0,
            model: ModelConfig::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} is not a finite non-negative number",
                self.lr
            )));
        }
        if self.model.dim == 0 || self.model.layers == 0 {
            return Err(Error::Config("model dim and layers must be positive".into()));
        }
        self.sampler.validate()
    }
}

/// Where each parameter lives in [`Model::params`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub news_layers: usize,
    pub user_layers: usize,
    pub fusion: FusionPoint,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.news_layers + self.user_layers + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn news(&self) -> std::ops::Range<usize> {
        0..self.news_layers
    }

    fn users(&self) -> std::ops::Range<usize> {
        self.news_layers..self.news_layers + self.user_layers
    }

    fn classifier_w(&self) -> usize {
        self.news_layers + self.user_layers
    }

    fn classifier_b(&self) -> usize {
        self.classifier_w() + 1
    }
}

/// Classifier head `softmax(h W_f + b_f)` over (real, fake).
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams<T> {
    pub w: DenseMatrix<T>,
    pub b: DenseMatrix<T>,
}

/// All trainable parameters in a fixed order: news encoder layers, user
/// encoder layers, `W_f`, `b_f`.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub layout: Layout,
    pub params: Vec<Parameter<T>>,
}

/// Loss components of one forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l_t: f64,
    pub l_u: f64,
    pub total: f64,
}

impl<T: Real> Model<T> {
    pub fn new<R: Rng + ?Sized>(d_t: usize, d_u: usize, config: &ModelConfig, rng: &mut R) -> Result<Self> {
        if d_t == 0 || d_u == 0 || config.dim == 0 || config.layers == 0 {
            return Err(Error::Config("attribute dims, dim and layers must be positive".into()));
        }
        let layout = Layout {
            news_layers: config.layers,
            user_layers: config.layers,
            fusion: config.fusion,
        };
        let mut params = Vec::with_capacity(layout.len());
        for (prefix, d_in) in [("news", d_t), ("user", d_u)] {
            for l in 0..config.layers {
                let rows = if l == 0 { d_in } else { config.dim };
                params.push(Parameter::new(format!("{prefix}.{l}"), glorot(rows, config.dim, rng)));
            }
        }
        params.push(Parameter::new("classifier.w", glorot(config.dim, 2, rng)));
        params.push(Parameter::new("classifier.b", DenseMatrix::zeros(1, 2)));
        Self::from_params(layout, params)
    }

    pub fn from_params(layout: Layout, params: Vec<Parameter<T>>) -> Result<Self> {
        if params.len() != layout.len() {
            return Err(Error::dim(
                "model",
                format!("{} parameters for a layout of {}", params.len(), layout.len()),
            ));
        }
        let chain = |range: std::ops::Range<usize>| -> Result<()> {
            for l in range.start + 1..range.end {
                if params[l - 1].value.cols() != params[l].value.rows() {
                    return Err(Error::dim(
                        "model",
                        format!("{} does not chain into {}", params[l - 1].name, params[l].name),
                    ));
                }
            }
            Ok(())
        };
        chain(layout.news())?;
        chain(layout.users())?;
        let w = &params[layout.classifier_w()].value;
        let b = &params[layout.classifier_b()].value;
        if w.cols() != 2 || b.shape() != (1, 2) || w.rows() != params[layout.news_layers - 1].value.cols() {
            return Err(Error::dim("model", format!("classifier {:?} / {:?}", w.shape(), b.shape())));
        }
        Ok(Self { layout, params })
    }

    pub fn classifier(&self) -> ClassifierParams<T> {
        ClassifierParams {
            w: self.params[self.layout.classifier_w()].value.clone(),
            b: self.params[self.layout.classifier_b()].value.clone(),
        }
    }

    pub fn news_input_dim(&self) -> usize {
        self.params[0].value.rows()
    }

    pub fn user_input_dim(&self) -> usize {
        self.params[self.layout.news_layers].value.rows()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            layout: self.layout,
            params: self.params.iter().map(Parameter::cast).collect(),
        }
    }

    /// Class logits for every news node of `batch` (value only).
    pub fn logits(&self, batch: &Batch<T>, variant: Variant) -> Result<DenseMatrix<T>> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.value.clone())).collect();
        let (logits, _) = forward(&mut tape, &self.layout, &vars, batch, variant.inference_fusion(), false)?;
        Ok(tape.value(logits).clone())
    }

    /// Evaluates the training loss of `batch`. With `backward`, gradients are
    /// added into `params[*].grad`.
    pub fn loss(&mut self, batch: &Batch<T>, variant: Variant, backward: bool) -> Result<LossBreakdown> {
        compute_loss(&self.layout, &mut self.params, batch, variant, backward)
    }
}

/// Forward pass on `tape`. Returns the logits and, when computed, `Z`.
fn forward<T: Real>(
    tape: &mut Tape<T>,
    layout: &Layout,
    vars: &[Var],
    batch: &Batch<T>,
    mode: FusionMode,
    need_z: bool,
) -> Result<(Var, Option<Var>)> {
    let z = if mode != FusionMode::Off || need_z {
        let mut z = tape.constant(batch.user_x.clone());
        let ws = &vars[layout.users()];
        for (l, &w) in ws.iter().enumerate() {
            z = gcn_layer(tape, &batch.user_agg, z, w, l + 1 < ws.len())?;
        }
        Some(z)
    } else {
        None
    };
    let fused = match (mode, z) {
        (FusionMode::Off, _) | (_, None) => None,
        (FusionMode::Detached, Some(z)) => Some(tape.detach(z)),
        (FusionMode::Connected, Some(z)) => Some(z),
    };
    let fuse = |tape: &mut Tape<T>, h: Var| -> Result<Var> {
        match fused {
            Some(z) => {
                let pooled = tape.spmm(Arc::clone(&batch.fusion), z)?;
                tape.add(h, pooled)
            }
            None => Ok(h),
        }
    };

    let ws = &vars[layout.news()];
    let mut h = tape.constant(batch.news_x.clone());
    for (l, &w) in ws.iter().enumerate() {
        if l + 1 == ws.len() && layout.fusion == FusionPoint::BeforeFinalLayer {
            h = fuse(tape, h)?;
        }
        h = gcn_layer(tape, &batch.news_agg, h, w, l + 1 < ws.len())?;
    }
    if layout.fusion == FusionPoint::AfterFinalLayer {
        h = fuse(tape, h)?;
    }
    let scores = tape.matmul(h, vars[layout.classifier_w()])?;
    let logits = tape.add_row_bias(scores, vars[layout.classifier_b()])?;
    Ok((logits, z))
}

/// `L = L_t + L_u` (`L_u = 0` for [`Variant::DeFake`]) on one batch.
pub fn compute_loss<T: Real>(
    layout: &Layout,
    params: &mut [Parameter<T>],
    batch: &Batch<T>,
    variant: Variant,
    backward: bool,
) -> Result<LossBreakdown> {
    if params.len() != layout.len() {
        return Err(Error::dim(
            "compute_loss",
            format!("{} parameters for a layout of {}", params.len(), layout.len()),
        ));
    }
    if batch.rows.is_empty() {
        return Err(Error::InvalidInput("batch has no labeled news nodes".into()));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
    let want_user_loss = variant.uses_users() && batch.user_target.is_some();
    let (logits, z) = forward(&mut tape, layout, &vars, batch, variant.training_fusion(), want_user_loss)?;
    let l_t = tape.softmax_cross_entropy(logits, batch.rows.clone(), batch.targets.clone(), batch.weights.clone())?;
    let (total, l_u) = match (want_user_loss, z, &batch.user_target) {
        (true, Some(z), Some(target)) => {
            let l_u = record_user_loss(&mut tape, z, Arc::clone(target), batch.user_weights.clone())?;
            (tape.add(l_t, l_u)?, Some(l_u))
        }
        _ => (l_t, None),
    };
    let breakdown = LossBreakdown {
        l_t: tape.value(l_t).item().as_f64(),
        l_u: l_u.map_or(0.0, |v| tape.value(v).item().as_f64()),
        total: tape.value(total).item().as_f64(),
    };
    if backward {
        let grads = tape.backward(total)?;
        for (v, p) in vars.iter().zip(params.iter_mut()) {
            grads.accumulate_into(*v, p)?;
        }
    }
    Ok(breakdown)
}

/// `h_i + mean_{j in U_i} z_j` for every news row; rows without posting
/// users are unchanged. `inter` holds `(user row, news row)` pairs.
pub fn fuse_user_into_news<T: Real>(h: &DenseMatrix<T>, z: &DenseMatrix<T>, inter: &[(usize, usize)]) -> Result<DenseMatrix<T>> {
    if h.cols() != z.cols() {
        return Err(Error::dim(
            "fuse_user_into_news",
            format!("news width {} vs user width {}", h.cols(), z.cols()),
        ));
    }
    let m: CsrMatrix<T> = fusion_matrix(h.rows(), z.rows(), inter)?.cast();
    h.add(&m.spmm(z)?)
}

/// Row-wise (real, fake) probabilities.
pub fn classify<T: Real>(h: &DenseMatrix<T>, params: &ClassifierParams<T>) -> Result<DenseMatrix<T>> {
    if params.b.shape() != (1, params.w.cols()) {
        return Err(Error::dim(
            "classify",
            format!("bias {:?} for weight {:?}", params.b.shape(), params.w.shape()),
        ));
    }
    let mut logits = h.matmul(&params.w)?;
    for i in 0..logits.rows() {
        for (x, &b) in logits.row_mut(i).iter_mut().zip(params.b.as_slice()) {
            *x += b;
        }
    }
    Ok(row_softmax(&logits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_layer, DualLayerGraph, NodeRole};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[Vec<f64>]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn fusion_averages_posting_users() {
        let h = m(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let z = m(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let fused = fuse_user_into_news(&h, &z, &[(0, 0), (1, 0)]).unwrap();
        assert_eq!(fused, m(&[vec![1.0, 1.0], vec![1.0, 1.0]]));
    }

    #[test]
    fn zero_user_embedding_and_no_posters_leave_news_unchanged() {
        let h = m(&[vec![0.3, -0.2], vec![4.0, 5.0]]);
        let z = m(&[vec![0.0, 0.0]]);
        assert_eq!(fuse_user_into_news(&h, &z, &[(0, 1)]).unwrap(), h);
        let z = m(&[vec![7.0, 7.0]]);
        let fused = fuse_user_into_news(&h, &z, &[(0, 1)]).unwrap();
        assert_eq!(fused.row(0), h.row(0));
        assert!(fuse_user_into_news(&h, &m(&[vec![1.0]]), &[]).is_err());
    }

    #[test]
    fn zero_head_is_uniform_and_bias_gives_sigmoid() {
        let h = m(&[vec![1.0, -3.0], vec![0.5, 2.0]]);
        let zero = ClassifierParams {
            w: DenseMatrix::zeros(2, 2),
            b: DenseMatrix::zeros(1, 2),
        };
        assert!(classify(&h, &zero).unwrap().as_slice().iter().all(|&p| p == 0.5));
        let c = 1.7;
        let biased = ClassifierParams {
            w: DenseMatrix::zeros(2, 2),
            b: m(&[vec![0.0, c]]),
        };
        let p = classify(&h, &biased).unwrap();
        assert!((p.get(0, 1) - 1.0 / (1.0 + (-c).exp())).abs() < 1e-15);
    }

    #[test]
    fn shifting_both_logits_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = DenseMatrix::from_fn(6, 3, |_, _| rng.gen_range(-2.0..2.0));
        let w = DenseMatrix::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
        let a = classify(
            &h,
            &ClassifierParams {
                w: w.clone(),
                b: m(&[vec![0.1, -0.4]]),
            },
        )
        .unwrap();
        let b = classify(
            &h,
            &ClassifierParams {
                w,
                b: m(&[vec![5.1, 4.6]]),
            },
        )
        .unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
        assert!("gat".parse::<Variant>().is_err());
    }

    fn tiny_graph() -> DualLayerGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let news_x = DenseMatrix::from_fn(6, 3, |_, _| rng.gen_range(-1.0..1.0));
        let labels = vec![Some(0), Some(0), Some(0), Some(1), Some(1), Some(1)];
        let roles = vec![
            NodeRole::SourceNews,
            NodeRole::CascadePost,
            NodeRole::CascadePost,
            NodeRole::SourceNews,
            NodeRole::CascadePost,
            NodeRole::CascadePost,
        ];
        let news = build_layer(6, &[(0, 1), (1, 2), (3, 4), (3, 5)], news_x, Some(labels))
            .unwrap()
            .with_roles(roles)
            .unwrap();
        let user_x = DenseMatrix::from_fn(4, 2, |_, _| rng.gen_range(-1.0..1.0));
        let users = build_layer(4, &[(0, 1), (2, 3)], user_x, None).unwrap();
        DualLayerGraph::new(news, users, vec![(0, 1), (1, 2), (2, 4), (3, 5)]).unwrap()
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            dim: 4,
            layers: 2,
            fusion: FusionPoint::BeforeFinalLayer,
        }
    }

    #[test]
    fn reported_total_is_the_sum_of_parts() {
        let g = tiny_graph();
        let norms = LayerNorms::new(&g);
        let batch = Batch::<f64>::full(&g, &norms, Some(&[true; 6]), true).unwrap();
        let mut model = Model::<f64>::new(3, 2, &small_config(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for v in Variant::ALL {
            let l = model.loss(&batch, v, false).unwrap();
            assert_eq!(l.total, l.l_t + l.l_u);
            assert_eq!(v == Variant::DeFake, l.l_u == 0.0);
        }
    }

    #[test]
    fn news_loss_reaches_user_encoder_only_when_connected() {
        let g = tiny_graph();
        let norms = LayerNorms::new(&g);
        let mut batch = Batch::<f64>::full(&g, &norms, Some(&[true; 6]), true).unwrap();
        batch.user_target = None;
        let mut model = Model::<f64>::new(3, 2, &small_config(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let user_grad_norm =
            |model: &Model<f64>| -> f64 { model.params[model.layout.users()].iter().map(|p| p.grad.frobenius_norm()).sum() };
        model.loss(&batch, Variant::UsDeFake, true).unwrap();
        assert!(user_grad_norm(&model) > 0.0);
        for p in &mut model.params {
            p.zero_grad();
        }
        model.loss(&batch, Variant::UDeFake, true).unwrap();
        assert_eq!(user_grad_norm(&model), 0.0);
    }

    #[test]
    fn fusion_after_the_last_layer_cannot_move_source_logits() {
        let g = tiny_graph();
        let norms = LayerNorms::new(&g);
        let batch = Batch::<f64>::full(&g, &norms, None, false).unwrap();
        let mut cfg = small_config();
        cfg.fusion = FusionPoint::AfterFinalLayer;
        let model = Model::<f64>::new(3, 2, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let with = model.logits(&batch, Variant::UsDeFake).unwrap();
        let without = model.logits(&batch, Variant::DeFake).unwrap();
        for source in [0, 3] {
            assert_eq!(with.row(source), without.row(source));
        }
        assert_ne!(with.row(1), without.row(1));

        cfg.fusion = FusionPoint::BeforeFinalLayer;
        let model = Model::<f64>::new(3, 2, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let with = model.logits(&batch, Variant::UsDeFake).unwrap();
        let without = model.logits(&batch, Variant::DeFake).unwrap();
        assert_ne!(with.row(0), without.row(0));
    }

    #[test]
    fn mismatched_layout_is_rejected() {
        let model = Model::<f64>::new(3, 2, &small_config(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut params = model.params.clone();
        params.pop();
        assert!(Model::from_params(model.layout, params).is_err());
        let mut params = model.params.clone();
        params[1].value = DenseMatrix::zeros(5, 4);
        assert!(Model::from_params(model.layout, params).is_err());
    }
}
