use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Batch, LayerNorms, Layout, Model, TrainConfig, Variant};
use crate::error::{Error, Result};
use crate::graph::{DualLayerGraph, Label, FAKE, REAL};
use crate::nn::{AdamConfig, AdamState, Checkpoint, DenseMatrix, Parameter};
use crate::sampler::{random_walk_sample, NormalizationCoefficients};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub minibatch: usize,
    #[serde(rename = "L_t")]
    pub l_t: f64,
    #[serde(rename = "L_u")]
    pub l_u: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub minibatches: usize,
    pub skipped: usize,
    pub mean_l_t: f64,
    pub mean_l_u: f64,
    pub mean_loss: f64,
}

/// Trainer state: parameters, optimizer moments and the loss history.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub config: TrainConfig,
    pub model: Model<f32>,
    pub adam: AdamState<f32>,
    /// Completed epochs.
    pub epoch: usize,
    pub history: Vec<LossRecord>,
    /// Sampled arcs aggregated with the `alpha = 1` fallback so far.
    pub missing_alpha: usize,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    config: TrainConfig,
    layout: Layout,
    epoch: usize,
    adam_step: u64,
    missing_alpha: usize,
    history: Vec<LossRecord>,
}

fn adam_config(config: &TrainConfig) -> AdamConfig {
    AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    }
}

impl ModelState {
    /// Fresh parameters for attribute widths `d_t` (news) and `d_u` (users).
    pub fn new(config: TrainConfig, d_t: usize, d_u: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = Model::new(d_t, d_u, &config.model, &mut rng)?;
        let adam = AdamState::new(adam_config(&config), &model.params.iter().collect::<Vec<_>>());
        Ok(Self {
            config,
            model,
            adam,
            epoch: 0,
            history: Vec::new(),
            missing_alpha: 0,
        })
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let meta = Metadata {
            config: self.config.clone(),
            layout: self.model.layout,
            epoch: self.epoch,
            adam_step: self.adam.step,
            missing_alpha: self.missing_alpha,
            history: self.history.clone(),
        };
        let mut ck = Checkpoint {
            metadata: serde_json::to_string(&meta)?,
            records: Vec::new(),
        };
        for p in &self.model.params {
            ck.push(p.name.clone(), &p.value);
        }
        for (p, (m, v)) in self.model.params.iter().zip(self.adam.first.iter().zip(&self.adam.second)) {
            ck.push(format!("adam.m/{}", p.name), m);
            ck.push(format!("adam.v/{}", p.name), v);
        }
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: Metadata = serde_json::from_str(&ck.metadata)?;
        let names: Vec<String> = ck
            .records
            .iter()
            .map(|r| r.name.clone())
            .filter(|n| !n.starts_with("adam."))
            .collect();
        let mut params = Vec::with_capacity(names.len());
        let mut first = Vec::with_capacity(names.len());
        let mut second = Vec::with_capacity(names.len());
        for name in names {
            let value: DenseMatrix<f32> = ck.get(&name)?;
            first.push(ck.get(&format!("adam.m/{name}"))?);
            second.push(ck.get(&format!("adam.v/{name}"))?);
            params.push(Parameter::new(name, value));
        }
        let model = Model::from_params(meta.layout, params)?;
        let adam = AdamState {
            config: adam_config(&meta.config),
            step: meta.adam_step,
            first,
            second,
        };
        Ok(Self {
            config: meta.config,
            model,
            adam,
            epoch: meta.epoch,
            history: meta.history,
            missing_alpha: meta.missing_alpha,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read(path)?).map_err(|e| match e {
            Error::Json(j) => Error::Format {
                path: path.to_path_buf(),
                message: format!("bad metadata: {j}"),
            },
            other => other,
        })
    }

    fn step(&mut self, batch: &Batch<f32>) -> Result<Option<super::LossBreakdown>> {
        if batch.rows.is_empty() {
            return Ok(None);
        }
        let loss = self.model.loss(batch, self.config.variant, true)?;
        let mut refs: Vec<&mut Parameter<f32>> = self.model.params.iter_mut().collect();
        self.adam.step(&mut refs)?;
        Ok(Some(loss))
    }
}

/// One pass of minibatch training: sample a dual subgraph, forward, joint
/// loss, backward, Adam step; repeated for the configured number of
/// minibatches. The next subgraph is sampled while the current one trains.
/// `trainable[t]` marks news nodes whose labels may enter the loss.
pub fn train_epoch(
    graph: &DualLayerGraph,
    norms: &LayerNorms,
    coefficients: &NormalizationCoefficients,
    state: &mut ModelState,
    trainable: &[bool],
    on_record: &mut dyn FnMut(&LossRecord),
) -> Result<EpochSummary> {
    let epoch = state.epoch;
    let cfg = state.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1 + epoch as u64);
    let k = cfg.sampler.minibatches_per_epoch(graph.news.node_count());
    let with_users = cfg.variant.uses_users();
    let make = |rng: &mut ChaCha8Rng| -> Result<Batch<f32>> {
        let sub = random_walk_sample(graph, &cfg.sampler, rng)?;
        Batch::from_subgraph(graph, norms, &sub, Some(coefficients), trainable, with_users)
    };

    let mut next = Some(make(&mut rng)?);
    let (mut sum_t, mut sum_u, mut sum_l, mut done, mut skipped) = (0.0, 0.0, 0.0, 0usize, 0usize);
    for mb in 0..k {
        let batch = next.take().expect("prefetched");
        let start = Instant::now();
        let (result, upcoming) = rayon::join(|| state.step(&batch), || (mb + 1 < k).then(|| make(&mut rng)));
        next = upcoming.transpose()?;
        state.missing_alpha += batch.missing_alpha;
        match result? {
            None => {
                log::warn!("epoch {epoch} minibatch {mb}: no labeled training news sampled; skipped");
                skipped += 1;
            }
            Some(loss) => {
                let record = LossRecord {
                    epoch,
                    minibatch: mb,
                    l_t: loss.l_t,
                    l_u: loss.l_u,
                    l: loss.total,
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                };
                on_record(&record);
                state.history.push(record);
                sum_t += loss.l_t;
                sum_u += loss.l_u;
                sum_l += loss.total;
                done += 1;
            }
        }
    }
    if done == 0 {
        return Err(Error::Data(format!(
            "every minibatch of epoch {epoch} lacked labeled training news"
        )));
    }
    state.epoch += 1;
    let n = done as f64;
    Ok(EpochSummary {
        epoch,
        minibatches: done,
        skipped,
        mean_l_t: sum_t / n,
        mean_l_u: sum_u / n,
        mean_loss: sum_l / n,
    })
}

/// Full-graph predictions for every news node.
#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub prob_fake: Vec<f64>,
    pub predicted: Vec<Label>,
}

impl Inference {
    pub fn labels_at(&self, nodes: &[usize]) -> Vec<Label> {
        nodes.iter().map(|&i| self.predicted[i]).collect()
    }
}

/// Full-graph forward with `alpha = 1` and fusion over every posting edge.
/// A node is predicted fake only when its fake logit is strictly larger, so
/// ties go to real.
pub fn infer(graph: &DualLayerGraph, norms: &LayerNorms, model: &Model<f32>, variant: Variant) -> Result<Inference> {
    let batch = Batch::<f32>::full(graph, norms, None, false)?;
    let logits = model.logits(&batch, variant)?;
    let mut prob_fake = Vec::with_capacity(logits.rows());
    let mut predicted = Vec::with_capacity(logits.rows());
    for i in 0..logits.rows() {
        let (real, fake) = (logits.get(i, 0) as f64, logits.get(i, 1) as f64);
        prob_fake.push(1.0 / (1.0 + (real - fake).exp()));
        predicted.push(if fake > real { FAKE } else { REAL });
    }
    Ok(Inference { prob_fake, predicted })
}
