use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, Metrics};
use super::split::{split_nodes, Split, SplitSpec};
use crate::data::load_dataset;
use crate::detect::{infer, train_epoch, LayerNorms, Model, ModelState, TrainConfig, Variant};
use crate::error::{Error, Result};
use crate::graph::{DualLayerGraph, Label, FAKE};
use crate::sampler::{compute_coefficients, load_or_estimate, NormalizationCoefficients};

/// File name of the presampling cache written next to a dataset.
pub const PRESAMPLE_CACHE: &str = "presample.cache";

/// Mean and population standard deviation over folds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_l_t: f64,
    pub mean_l_u: f64,
    pub mean_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    /// Epoch whose parameters produced `test`.
    pub selected_epoch: usize,
    pub val_accuracy: Option<f64>,
    pub test: Metrics,
    pub epochs: Vec<EpochLog>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: Variant,
    pub config: TrainConfig,
    pub split: SplitSpec,
    pub folds: Vec<FoldResult>,
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
}

impl MetricsReport {
    pub fn from_folds(config: TrainConfig, split: SplitSpec, folds: Vec<FoldResult>) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::InvalidInput("a report needs at least one fold".into()));
        }
        let summary = |f: fn(&Metrics) -> f64| Summary::of(&folds.iter().map(|r| f(&r.test)).collect::<Vec<_>>());
        Ok(Self {
            variant: config.variant,
            accuracy: summary(|m| m.accuracy),
            precision: summary(|m| m.precision),
            recall: summary(|m| m.recall),
            f1: summary(|m| m.f1),
            config,
            split,
            folds,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Plain-text table with one row per report: `mean±std` of each metric.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut out = format!("{:<10} {:>13} {:>13} {:>13} {:>13}\n", "Method", "Acc", "Pre", "Rec", "F1");
    for r in reports {
        let cell = |s: Summary| format!("{:.3}±{:.3}", s.mean, s.std);
        let _ = writeln!(
            out,
            "{:<10} {:>13} {:>13} {:>13} {:>13}",
            r.variant.name(),
            cell(r.accuracy),
            cell(r.precision),
            cell(r.recall),
            cell(r.f1)
        );
    }
    out
}

fn accuracy_on(predicted: &[Label], graph: &DualLayerGraph, nodes: &[usize]) -> f64 {
    let hits = nodes.iter().filter(|&&i| Some(predicted[i]) == graph.news.labels[i]).count();
    hits as f64 / nodes.len() as f64
}

fn truth(graph: &DualLayerGraph, nodes: &[usize]) -> Vec<Label> {
    nodes
        .iter()
        .map(|&i| graph.news.labels[i].expect("split ids are labeled"))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    graph: &DualLayerGraph,
    norms: &LayerNorms,
    coefficients: &NormalizationCoefficients,
    source_of: &[usize],
    config: &TrainConfig,
    split: &Split,
    fold: usize,
) -> Result<FoldResult> {
    if split.test.is_empty() {
        return Err(Error::Config("the test split is empty".into()));
    }
    let mut in_train = vec![false; graph.news.node_count()];
    for &s in &split.train {
        in_train[s] = true;
    }
    let trainable: Vec<bool> = source_of.iter().map(|&s| in_train[s]).collect();

    let mut fold_config = config.clone();
    fold_config.seed = config.seed.wrapping_add(fold as u64);
    let mut state = ModelState::new(fold_config, graph.news.attr_dim(), graph.users.attr_dim())?;
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Model<f32>)> = None;
    for _ in 0..config.epochs {
        let summary = train_epoch(graph, norms, coefficients, &mut state, &trainable, &mut |_| {})?;
        let val_accuracy = if split.val.is_empty() {
            None
        } else {
            let inference = infer(graph, norms, &state.model, config.variant)?;
            Some(accuracy_on(&inference.predicted, graph, &split.val))
        };
        log::info!(
            "fold {fold} epoch {}: loss {:.5} val acc {}",
            summary.epoch,
            summary.mean_loss,
            val_accuracy.map_or("-".into(), |a| format!("{a:.4}"))
        );
        let improves = match (&best, val_accuracy) {
            (None, _) => true,
            (Some(_), None) => true,
            (Some((_, b, _)), Some(a)) => a > *b,
        };
        if improves {
            best = Some((summary.epoch, val_accuracy.unwrap_or(f64::NAN), state.model.clone()));
        }
        epochs.push(EpochLog {
            epoch: summary.epoch,
            mean_l_t: summary.mean_l_t,
            mean_l_u: summary.mean_l_u,
            mean_loss: summary.mean_loss,
            val_accuracy,
        });
    }
    let (selected_epoch, _, model) = best.expect("at least one epoch");
    let inference = infer(graph, norms, &model, config.variant)?;
    let test = compute_metrics(&inference.labels_at(&split.test), &truth(graph, &split.test), FAKE)?;
    Ok(FoldResult {
        fold,
        train_size: split.train.len(),
        val_size: split.val.len(),
        test_size: split.test.len(),
        selected_epoch,
        val_accuracy: epochs[selected_epoch].val_accuracy,
        test,
        epochs,
    })
}

/// Repeated stratified splits of the labeled source news. Each fold trains
/// a fresh model (seed `config.seed + fold`), keeps the parameters of the
/// epoch with the best validation accuracy (the last epoch when there is no
/// validation split) and scores them on the test sources. Folds run in
/// parallel; the report does not depend on the thread count.
pub fn run_experiment_on(
    graph: &DualLayerGraph,
    coefficients: &NormalizationCoefficients,
    config: &TrainConfig,
    spec: &SplitSpec,
) -> Result<MetricsReport> {
    config.validate()?;
    spec.validate()?;
    let norms = LayerNorms::new(graph);
    let source_of = graph.cascade_sources()?;
    let sources: Vec<usize> = graph
        .news
        .source_nodes()
        .into_iter()
        .filter(|&i| graph.news.labels[i].is_some())
        .collect();
    let labels = truth(graph, &sources);
    let splits = (0..spec.folds)
        .map(|fold| split_nodes(&sources, &labels, spec, fold))
        .collect::<Result<Vec<_>>>()?;
    let folds = splits
        .par_iter()
        .enumerate()
        .map(|(fold, split)| {
            run_fold(graph, &norms, coefficients, &source_of, config, split, fold).map_err(|e| e.context(format!("fold {fold}")))
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_folds(config.clone(), spec.clone(), folds)
}

/// Loads the dataset in `dir`, estimates (or reuses cached) sampling
/// coefficients and runs [`run_experiment_on`].
pub fn run_experiment(dir: &Path, config: &TrainConfig, spec: &SplitSpec) -> Result<MetricsReport> {
    config.validate()?;
    let graph = load_dataset(dir)?;
    let probs = load_or_estimate(&graph, &config.sampler, &dir.join(PRESAMPLE_CACHE))?;
    let coefficients = compute_coefficients(&probs, &graph)?;
    run_experiment_on(&graph, &coefficients, config, spec)
}
