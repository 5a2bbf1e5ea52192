//! C ABI over `defake-core`.
//!
//! Objects are opaque handles created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`DefakeStatus`]; on failure [`defake_last_error_message`] describes the
//! error on the calling thread. Pointer arguments must be valid for the
//! stated length; string arguments are NUL-terminated UTF-8. Configuration
//! is passed as JSON text, and a NULL config means the defaults.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use defake_core::data::{load_dataset, synthesize, write_dataset, SynthConfig};
use defake_core::detect::{infer, train_epoch, LayerNorms, ModelState, TrainConfig};
use defake_core::eval::{compute_metrics, run_experiment_on, SplitSpec};
use defake_core::graph::{DualLayerGraph, FAKE};
use defake_core::sampler::{compute_coefficients, estimate_probabilities, NormalizationCoefficients};
use defake_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefakeStatus {
    Ok = 0,
    /// A NULL pointer, bad length or malformed string argument.
    InvalidArgument = 1,
    /// Configuration rejected (bad JSON, out-of-range settings).
    Config = 2,
    /// Dataset missing, malformed or inconsistent.
    Data = 3,
    /// Non-finite values or a dimension mismatch during computation.
    Numeric = 4,
    Io = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

enum Fail {
    Arg(String),
    Config(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn core_status(e: &Error) -> DefakeStatus {
    match e {
        Error::Config(_) => DefakeStatus::Config,
        Error::InvalidInput(_) => DefakeStatus::InvalidArgument,
        Error::Load { .. } | Error::Data(_) | Error::Format { .. } | Error::Json(_) => DefakeStatus::Data,
        Error::Dimension { .. } | Error::Numeric(_) => DefakeStatus::Numeric,
        Error::Io(_) => DefakeStatus::Io,
        Error::Context { source, .. } => core_status(source),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DefakeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    let (status, message) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return DefakeStatus::Ok,
        Ok(Err(Fail::Arg(m))) => (DefakeStatus::InvalidArgument, m),
        Ok(Err(Fail::Config(m))) => (DefakeStatus::Config, m),
        Ok(Err(Fail::Core(e))) => (core_status(&e), e.to_string()),
        Err(panic) => {
            let m = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (DefakeStatus::Panic, format!("panic: {m}"))
        }
    };
    set_last_error(message);
    status
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Arg(format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn json_or_default<T: serde::de::DeserializeOwned + Default>(p: *const c_char, what: &str) -> Result<T, Fail> {
    if p.is_null() {
        return Ok(T::default());
    }
    serde_json::from_str(text(p, what)?).map_err(|e| Fail::Config(format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::Arg(format!("{what} is NULL")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::Arg(format!("{what} is NULL")))
}

unsafe fn out<T>(p: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Arg(format!("{what} is NULL")));
    }
    p.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    match (p.is_null(), len) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(Fail::Arg(format!("{what} is NULL"))),
        (false, _) => Ok(std::slice::from_raw_parts(p, len)),
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn defake_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn defake_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library.
#[no_mangle]
pub unsafe extern "C" fn defake_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// A loaded or generated dual-layer news/user graph.
pub struct DefakeDataset {
    graph: Arc<DualLayerGraph>,
}

fn new_dataset(graph: DualLayerGraph) -> *mut DefakeDataset {
    Box::into_raw(Box::new(DefakeDataset { graph: Arc::new(graph) }))
}

/// Loads a dataset bundle directory.
#[no_mangle]
pub unsafe extern "C" fn defake_dataset_load(dir: *const c_char, out_dataset: *mut *mut DefakeDataset) -> DefakeStatus {
    guard(|| {
        let dir = PathBuf::from(text(dir, "dir")?);
        if out_dataset.is_null() {
            return Err(Fail::Arg("out_dataset is NULL".into()));
        }
        out(out_dataset, new_dataset(load_dataset(&dir)?), "out_dataset")
    })
}

/// Generates a synthetic dataset from a JSON generator config (NULL for
/// the defaults).
#[no_mangle]
pub unsafe extern "C" fn defake_dataset_synthesize(config_json: *const c_char, out_dataset: *mut *mut DefakeDataset) -> DefakeStatus {
    guard(|| {
        let config: SynthConfig = json_or_default(config_json, "config_json")?;
        if out_dataset.is_null() {
            return Err(Fail::Arg("out_dataset is NULL".into()));
        }
        out(out_dataset, new_dataset(synthesize(&config)?), "out_dataset")
    })
}

/// Writes the dataset as a bundle directory.
#[no_mangle]
pub unsafe extern "C" fn defake_dataset_write(dataset: *const DefakeDataset, dir: *const c_char) -> DefakeStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        write_dataset(&PathBuf::from(text(dir, "dir")?), &ds.graph)?;
        Ok(())
    })
}

/// Number of news nodes (sources and cascade posts); 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn defake_dataset_news_count(dataset: *const DefakeDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.graph.news.node_count())
}

/// Number of users; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn defake_dataset_user_count(dataset: *const DefakeDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.graph.users.node_count())
}

/// Number of labeled source news; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn defake_dataset_source_count(dataset: *const DefakeDataset) -> usize {
    dataset.as_ref().map_or(0, |d| labeled_sources(&d.graph).len())
}

fn labeled_sources(graph: &DualLayerGraph) -> Vec<usize> {
    graph
        .news
        .source_nodes()
        .into_iter()
        .filter(|&i| graph.news.labels[i].is_some())
        .collect()
}

/// Copies the ids and labels (0 real, 1 fake) of the labeled source news.
/// `len` must equal `defake_dataset_source_count`.
#[no_mangle]
pub unsafe extern "C" fn defake_dataset_copy_sources(
    dataset: *const DefakeDataset,
    out_ids: *mut usize,
    out_labels: *mut u8,
    len: usize,
) -> DefakeStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let sources = labeled_sources(&ds.graph);
        if len != sources.len() {
            return Err(Fail::Arg(format!(
                "len is {len} but the dataset has {} labeled sources",
                sources.len()
            )));
        }
        if len > 0 && (out_ids.is_null() || out_labels.is_null()) {
            return Err(Fail::Arg("output buffer is NULL".into()));
        }
        for (k, &s) in sources.iter().enumerate() {
            out_ids.add(k).write(s);
            out_labels.add(k).write(ds.graph.news.labels[s].unwrap_or_default());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn defake_dataset_free(dataset: *mut DefakeDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// A model being trained on one dataset, with its sampling coefficients.
pub struct DefakeTrainer {
    graph: Arc<DualLayerGraph>,
    norms: LayerNorms,
    coefficients: NormalizationCoefficients,
    trainable: Vec<bool>,
    state: ModelState,
}

/// Mean losses of one training epoch.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DefakeEpochStats {
    /// Zero-based index of the completed epoch.
    pub epoch: usize,
    pub minibatches: usize,
    pub mean_news_loss: f64,
    pub mean_user_loss: f64,
    pub mean_loss: f64,
}

/// Creates a trainer from a JSON training config (NULL for the defaults)
/// and estimates the sampling coefficients. Only cascades rooted at the
/// given source ids contribute labels; `train_sources = NULL` with
/// `n_train = 0` trains on every labeled news node.
#[no_mangle]
pub unsafe extern "C" fn defake_trainer_new(
    dataset: *const DefakeDataset,
    config_json: *const c_char,
    train_sources: *const usize,
    n_train: usize,
    out_trainer: *mut *mut DefakeTrainer,
) -> DefakeStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let config: TrainConfig = json_or_default(config_json, "config_json")?;
        if out_trainer.is_null() {
            return Err(Fail::Arg("out_trainer is NULL".into()));
        }
        let graph = Arc::clone(&ds.graph);
        let n = graph.news.node_count();
        let trainable = if train_sources.is_null() && n_train == 0 {
            vec![true; n]
        } else {
            let ids = slice(train_sources, n_train, "train_sources")?;
            let mut in_train = vec![false; n];
            for &s in ids {
                if s >= n || graph.news.labels[s].is_none() {
                    return Err(Fail::Arg(format!("train source {s} is not a labeled news node")));
                }
                in_train[s] = true;
            }
            graph.cascade_sources()?.iter().map(|&s| in_train[s]).collect()
        };
        let state = ModelState::new(config, graph.news.attr_dim(), graph.users.attr_dim())?;
        let probs = estimate_probabilities(&graph, &state.config.sampler)?;
        let coefficients = compute_coefficients(&probs, &graph)?;
        let trainer = DefakeTrainer {
            norms: LayerNorms::new(&graph),
            graph,
            coefficients,
            trainable,
            state,
        };
        out(out_trainer, Box::into_raw(Box::new(trainer)), "out_trainer")
    })
}

/// Runs one epoch of minibatch training. `out_stats` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn defake_trainer_train_epoch(trainer: *mut DefakeTrainer, out_stats: *mut DefakeEpochStats) -> DefakeStatus {
    guard(|| {
        let t = handle_mut(trainer, "trainer")?;
        let s = train_epoch(&t.graph, &t.norms, &t.coefficients, &mut t.state, &t.trainable, &mut |_| {})?;
        if !out_stats.is_null() {
            out_stats.write(DefakeEpochStats {
                epoch: s.epoch,
                minibatches: s.minibatches,
                mean_news_loss: s.mean_l_t,
                mean_user_loss: s.mean_l_u,
                mean_loss: s.mean_loss,
            });
        }
        Ok(())
    })
}

/// Writes the fake-class probability of every news node. `len` must equal
/// `defake_dataset_news_count`.
#[no_mangle]
pub unsafe extern "C" fn defake_trainer_predict(trainer: *const DefakeTrainer, out_prob_fake: *mut f64, len: usize) -> DefakeStatus {
    guard(|| {
        let t = handle(trainer, "trainer")?;
        let n = t.graph.news.node_count();
        if len != n {
            return Err(Fail::Arg(format!("len is {len} but the dataset has {n} news nodes")));
        }
        if out_prob_fake.is_null() {
            return Err(Fail::Arg("out_prob_fake is NULL".into()));
        }
        let inference = infer(&t.graph, &t.norms, &t.state.model, t.state.config.variant)?;
        std::slice::from_raw_parts_mut(out_prob_fake, n).copy_from_slice(&inference.prob_fake);
        Ok(())
    })
}

/// Saves parameters, optimizer state and loss history as a checkpoint file.
#[no_mangle]
pub unsafe extern "C" fn defake_trainer_save(trainer: *const DefakeTrainer, path: *const c_char) -> DefakeStatus {
    guard(|| {
        let t = handle(trainer, "trainer")?;
        t.state.save(&PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn defake_trainer_free(trainer: *mut DefakeTrainer) {
    if !trainer.is_null() {
        drop(Box::from_raw(trainer));
    }
}

/// Runs a k-fold experiment and returns the report as JSON in
/// `out_report_json` (free it with `defake_string_free`).
#[no_mangle]
pub unsafe extern "C" fn defake_experiment_run(
    dataset: *const DefakeDataset,
    config_json: *const c_char,
    split_json: *const c_char,
    out_report_json: *mut *mut c_char,
) -> DefakeStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let config: TrainConfig = json_or_default(config_json, "config_json")?;
        let spec: SplitSpec = json_or_default(split_json, "split_json")?;
        if out_report_json.is_null() {
            return Err(Fail::Arg("out_report_json is NULL".into()));
        }
        config.validate()?;
        let probs = estimate_probabilities(&ds.graph, &config.sampler)?;
        let coefficients = compute_coefficients(&probs, &ds.graph)?;
        let report = run_experiment_on(&ds.graph, &coefficients, &config, &spec)?;
        let json = CString::new(report.to_json()?).map_err(|e| Fail::Arg(e.to_string()))?;
        out(out_report_json, json.into_raw(), "out_report_json")
    })
}

/// Binary classification metrics with fake (1) as the positive class.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DefakeMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// Nonzero when nothing was predicted fake, so precision is reported as 0.
    pub precision_undefined: u8,
    /// Nonzero when nothing is truly fake, so recall is reported as 0.
    pub recall_undefined: u8,
}

/// Metrics of `predicted` against `truth`, both `n` labels of 0 or 1.
#[no_mangle]
pub unsafe extern "C" fn defake_compute_metrics(
    predicted: *const u8,
    truth: *const u8,
    n: usize,
    out_metrics: *mut DefakeMetrics,
) -> DefakeStatus {
    guard(|| {
        let p = slice(predicted, n, "predicted")?;
        let t = slice(truth, n, "truth")?;
        if let Some(bad) = p.iter().chain(t).find(|&&y| y > 1) {
            return Err(Fail::Arg(format!("label {bad} is not 0 or 1")));
        }
        let m = compute_metrics(p, t, FAKE)?;
        let c = m.confusion;
        out(
            out_metrics,
            DefakeMetrics {
                accuracy: m.accuracy,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                tp: c.tp,
                fp: c.fp,
                tn: c.tn,
                fn_: c.fn_,
                precision_undefined: m.precision_undefined.into(),
                recall_undefined: m.recall_undefined.into(),
            },
            "out_metrics",
        )
    })
}
