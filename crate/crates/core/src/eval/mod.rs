//! Splits, classification metrics and the repeated-split experiment driver.

mod experiment;
mod metrics;
mod split;

pub use experiment::{format_table, run_experiment, run_experiment_on, EpochLog, FoldResult, MetricsReport, Summary, PRESAMPLE_CACHE};
pub use metrics::{compute_metrics, Confusion, Metrics};
pub use split::{split_nodes, Split, SplitSpec, MIN_SPLIT_NODES};
