//! Frozen-feature linear probes on a suite of transfer tasks.
//!
//! Confidence intervals resample (probe seed, test example) pairs jointly.

mod bootstrap;
mod features;
mod metrics;
mod probe;
mod report;
mod tasks;

pub use bootstrap::{bootstrap_ci, bootstrap_distribution, percentile_interval, quantile_sorted};
pub use features::{encode_images, extract_features};
pub use metrics::{balanced_weights, class_balanced_accuracy, Labels, Predictions, TaskKind};
pub use probe::{train_probe, LinearProbe, ProbeConfig, ProbeFit, Standardizer};
pub use report::{
    evaluate, evaluate_encoder, format_estimate, summarize, Estimate, PooledOutcomes, ProbeReport, TaskScore,
};
pub use tasks::{
    build_suite, build_task, suite_v1, LabelRule, SceneSource, Split, TaskSpec, TransferTask, SUITE_VERSION,
};
