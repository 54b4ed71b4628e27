//! Evaluation: similarity and correlation metrics, STS scoring and
//! multi-seed experiment reports.

mod harness;
mod metrics;
mod report;
mod sts;

pub use harness::{cumulative_ladder, run_bias_ablation, run_objective_comparison, ObjectiveExperiment, StsSet};
pub use metrics::{average_ranks, cosine, dot, norm, pearson, spearman};
pub use report::{EvalReport, ReportRow, SeedStats};
pub use sts::{eval_sts, predict_similarities};

/// A sentence pair with a gold similarity score in [0, 5].
#[derive(Debug, Clone, PartialEq)]
pub struct StsPair {
    pub sentence1: String,
    pub sentence2: String,
    pub gold: f64,
}
