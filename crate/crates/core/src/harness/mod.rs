//! Run orchestration, configuration, result files and reports.

mod config;
mod registry;
mod report;
mod results;
mod run;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::metric::MetricError;
use crate::scoring::ScoreError;
use crate::transforms::TransformError;

pub use config::{AspectSelection, BootstrapConfig, RunConfig, ScorerConfig};
pub use registry::{default_registry, find_model, ModelFamily, ModelRegistryEntry};
pub use report::{
    compare_runs, delta_row, format_percent, render_comparison, render_delta_report, render_report,
    Comparison, ComparisonRow, DeltaRow, ReportFormat, PRODROP_EXCLUDED_ASPECTS,
};
pub use results::{read_results, write_results, RunMeta, RunOutput};
pub use run::{build_scorer, evaluate, run_evaluation, EvalOptions};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("corpus failed validation with {errors} error(s)")]
    Validation { errors: usize },
    #[error("scorer failure: {0}")]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("aspect {0} is not declared in the corpus")]
    UnknownAspect(String),
    #[error("aspect {0} has no applicable prompt-target pairs")]
    NoPairs(String),
    #[error("a seed is required: {0}")]
    MissingSeed(String),
    #[error("{}: {message}", path.display())]
    ResultsFormat {
        path: std::path::PathBuf,
        message: String,
    },
    #[error("nothing to render")]
    EmptyResults,
    #[error("results cover different aspect sets: {0:?} vs {1:?}")]
    AspectSetMismatch(Vec<String>, Vec<String>),
    #[error("runs use different corpus versions: {0} vs {1}")]
    CorpusVersionMismatch(String, String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code: 1 for validation and configuration problems,
    /// 2 for scorer failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Score(_) => 2,
            _ => 1,
        }
    }
}
