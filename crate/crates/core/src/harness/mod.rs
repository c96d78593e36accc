//! Experiment harness: data ingestion, synthetic captures, splits, metrics and
//! reproducible experiment reports.

use std::path::PathBuf;

use thiserror::Error;

use crate::skeleton::SkeletonError;
use crate::svm::SvmError;
use crate::tuning::TuningError;

pub mod experiment;
pub mod io;
pub mod metrics;
pub mod split;
pub mod synth;

pub use experiment::{
    derive_seed, render_text, run_experiment, write_outputs, DataSource, ExperimentConfig,
    ExperimentReport, FitnessKind, MethodReport, REPORT_SCHEMA_VERSION,
};
pub use io::{load_dataset, Annotation};
pub use metrics::{evaluate, ConfusionMatrix};
pub use split::{split, Split};
pub use synth::{synth_generate, SynthSpec, SyntheticCapture};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{input}:{line}: {message}")]
    Parse {
        input: String,
        line: usize,
        message: String,
    },
    #[error("annotation {annotation}: window {start}..={end} is outside the capture's {frames} frames")]
    WindowOutOfRange {
        annotation: usize,
        start: usize,
        end: usize,
        frames: usize,
    },
    #[error("{context}: {source}")]
    Skeleton {
        context: String,
        #[source]
        source: SkeletonError,
    },
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Tuning(#[from] TuningError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
    #[error("report error: {0}")]
    Report(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<HarnessError>,
    },
}

impl HarnessError {
    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(HarnessError) -> HarnessError {
        move |source| HarnessError::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
