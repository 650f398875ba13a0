//! End-to-end wiring: dataset files, model persistence, the streaming
//! runtime and the command implementations behind the CLI.

pub mod commands;
pub mod config;
pub mod data;
pub mod model_file;
pub mod stream;
pub mod synth;

use thiserror::Error;

use crate::alert::ConfigError;
use crate::forest::ForestError;
use crate::preprocess::PreprocessError;

pub use commands::{cmd_encode, cmd_evaluate, cmd_synth, cmd_train, TrainOptions, TrainReport};
pub use config::{InputSource, PipelineConfig};
pub use model_file::TrainedModel;
pub use stream::{run_stream, RunSummary, StreamEngine};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error("input unavailable: {0}")]
    InputUnavailable(String),
    #[error("unreadable input: {0}")]
    UnreadableInput(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Training(#[from] ForestError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl From<PreprocessError> for PipelineError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::EmptyDataset => PipelineError::EmptyDataset,
        }
    }
}

impl PipelineError {
    /// Process exit code: 1 usage, 2 data, 3 model.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) | PipelineError::Config(_) => 1,
            PipelineError::BadModelFile(_) | PipelineError::Training(ForestError::ModelNotTrained) => 3,
            PipelineError::InputUnavailable(_)
            | PipelineError::UnreadableInput(_)
            | PipelineError::EmptyDataset
            | PipelineError::Io(_)
            | PipelineError::Training(_) => 2,
        }
    }
}
