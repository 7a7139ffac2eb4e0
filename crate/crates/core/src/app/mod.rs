//! Command line and HTTP front ends: corpus commands, the three evaluation
//! tasks and interactive editing sessions.

pub mod cli;
mod config;
pub mod http;
mod session;
mod tasks;

pub use config::{ServiceConfig, DEFAULT_LISTEN, LISTEN_ENV};
pub use session::{random_toggles, replay, EditReport, RandomizeReport, Session};
pub use tasks::{generate_auto, generate_lenient, run_task, Task, TaskOptions, TaskOutcome, TaskSpec};

use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::encoder::EncoderError;
use crate::metrics::MetricsError;
use crate::model::ModelError;
use crate::relations::EditError;
use crate::synth::SynthError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session {0:?} is already generating")]
    Busy(String),
    #[error("no layout could be generated ({failures} failures, first {first})")]
    NothingGenerated { failures: usize, first: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("internal: {0}")]
    Internal(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Edit(#[from] EditError),
}

impl AppError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> AppError {
        let path = path.into();
        move |source| AppError::Io { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => EXIT_USAGE,
            AppError::NothingGenerated { .. } => EXIT_INFEASIBLE,
            AppError::Synth(e) => match e {
                SynthError::Conflicts(_) | SynthError::Infeasible { .. } | SynthError::ContractViolation { .. } => {
                    EXIT_INFEASIBLE
                }
                _ => EXIT_DATA,
            },
            _ => EXIT_DATA,
        }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self {
            AppError::UnknownSession(_) => 404,
            AppError::Busy(_) => 409,
            AppError::Synth(SynthError::Conflicts(_)) => 409,
            AppError::Synth(SynthError::Infeasible { .. } | SynthError::ContractViolation { .. }) => 422,
            AppError::NothingGenerated { .. } => 422,
            AppError::Io { .. } | AppError::Internal(_) => 500,
            _ => 400,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            AppError::Usage(_) => "usage",
            AppError::Malformed(_) => "malformed_request",
            AppError::UnknownSession(_) => "unknown_session",
            AppError::Busy(_) => "generation_in_progress",
            AppError::NothingGenerated { .. } => "infeasible",
            AppError::Config(_) => "config",
            AppError::Data(_) => "data",
            AppError::Internal(_) => "internal",
            AppError::Io { .. } => "io",
            AppError::Model(_) => "invalid_layout",
            AppError::Dataset(_) => "dataset",
            AppError::Encoder(_) => "encoder",
            AppError::Metrics(_) => "metrics",
            AppError::Edit(_) => "invalid_edit",
            AppError::Synth(e) => match e {
                SynthError::Conflicts(_) => "conflicted_matrix",
                SynthError::Infeasible { .. } => "infeasible",
                SynthError::ContractViolation { .. } => "contract_violation",
                SynthError::UnknownBackend(_) => "unknown_backend",
                SynthError::InvalidRequest(_) | SynthError::DuplicateBackend(_) => "invalid_request",
            },
        }
    }

    pub fn details(&self) -> Value {
        match self {
            AppError::Synth(SynthError::Conflicts(c)) => json!({ "conflicts": c }),
            AppError::Synth(SynthError::Infeasible { reason, violations }) => {
                json!({ "reason": reason, "violations": violations })
            }
            AppError::Synth(SynthError::ContractViolation {
                backend,
                mismatches,
                altered_fixed,
            }) => json!({ "backend": backend, "mismatches": mismatches, "altered_fixed": altered_fixed }),
            AppError::UnknownSession(id) | AppError::Busy(id) => json!({ "session_id": id }),
            _ => Value::Null,
        }
    }

    /// The `{code, message, details}` body sent to clients.
    pub fn body(&self) -> Value {
        json!({ "code": self.code(), "message": self.to_string(), "details": self.details() })
    }
}
