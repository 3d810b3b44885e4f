use std::path::PathBuf;

/// Errors raised anywhere in the training and evaluation stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{layer}: dimension mismatch: {detail}")]
    Dimension { layer: String, detail: String },

    #[error("{layer}: empty sequence (T = 0)")]
    EmptySequence { layer: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("record {id}: field `{field}`: {detail}")]
    Record {
        id: String,
        field: String,
        detail: String,
    },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("unknown system `{0}` (expected baseline1, baseline2, ti-avc or joint)")]
    UnknownSystem(String),

    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },

    #[error("contribution report is degenerate: total input mass is zero")]
    DegenerateContribution,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(layer: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Dimension {
            layer: layer.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn record(
        id: impl Into<String>,
        field: impl Into<String>,
        detail: impl Into<String>,
    ) -> Self {
        Error::Record {
            id: id.into(),
            field: field.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code used by the command-line front end:
    /// 2 for validation problems, 3 for numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::DegenerateContribution => 3,
            Error::Dimension { .. }
            | Error::EmptySequence { .. }
            | Error::Config(_)
            | Error::InvalidTarget(_)
            | Error::Record { .. }
            | Error::Dataset(_)
            | Error::Checkpoint { .. }
            | Error::Json(_) => 2,
            Error::UnknownSystem(_) => 1,
            Error::Evaluation(_) | Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
