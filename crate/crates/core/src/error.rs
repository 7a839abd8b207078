use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = VaweError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VaweError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("{}line {line}: {msg}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("class `{0}` has no feature rows")]
    MissingClass(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}: {msg}")]
    Divergence { epoch: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl VaweError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        VaweError::Parse {
            path: None,
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VaweError::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a file path to a parse error produced by a reader.
    pub(crate) fn at_path(self, p: &std::path::Path) -> Self {
        match self {
            VaweError::Parse { line, msg, .. } => VaweError::Parse {
                path: Some(p.to_path_buf()),
                line,
                msg,
            },
            other => other,
        }
    }

    /// Short category tag used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            VaweError::Shape(_) => "shape",
            VaweError::NotPositiveDefinite { .. } | VaweError::Numeric(_) => "numeric",
            VaweError::Divergence { .. } => "divergence",
            VaweError::Parse { .. } | VaweError::Json(_) => "parse",
            VaweError::Checkpoint(_) => "checkpoint",
            VaweError::Config(_) => "config",
            VaweError::MissingClass(_) | VaweError::Protocol(_) => "protocol",
            VaweError::Io { .. } => "io",
        }
    }

    /// Process exit code: 2 usage/config, 3 parse, 4 numeric/divergence, 5 protocol.
    pub fn exit_code(&self) -> i32 {
        match self {
            VaweError::Config(_) => 2,
            VaweError::Parse { .. } | VaweError::Json(_) | VaweError::Checkpoint(_) => 3,
            VaweError::NotPositiveDefinite { .. }
            | VaweError::Numeric(_)
            | VaweError::Divergence { .. } => 4,
            VaweError::Shape(_) | VaweError::MissingClass(_) | VaweError::Protocol(_) => 5,
            VaweError::Io { .. } => 1,
        }
    }
}
