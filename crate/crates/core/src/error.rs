use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solvers, data loaders and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("class {class} has no labeled sample")]
    LabelCoverage { class: usize },

    #[error("index error: {0}")]
    Index(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate distances: alpha = {alpha} is not positive")]
    DegenerateDistances { alpha: f64 },

    #[error("active-set solver did not terminate after {swaps} swaps")]
    MaxIterations { swaps: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("{} unlabeled node(s) are not connected to any labeled node: {}", nodes.len(), preview(nodes))]
    DisconnectedUnlabeled { nodes: Vec<usize> },

    #[error("rate {rate} too low: {reason}")]
    RateTooLow { rate: f64, reason: String },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips any context wrappers and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

fn preview(nodes: &[usize]) -> String {
    const SHOWN: usize = 8;
    let head: Vec<String> = nodes.iter().take(SHOWN).map(|n| n.to_string()).collect();
    if nodes.len() > SHOWN {
        format!("[{}, ...]", head.join(", "))
    } else {
        format!("[{}]", head.join(", "))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
