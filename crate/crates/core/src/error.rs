use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: String, reason: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown node id {id} (network has {n_nodes} nodes)")]
    UnknownNode { id: usize, n_nodes: usize },

    #[error("critical-rate bracket [{lo}, {hi}] is invalid: {reason}; widen the range")]
    Bracket { lo: f64, hi: f64, reason: String },

    #[error("no neighbors to route to")]
    NoNeighbors,

    #[error("the network is already dead at step {0}")]
    NetworkDead(u64),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Usage(_)
            | Error::Domain(_)
            | Error::UnknownNode { .. }
            | Error::Bracket { .. }
            | Error::NoNeighbors
            | Error::NetworkDead(_) => 2,
            Error::InsufficientData(_) => 3,
            Error::Io { .. } => 4,
        }
    }
}
