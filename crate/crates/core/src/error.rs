use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where a non-finite loss was first observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DivergenceSite {
    pub round: Option<usize>,
    pub client: Option<usize>,
    pub step: usize,
}

impl fmt::Display for DivergenceSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = self.round {
            write!(f, "round {t}, ")?;
        }
        if let Some(c) = self.client {
            write!(f, "client {c}, ")?;
        }
        write!(f, "local step {}", self.step)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss at {0}")]
    Divergence(DivergenceSite),

    #[error("malformed IDX data ({field}): {detail}")]
    Format { field: &'static str, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attaches round and client context to a divergence raised by a local run.
    pub fn in_round(self, round: usize, client: usize) -> Self {
        match self {
            Error::Divergence(site) => Error::Divergence(DivergenceSite {
                round: Some(round),
                client: Some(client),
                ..site
            }),
            other => other,
        }
    }
}
