// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("group {group} references actor {actor} but the snapshot has {n} actors")]
    ActorOutOfRange {
        group: usize,
        actor: usize,
        n: usize,
    },

    #[error("actor {actor} is not in the snapshot ({n} actors)")]
    UnknownActor { actor: usize, n: usize },

    #[error("group {0} appears more than once")]
    DuplicateGroup(usize),

    #[error("empty group")]
    EmptyGroup,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("singular system")]
    Singular,

    #[error("input too large for oracle: {0}")]
    TooLarge(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
