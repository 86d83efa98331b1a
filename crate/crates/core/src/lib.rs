// SPDX-License-Identifier: Apache-2.0

//! Scoring and ranking of small-group accretion candidates.

pub mod birw;
pub mod candidates;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod gks;
pub mod glps;
pub mod network;
pub mod oracles;
pub mod pipeline;
pub mod scores;
pub mod sparse;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
pub use network::{restrict_adjacency, ActorIndex, GroupKey, IndexMap, NetworkSnapshot};
pub use scores::GroupActorScores;
pub use sparse::SparseMatrix;
