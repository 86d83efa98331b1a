// SPDX-License-Identifier: Apache-2.0

use crate::network::{ActorIndex, GroupKey};

/// Affinity of one group for every actor outside it, ascending by actor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupActorScores {
    entries: Vec<(ActorIndex, f64)>,
}

impl GroupActorScores {
    pub fn new(mut entries: Vec<(ActorIndex, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        Self { entries }
    }

    /// Keeps every actor of the dense vector except the group's members.
    pub fn from_dense(group: &GroupKey, dense: Vec<f64>) -> Self {
        let entries = dense
            .into_iter()
            .enumerate()
            .filter(|(a, _)| !group.contains(*a))
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[(ActorIndex, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, actor: ActorIndex) -> Option<f64> {
        self.entries
            .binary_search_by_key(&actor, |e| e.0)
            .ok()
            .map(|k| self.entries[k].1)
    }

    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(a, s)| (a, f(s))).collect(),
        }
    }
}
