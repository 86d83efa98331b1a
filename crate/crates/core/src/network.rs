// SPDX-License-Identifier: Apache-2.0

//! The network of groups (a hypergraph, stored as its incidence matrix) and
//! the network of actors (the clique expansion of that hypergraph).

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Dense index into an actor registry.
pub type ActorIndex = usize;

/// Canonical member set of a group: sorted, duplicate free, non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey(Vec<ActorIndex>);

impl GroupKey {
    pub fn new(members: impl IntoIterator<Item = ActorIndex>) -> Result<Self> {
        let mut m: Vec<ActorIndex> = members.into_iter().collect();
        m.sort_unstable();
        m.dedup();
        if m.is_empty() {
            return Err(Error::EmptyGroup);
        }
        Ok(GroupKey(m))
    }

    /// Builds a key from members that are already strictly increasing.
    pub(crate) fn from_sorted(members: Vec<ActorIndex>) -> Self {
        debug_assert!(!members.is_empty());
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        GroupKey(members)
    }

    pub fn members(&self) -> &[ActorIndex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, actor: ActorIndex) -> bool {
        self.0.binary_search(&actor).is_ok()
    }

    /// `self ∪ {actor}`.
    pub fn with(&self, actor: ActorIndex) -> GroupKey {
        let mut m = self.0.clone();
        if let Err(pos) = m.binary_search(&actor) {
            m.insert(pos, actor);
        }
        GroupKey(m)
    }

    /// `self ∖ {actor}`, or `None` when that would be empty.
    pub fn without(&self, actor: ActorIndex) -> Option<GroupKey> {
        let m: Vec<ActorIndex> = self.0.iter().copied().filter(|&a| a != actor).collect();
        (!m.is_empty()).then_some(GroupKey(m))
    }

    pub fn is_subset_of(&self, other: &GroupKey) -> bool {
        self.0.iter().all(|&a| other.contains(a))
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// Training-period views of the collaboration history.
///
/// Hyperedges carry unit weight, so the vertex degree `d(v)` is the number of
/// groups containing `v` and the edge degree `δ(g)` is `|g|`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    n: usize,
    groups: Vec<GroupKey>,
    incidence: SparseMatrix,
    adjacency: SparseMatrix,
    vertex_degree: Vec<f64>,
    edge_degree: Vec<f64>,
}

impl NetworkSnapshot {
    /// Builds the incidence matrix `H` (n×m) and the 0/1 actor adjacency
    /// `A`, where `A(p,q) = 1` iff `p ≠ q` share at least one group.
    pub fn build(groups: Vec<GroupKey>, n: usize) -> Result<Self> {
        let mut seen = HashSet::with_capacity(groups.len());
        for (gi, g) in groups.iter().enumerate() {
            if let Some(&bad) = g.members().iter().find(|&&a| a >= n) {
                return Err(Error::ActorOutOfRange {
                    group: gi,
                    actor: bad,
                    n,
                });
            }
            if !seen.insert(g) {
                return Err(Error::DuplicateGroup(gi));
            }
        }

        let incidence = SparseMatrix::from_triplets(
            n,
            groups.len(),
            groups
                .iter()
                .enumerate()
                .flat_map(|(gi, g)| g.members().iter().map(move |&v| (v, gi, 1.0))),
        )?;

        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for g in &groups {
            let m = g.members();
            for (i, &p) in m.iter().enumerate() {
                for &q in &m[i + 1..] {
                    pairs.push((p, q));
                    pairs.push((q, p));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let adjacency =
            SparseMatrix::from_triplets(n, n, pairs.into_iter().map(|(p, q)| (p, q, 1.0)))?;

        let vertex_degree = incidence.row_sums();
        let edge_degree = incidence.col_sums();
        Ok(Self {
            n,
            groups,
            incidence,
            adjacency,
            vertex_degree,
            edge_degree,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> &[GroupKey] {
        &self.groups
    }

    pub fn incidence(&self) -> &SparseMatrix {
        &self.incidence
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn vertex_degree(&self) -> &[f64] {
        &self.vertex_degree
    }

    pub fn edge_degree(&self) -> &[f64] {
        &self.edge_degree
    }

    pub fn check_group(&self, group: &GroupKey) -> Result<()> {
        match group.members().iter().find(|&&a| a >= self.n) {
            Some(&bad) => Err(Error::UnknownActor {
                actor: bad,
                n: self.n,
            }),
            None => Ok(()),
        }
    }

    /// Actors outside `group`, ascending.
    pub fn external_actors(&self, group: &GroupKey) -> Vec<ActorIndex> {
        (0..self.n).filter(|&a| !group.contains(a)).collect()
    }
}

/// Bijection between positions in a restricted actor set and global indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    local_to_actor: Vec<ActorIndex>,
    actor_to_local: Vec<Option<usize>>,
}

impl IndexMap {
    pub fn new(local_to_actor: Vec<ActorIndex>, n: usize) -> Self {
        let mut actor_to_local = vec![None; n];
        for (i, &a) in local_to_actor.iter().enumerate() {
            actor_to_local[a] = Some(i);
        }
        Self {
            local_to_actor,
            actor_to_local,
        }
    }

    pub fn actor(&self, local: usize) -> ActorIndex {
        self.local_to_actor[local]
    }

    pub fn local(&self, actor: ActorIndex) -> Option<usize> {
        self.actor_to_local.get(actor).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.local_to_actor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_to_actor.is_empty()
    }

    pub fn actors(&self) -> &[ActorIndex] {
        &self.local_to_actor
    }
}

/// Principal submatrix of `A` on the actors outside `excluded`.
pub fn restrict_adjacency(
    snapshot: &NetworkSnapshot,
    excluded: &GroupKey,
) -> Result<(SparseMatrix, IndexMap)> {
    snapshot.check_group(excluded)?;
    let outside = snapshot.external_actors(excluded);
    let outer = snapshot.adjacency.select(&outside, &outside);
    Ok((outer, IndexMap::new(outside, snapshot.n)))
}
