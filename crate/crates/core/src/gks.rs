// SPDX-License-Identifier: Apache-2.0

//! Generalized Katz score.
//!
//! The Katz matrix `K = Σ_{l=1..L} βˡ Aˡ` counts walks of each length between
//! two actors, discounted by `βˡ`. A group's affinity for an outside actor
//! `j` is the mean of `K(p, j)` over its members `p`.

use crate::error::{Error, Result};
use crate::network::{GroupKey, NetworkSnapshot};
use crate::scores::GroupActorScores;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatzParams {
    pub beta: f64,
    pub max_length: usize,
}

impl Default for KatzParams {
    fn default() -> Self {
        Self {
            beta: 0.5,
            max_length: 4,
        }
    }
}

impl KatzParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be in (0,1), got {}",
                self.beta
            )));
        }
        if self.max_length == 0 {
            return Err(Error::InvalidParameter(
                "max path length must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KatzMatrix {
    pub k: SparseMatrix,
}

/// Truncated Katz matrix by repeated sparse multiplication.
pub fn compute_katz(snapshot: &NetworkSnapshot, params: &KatzParams) -> Result<KatzMatrix> {
    params.validate()?;
    let a = snapshot.adjacency();
    let mut power = a.clone();
    let mut k = SparseMatrix::zeros(a.rows(), a.cols());
    let mut weight = 1.0;
    for l in 1..=params.max_length {
        weight *= params.beta;
        k = k.add_scaled(1.0, &power, weight)?;
        if l < params.max_length {
            power = power.multiply(a)?;
        }
    }
    Ok(KatzMatrix { k })
}

/// Mean Katz row of the group members, restricted to outside actors.
pub fn score_group_gks(
    snapshot: &NetworkSnapshot,
    katz: &KatzMatrix,
    group: &GroupKey,
) -> Result<GroupActorScores> {
    snapshot.check_group(group)?;
    let mut sums = vec![0.0; snapshot.n()];
    for &p in group.members() {
        let (idx, vals) = katz.k.row(p);
        for (&j, &v) in idx.iter().zip(vals) {
            sums[j] += v;
        }
    }
    let c = group.len() as f64;
    Ok(GroupActorScores::from_dense(
        group,
        sums.into_iter().map(|s| s / c).collect(),
    ))
}

/// Same scores as [`score_group_gks`] without materializing `K`: the member
/// indicator is pushed through `A` one walk length at a time.
pub fn score_group_gks_streaming(
    snapshot: &NetworkSnapshot,
    params: &KatzParams,
    group: &GroupKey,
) -> Result<GroupActorScores> {
    params.validate()?;
    snapshot.check_group(group)?;
    let a = snapshot.adjacency();
    let c = group.len() as f64;
    let mut walk = vec![0.0; snapshot.n()];
    for &p in group.members() {
        walk[p] = 1.0 / c;
    }
    let mut acc = vec![0.0; snapshot.n()];
    let mut weight = 1.0;
    for _ in 0..params.max_length {
        weight *= params.beta;
        walk = a.vec_mul(&walk);
        for (s, w) in acc.iter_mut().zip(&walk) {
            *s += weight * w;
        }
    }
    Ok(GroupActorScores::from_dense(group, acc))
}

/// Scores groups either from a shared precomputed `K` or by streaming.
pub enum GksScorer {
    Precomputed(KatzMatrix),
    Streaming(KatzParams),
}

impl GksScorer {
    /// Actor count above which `K` is not materialized.
    pub const PRECOMPUTE_LIMIT: usize = 2000;

    pub fn new(snapshot: &NetworkSnapshot, params: KatzParams) -> Result<Self> {
        params.validate()?;
        if snapshot.n() <= Self::PRECOMPUTE_LIMIT {
            Ok(GksScorer::Precomputed(compute_katz(snapshot, &params)?))
        } else {
            Ok(GksScorer::Streaming(params))
        }
    }

    pub fn score(&self, snapshot: &NetworkSnapshot, group: &GroupKey) -> Result<GroupActorScores> {
        match self {
            GksScorer::Precomputed(k) => score_group_gks(snapshot, k, group),
            GksScorer::Streaming(p) => score_group_gks_streaming(snapshot, p, group),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::walk_count_oracle;

    fn key(m: &[usize]) -> GroupKey {
        GroupKey::new(m.iter().copied()).unwrap()
    }

    fn triangle() -> NetworkSnapshot {
        NetworkSnapshot::build(vec![key(&[0, 1, 2])], 3).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(KatzParams {
            beta: 0.0,
            max_length: 4
        }
        .validate()
        .is_err());
        assert!(KatzParams {
            beta: 1.0,
            max_length: 4
        }
        .validate()
        .is_err());
        assert!(KatzParams {
            beta: 0.5,
            max_length: 0
        }
        .validate()
        .is_err());
        assert_eq!(
            KatzParams::default(),
            KatzParams {
                beta: 0.5,
                max_length: 4
            }
        );
    }

    #[test]
    fn edgeless_graph_is_zero() {
        let s = NetworkSnapshot::build(vec![key(&[0]), key(&[1])], 3).unwrap();
        let k = compute_katz(
            &s,
            &KatzParams {
                beta: 0.9,
                max_length: 4,
            },
        )
        .unwrap();
        assert_eq!(k.k.nnz(), 0);
    }

    #[test]
    fn triangle_two_steps() {
        let k = compute_katz(
            &triangle(),
            &KatzParams {
                beta: 0.5,
                max_length: 2,
            },
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.5 } else { 0.75 };
                assert_eq!(k.k.get(i, j), expected);
            }
        }
        assert!(k.k.is_symmetric(0.0));
    }

    #[test]
    fn triangle_group_score() {
        let s = triangle();
        let k = compute_katz(
            &s,
            &KatzParams {
                beta: 0.5,
                max_length: 2,
            },
        )
        .unwrap();
        // Actors 1,2,3 of the fixture are indices 0,1,2.
        let sc = score_group_gks(&s, &k, &key(&[0, 1])).unwrap();
        assert_eq!(sc.entries(), &[(2, 0.75)]);
    }

    #[test]
    fn singleton_group_is_katz_row() {
        let s = NetworkSnapshot::build(vec![key(&[0, 1]), key(&[1, 2, 3])], 5).unwrap();
        let k = compute_katz(&s, &KatzParams::default()).unwrap();
        let sc = score_group_gks(&s, &k, &key(&[1])).unwrap();
        let expected: Vec<(usize, f64)> =
            [0, 2, 3, 4].iter().map(|&j| (j, k.k.get(1, j))).collect();
        assert_eq!(sc.entries(), expected.as_slice());
        // Actor 4 is disconnected.
        assert_eq!(sc.get(4), Some(0.0));
    }

    #[test]
    fn matches_walk_oracle_on_small_graph() {
        let s = NetworkSnapshot::build(
            vec![key(&[0, 1, 2]), key(&[2, 3]), key(&[3, 4]), key(&[1, 5])],
            6,
        )
        .unwrap();
        let adj: Vec<Vec<bool>> = s
            .adjacency()
            .to_dense()
            .iter()
            .map(|r| r.iter().map(|&v| v != 0.0).collect())
            .collect();
        let p = KatzParams {
            beta: 0.3,
            max_length: 4,
        };
        let k = compute_katz(&s, &p).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let mut expected = 0.0;
                for l in 1..=4 {
                    expected +=
                        p.beta.powi(l as i32) * walk_count_oracle(&adj, i, j, l).unwrap() as f64;
                }
                assert!((k.k.get(i, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn streaming_agrees_with_matrix() {
        let s = NetworkSnapshot::build(
            vec![key(&[0, 1, 2]), key(&[2, 3]), key(&[3, 4, 6]), key(&[1, 5])],
            8,
        )
        .unwrap();
        let p = KatzParams {
            beta: 0.7,
            max_length: 4,
        };
        let k = compute_katz(&s, &p).unwrap();
        for g in [key(&[0, 1, 2]), key(&[3]), key(&[4, 5, 7])] {
            let a = score_group_gks(&s, &k, &g).unwrap();
            let b = score_group_gks_streaming(&s, &p, &g).unwrap();
            for ((ja, va), (jb, vb)) in a.entries().iter().zip(b.entries()) {
                assert_eq!(ja, jb);
                assert!((va - vb).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smaller_beta_lowers_positive_scores() {
        let s =
            NetworkSnapshot::build(vec![key(&[0, 1, 2]), key(&[2, 3]), key(&[3, 4])], 6).unwrap();
        let g = key(&[0, 1]);
        let hi = score_group_gks_streaming(
            &s,
            &KatzParams {
                beta: 0.6,
                max_length: 4,
            },
            &g,
        )
        .unwrap();
        let lo = score_group_gks_streaming(
            &s,
            &KatzParams {
                beta: 0.3,
                max_length: 4,
            },
            &g,
        )
        .unwrap();
        for ((_, h), (_, l)) in hi.entries().iter().zip(lo.entries()) {
            if *h > 0.0 {
                assert!(l < h);
            } else {
                assert_eq!(*l, 0.0);
            }
        }
    }
}
