// SPDX-License-Identifier: Apache-2.0

//! Bi-random walk score.
//!
//! For one group the actor network is cut into three pieces: the group's
//! clique `N_g` (c×c), the network of everyone else `N_o` ((n−c)×(n−c)) and
//! the bipartite links `X` between members and outsiders. An affinity matrix
//! `R` (c×(n−c)) aligning members with outsiders minimizes
//!
//! ```text
//! α Σ (N_g ⊗ N_o)_{(i,u),(j,v)} (R(i,u) − R(j,v))² + (1−α) Σ (R(i,u) − X(i,u))²
//! ```
//!
//! and is learned with the recursion `R = α N_g R N_o + (1−α) X`, run as a
//! sequence of group-side and outer-side half steps with separate caps on the
//! walk length in each network. The Kronecker product is never formed.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::{restrict_adjacency, GroupKey, IndexMap, NetworkSnapshot};
use crate::scores::GroupActorScores;
use crate::sparse::SparseMatrix;

/// How the prior `X` is scaled into the starting point `R⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorNormalization {
    /// Divide by the sum of all entries of `X`.
    #[default]
    GrandTotal,
    /// Divide each row by its own sum; zero rows stay zero.
    PerRow,
}

impl FromStr for PriorNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grand-total" => Ok(Self::GrandTotal),
            "per-row" => Ok(Self::PerRow),
            _ => Err(Error::InvalidParameter(format!(
                "unknown prior normalization {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirwParams {
    pub alpha: f64,
    pub l_group: usize,
    pub l_outer: usize,
    pub normalization: PriorNormalization,
}

impl Default for BirwParams {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            l_group: 4,
            l_outer: 4,
            normalization: PriorNormalization::GrandTotal,
        }
    }
}

impl BirwParams {
    pub fn validate(&self) -> Result<()> {
        // alpha = 0 is allowed: the walk collapses to the prior.
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in [0,1], got {}",
                self.alpha
            )));
        }
        if self.l_group == 0 || self.l_outer == 0 {
            return Err(Error::InvalidParameter(
                "walk length caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn from_sparse(m: &SparseMatrix) -> Self {
        let mut d = Self::zeros(m.rows(), m.cols());
        for (r, c, v) in m.triplets() {
            d.data[r * d.cols + c] = v;
        }
        d
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// `self = scale * self + shift * other`, entrywise.
    fn blend(&mut self, scale: f64, other: &DenseMatrix, shift: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = scale * *a + shift * b;
        }
    }
}

/// The three networks of one group's alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentProblem {
    pub clique: DenseMatrix,
    pub outer: SparseMatrix,
    pub inter: SparseMatrix,
    pub index_map: IndexMap,
}

impl AlignmentProblem {
    /// No outside actors remain; scores are empty.
    pub fn is_degenerate(&self) -> bool {
        self.outer.rows() == 0
    }

    fn check(&self) -> Result<()> {
        let c = self.clique.rows();
        let m = self.outer.rows();
        if self.clique.cols() != c
            || self.outer.cols() != m
            || self.inter.rows() != c
            || self.inter.cols() != m
            || self.index_map.len() != m
        {
            return Err(Error::Dimension(format!(
                "alignment problem: clique {}x{}, outer {}x{}, inter {}x{}, map {}",
                c,
                self.clique.cols(),
                m,
                self.outer.cols(),
                self.inter.rows(),
                self.inter.cols(),
                self.index_map.len()
            )));
        }
        Ok(())
    }
}

pub fn build_alignment_problem(
    snapshot: &NetworkSnapshot,
    group: &GroupKey,
) -> Result<AlignmentProblem> {
    let (outer, index_map) = restrict_adjacency(snapshot, group)?;
    let c = group.len();
    let mut clique = DenseMatrix::zeros(c, c);
    for p in 0..c {
        for q in 0..c {
            if p != q {
                clique.data[p * c + q] = 1.0;
            }
        }
    }
    let inter = snapshot
        .adjacency()
        .select(group.members(), index_map.actors());
    Ok(AlignmentProblem {
        clique,
        outer,
        inter,
        index_map,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub r: DenseMatrix,
}

/// Sequential bi-random walk: alternate a group-side step while `t ≤ l_group`
/// and an outer-side step while `t ≤ l_outer`, for `t = 1..max(l_group, l_outer)`.
pub fn birw_seq(problem: &AlignmentProblem, params: &BirwParams) -> Result<AlignmentResult> {
    params.validate()?;
    problem.check()?;
    let c = problem.clique.rows();
    let m = problem.outer.rows();
    let x = DenseMatrix::from_sparse(&problem.inter);
    let total = x.sum();
    if total == 0.0 {
        return Ok(AlignmentResult {
            r: DenseMatrix::zeros(c, m),
        });
    }

    let mut r = x.clone();
    match params.normalization {
        PriorNormalization::GrandTotal => r.data.iter_mut().for_each(|v| *v /= total),
        PriorNormalization::PerRow => {
            for p in 0..c {
                let row = r.row_mut(p);
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|v| *v /= s);
                }
            }
        }
    }

    let alpha = params.alpha;
    for t in 1..=params.l_group.max(params.l_outer) {
        if t <= params.l_group {
            r = clique_times(&problem.clique, &r);
            r.blend(alpha, &x, 1.0 - alpha);
        }
        if t <= params.l_outer {
            r = times_outer(&r, &problem.outer);
            r.blend(alpha, &x, 1.0 - alpha);
        }
    }
    Ok(AlignmentResult { r })
}

fn clique_times(clique: &DenseMatrix, r: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(r.rows, r.cols);
    for p in 0..clique.rows {
        for k in 0..clique.cols {
            let w = clique.get(p, k);
            if w == 0.0 {
                continue;
            }
            let src = k * r.cols;
            let dst = p * r.cols;
            for q in 0..r.cols {
                out.data[dst + q] += w * r.data[src + q];
            }
        }
    }
    out
}

fn times_outer(r: &DenseMatrix, outer: &SparseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(r.rows, outer.cols());
    for p in 0..r.rows {
        let src = r.row(p);
        let dst = out.row_mut(p);
        for (q, &v) in src.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let (idx, vals) = outer.row(q);
            for (&u, &w) in idx.iter().zip(vals) {
                dst[u] += v * w;
            }
        }
    }
    out
}

/// Column means of `R`, keyed by global actor index.
pub fn score_group_brws(
    result: &AlignmentResult,
    problem: &AlignmentProblem,
) -> Result<GroupActorScores> {
    let c = problem.clique.rows();
    let m = problem.outer.rows();
    if result.r.rows() != c || result.r.cols() != m {
        return Err(Error::Dimension(format!(
            "result is {}x{}, problem expects {c}x{m}",
            result.r.rows(),
            result.r.cols()
        )));
    }
    let mut means = vec![0.0; m];
    for p in 0..c {
        for (s, v) in means.iter_mut().zip(result.r.row(p)) {
            *s += v;
        }
    }
    Ok(GroupActorScores::new(
        means
            .into_iter()
            .enumerate()
            .map(|(q, s)| (problem.index_map.actor(q), s / c as f64))
            .collect(),
    ))
}

/// Builds, solves and scores one group.
pub fn score_group(
    snapshot: &NetworkSnapshot,
    group: &GroupKey,
    params: &BirwParams,
) -> Result<GroupActorScores> {
    let problem = build_alignment_problem(snapshot, group)?;
    if problem.is_degenerate() {
        return Ok(GroupActorScores::default());
    }
    let result = birw_seq(&problem, params)?;
    score_group_brws(&result, &problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(m: &[usize]) -> GroupKey {
        GroupKey::new(m.iter().copied()).unwrap()
    }

    /// Group {a,b} as a 2-clique, outsiders {e,f} with edge e–f, prior a–e.
    fn two_plus_two() -> AlignmentProblem {
        AlignmentProblem {
            clique: DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
            outer: SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap(),
            inter: SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0)]).unwrap(),
            index_map: IndexMap::new(vec![2, 3], 4),
        }
    }

    fn params(alpha: f64, l: usize) -> BirwParams {
        BirwParams {
            alpha,
            l_group: l,
            l_outer: l,
            normalization: PriorNormalization::GrandTotal,
        }
    }

    #[test]
    fn hand_trace_one_step() {
        let p = two_plus_two();
        let res = birw_seq(&p, &params(0.5, 1)).unwrap();
        assert_eq!(res.r.to_rows(), vec![vec![0.5, 0.25], vec![0.0, 0.25]]);
        let s = score_group_brws(&res, &p).unwrap();
        assert_eq!(s.entries(), &[(2, 0.25), (3, 0.25)]);
    }

    #[test]
    fn zero_prior_gives_zero() {
        let mut p = two_plus_two();
        p.inter = SparseMatrix::zeros(2, 2);
        let res = birw_seq(&p, &params(0.7, 4)).unwrap();
        assert_eq!(res.r, DenseMatrix::zeros(2, 2));
        let s = score_group_brws(&res, &p).unwrap();
        assert!(s.entries().iter().all(|e| e.1 == 0.0));
    }

    #[test]
    fn alpha_zero_collapses_to_prior() {
        let p = two_plus_two();
        let res = birw_seq(&p, &params(0.0, 5)).unwrap();
        assert_eq!(res.r, DenseMatrix::from_sparse(&p.inter));
    }

    #[test]
    fn params_validation() {
        assert!(params(-0.1, 1).validate().is_err());
        assert!(params(0.0, 1).validate().is_ok());
        assert!(params(1.0, 1).validate().is_ok());
        assert!(params(1.1, 1).validate().is_err());
        assert!(params(0.5, 0).validate().is_err());
        let d = BirwParams::default();
        assert_eq!((d.alpha, d.l_group, d.l_outer), (0.6, 4, 4));
    }

    #[test]
    fn extraction_from_snapshot() {
        // A edges 0–2 and 2–3; group {0,1}.
        let s = NetworkSnapshot::build(vec![key(&[0, 2]), key(&[2, 3]), key(&[1])], 4).unwrap();
        let p = build_alignment_problem(&s, &key(&[0, 1])).unwrap();
        assert_eq!(p.inter.to_dense(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(p.outer.to_dense(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(p.clique.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(p.index_map.actors(), &[2, 3]);
    }

    #[test]
    fn whole_vertex_set_is_degenerate() {
        let s = NetworkSnapshot::build(vec![key(&[0, 1, 2])], 3).unwrap();
        let p = build_alignment_problem(&s, &key(&[0, 1, 2])).unwrap();
        assert!(p.is_degenerate());
        assert!(score_group(&s, &key(&[0, 1, 2]), &BirwParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn singleton_group_scores_are_its_row() {
        let s = NetworkSnapshot::build(vec![key(&[0, 1]), key(&[1, 2]), key(&[2, 3])], 4).unwrap();
        let g = key(&[1]);
        let p = build_alignment_problem(&s, &g).unwrap();
        assert_eq!(p.clique.to_rows(), vec![vec![0.0]]);
        let res = birw_seq(&p, &BirwParams::default()).unwrap();
        let sc = score_group_brws(&res, &p).unwrap();
        for (q, &(_, v)) in sc.entries().iter().enumerate() {
            assert_eq!(v, res.r.get(0, q));
        }
    }

    #[test]
    fn outer_only_steps_follow_the_guards() {
        let p = two_plus_two();
        let prm = BirwParams {
            alpha: 0.5,
            l_group: 1,
            l_outer: 2,
            normalization: PriorNormalization::GrandTotal,
        };
        let res = birw_seq(&p, &prm).unwrap();
        // t=1 as in the hand trace, then a lone outer step:
        // 0.5 * [[0.5,0.25],[0,0.25]] * N_o + 0.5 * X
        assert_eq!(res.r.to_rows(), vec![vec![0.625, 0.25], vec![0.125, 0.0]]);
    }

    #[test]
    fn per_row_normalization() {
        let mut p = two_plus_two();
        p.inter =
            SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        let mut prm = params(0.5, 1);
        prm.normalization = PriorNormalization::PerRow;
        let a = birw_seq(&p, &prm).unwrap();
        prm.normalization = PriorNormalization::GrandTotal;
        let b = birw_seq(&p, &prm).unwrap();
        assert_ne!(a, b);
        assert!(a.r.data.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn member_permutation_permutes_rows() {
        let s = NetworkSnapshot::build(
            vec![
                key(&[0, 1, 2]),
                key(&[0, 3]),
                key(&[1, 4]),
                key(&[3, 4, 5]),
                key(&[2, 6]),
            ],
            7,
        )
        .unwrap();
        let p = build_alignment_problem(&s, &key(&[0, 1, 2])).unwrap();
        let perm = [2usize, 0, 1];
        let inter_dense = p.inter.to_dense();
        let permuted = AlignmentProblem {
            clique: p.clique.clone(),
            outer: p.outer.clone(),
            inter: SparseMatrix::from_triplets(
                3,
                p.inter.cols(),
                perm.iter().enumerate().flat_map(|(new, &old)| {
                    inter_dense[old]
                        .iter()
                        .enumerate()
                        .map(move |(q, &v)| (new, q, v))
                        .collect::<Vec<_>>()
                }),
            )
            .unwrap(),
            index_map: p.index_map.clone(),
        };
        let prm = BirwParams::default();
        let a = birw_seq(&p, &prm).unwrap();
        let b = birw_seq(&permuted, &prm).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            for q in 0..a.r.cols() {
                assert!((a.r.get(old, q) - b.r.get(new, q)).abs() < 1e-12);
            }
        }
        let sa = score_group_brws(&a, &p).unwrap();
        let sb = score_group_brws(&b, &permuted).unwrap();
        for (x, y) in sa.entries().iter().zip(sb.entries()) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() < 1e-12);
        }
    }

    #[test]
    fn successive_differences_shrink_after_transient() {
        // Sparse outer network keeps alpha * ||N_g|| * ||N_o|| below one.
        let s = NetworkSnapshot::build(
            vec![key(&[0, 1]), key(&[0, 2]), key(&[2, 3]), key(&[1, 4])],
            5,
        )
        .unwrap();
        let p = build_alignment_problem(&s, &key(&[0, 1])).unwrap();
        let mut diffs = Vec::new();
        let mut prev: Option<DenseMatrix> = None;
        for l in 1..=12 {
            let r = birw_seq(&p, &params(0.4, l)).unwrap().r;
            if let Some(pr) = prev {
                let d = r
                    .data
                    .iter()
                    .zip(&pr.data)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                diffs.push(d);
            }
            prev = Some(r);
        }
        for w in diffs[2..].windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{diffs:?}");
        }
    }
}
