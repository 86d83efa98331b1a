// SPDX-License-Identifier: Apache-2.0

//! Candidate future groups, ranking and evaluation.
//!
//! Incremental accretion (IA) candidates are `g ∪ {a}` for a training group
//! `g` and an outside actor `a`; subgroup accretion (SA) candidates are
//! `s ∪ {a}` for a proper non-empty `s ⊂ g` and `a ∉ g`. Both inherit the
//! group's affinity score `S(g, a)`. Lists are ordered by score descending,
//! ties broken by the canonical member list ascending.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::str::FromStr;

use log::warn;

use crate::corpus::{compute_accretion_stats, SgRule};
use crate::error::{Error, Result};
use crate::network::{ActorIndex, GroupKey, NetworkSnapshot};
use crate::scores::GroupActorScores;

/// Default largest group whose subgroups are enumerated.
pub const DEFAULT_SA_CAP: usize = 12;
const MAX_SA_CAP: usize = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Process {
    Incremental,
    Subgroup,
}

impl Process {
    pub fn tag(self) -> &'static str {
        match self {
            Process::Incremental => "ia",
            Process::Subgroup => "sa",
        }
    }
}

impl FromStr for Process {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ia" => Ok(Process::Incremental),
            "sa" => Ok(Process::Subgroup),
            _ => Err(Error::InvalidParameter(format!(
                "unknown accretion process {s:?}"
            ))),
        }
    }
}

/// One formed group and how it was formed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidateGroup {
    /// Index of the base group in the snapshot's group list.
    pub base_group: usize,
    pub absorbed: ActorIndex,
    /// Selected members of the base group, by position; `None` for IA.
    pub subgroup_mask: Option<u32>,
    pub key: GroupKey,
}

impl CandidateGroup {
    pub fn process(&self) -> Process {
        if self.subgroup_mask.is_some() {
            Process::Subgroup
        } else {
            Process::Incremental
        }
    }

    /// Members of the absorbing subgroup (the whole base group for IA).
    pub fn subgroup(&self, base: &GroupKey) -> Vec<ActorIndex> {
        match self.subgroup_mask {
            None => base.members().to_vec(),
            Some(mask) => base
                .members()
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &a)| a)
                .collect(),
        }
    }

    fn provenance(&self) -> (usize, Option<u32>, ActorIndex) {
        (self.base_group, self.subgroup_mask, self.absorbed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub score: f64,
    pub candidate: CandidateGroup,
}

/// Ranking order: higher score first, then smaller key.
pub fn rank_order(a_score: f64, a_key: &GroupKey, b_score: f64, b_key: &GroupKey) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_key.cmp(b_key))
}

fn cand_order(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    rank_order(a.score, &a.candidate.key, b.score, &b.candidate.key)
}

/// Whether `a` should replace `b` as the representative of a shared key.
fn better_representative(a: &ScoredCandidate, b: &ScoredCandidate) -> bool {
    a.score > b.score || (a.score == b.score && a.candidate.provenance() < b.candidate.provenance())
}

pub fn validate_sa_cap(cap: usize) -> Result<()> {
    if cap > MAX_SA_CAP {
        return Err(Error::InvalidParameter(format!(
            "subgroup enumeration cap must be at most {MAX_SA_CAP}, got {cap}"
        )));
    }
    Ok(())
}

/// One candidate per scored outside actor.
pub fn enumerate_ia(
    snapshot: &NetworkSnapshot,
    base_group: usize,
    scores: &GroupActorScores,
) -> Vec<ScoredCandidate> {
    let group = &snapshot.groups()[base_group];
    scores
        .entries()
        .iter()
        .filter(|(a, _)| !group.contains(*a))
        .map(|&(a, score)| ScoredCandidate {
            score,
            candidate: CandidateGroup {
                base_group,
                absorbed: a,
                subgroup_mask: None,
                key: group.with(a),
            },
        })
        .collect()
}

fn subgroup_key(group: &GroupKey, mask: u32, actor: ActorIndex) -> GroupKey {
    let mut m: Vec<ActorIndex> = group
        .members()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &a)| a)
        .collect();
    let pos = m.partition_point(|&x| x < actor);
    m.insert(pos, actor);
    GroupKey::from_sorted(m)
}

fn sa_enumerable(group: &GroupKey, cap: usize, base_group: usize) -> bool {
    if group.len() < 2 {
        return false;
    }
    if group.len() > cap.min(MAX_SA_CAP) {
        warn!(
            "group {base_group} has {} members, above the subgroup enumeration cap {cap}; skipped",
            group.len()
        );
        return false;
    }
    true
}

/// Every proper non-empty subgroup paired with every outside actor, or
/// `None` when the group is larger than `cap`.
pub fn enumerate_sa(
    snapshot: &NetworkSnapshot,
    base_group: usize,
    scores: &GroupActorScores,
    cap: usize,
) -> Option<Vec<ScoredCandidate>> {
    let group = &snapshot.groups()[base_group];
    if group.len() > cap.min(MAX_SA_CAP) {
        sa_enumerable(group, cap, base_group);
        return None;
    }
    if group.len() < 2 {
        return Some(Vec::new());
    }
    let full = (1u32 << group.len()) - 1;
    let mut out = Vec::with_capacity(scores.len() * (full as usize - 1));
    for mask in 1..full {
        for &(a, score) in scores.entries() {
            if group.contains(a) {
                continue;
            }
            out.push(ScoredCandidate {
                score,
                candidate: CandidateGroup {
                    base_group,
                    absorbed: a,
                    subgroup_mask: Some(mask),
                    key: subgroup_key(group, mask, a),
                },
            });
        }
    }
    Some(out)
}

/// Admission bound for candidates: anything ranking after `(score, key)`
/// cannot enter the list.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub score: f64,
    pub key: GroupKey,
}

impl Threshold {
    fn rejects(&self, score: f64, key: &GroupKey) -> bool {
        rank_order(score, key, self.score, &self.key) == Ordering::Greater
    }

    fn rejects_score(&self, score: f64) -> bool {
        score < self.score
    }
}

/// Outside actors sorted by score descending, actor ascending.
fn actors_by_score(group: &GroupKey, scores: &GroupActorScores) -> Vec<(ActorIndex, f64)> {
    let mut v: Vec<(ActorIndex, f64)> = scores
        .entries()
        .iter()
        .copied()
        .filter(|(a, _)| !group.contains(*a))
        .collect();
    v.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    v
}

/// The best `k` IA candidates of one group, in rank order. For a fixed
/// group, `g ∪ {a}` orders like `a`, so ranking actors ranks candidates.
pub fn top_ia(
    snapshot: &NetworkSnapshot,
    base_group: usize,
    scores: &GroupActorScores,
    k: usize,
    threshold: Option<&Threshold>,
) -> Vec<ScoredCandidate> {
    let group = &snapshot.groups()[base_group];
    let mut out = Vec::new();
    for (a, score) in actors_by_score(group, scores) {
        if out.len() >= k {
            break;
        }
        let key = group.with(a);
        if threshold.is_some_and(|t| t.rejects(score, &key)) {
            break;
        }
        out.push(ScoredCandidate {
            score,
            candidate: CandidateGroup {
                base_group,
                absorbed: a,
                subgroup_mask: None,
                key,
            },
        });
    }
    out
}

/// The best `k` SA candidates of one group, in rank order, without
/// materializing all `(2^c − 2)(n − c)` of them. Actors sharing a score are
/// merged across subgroups with a heap, smallest key first.
pub fn top_sa(
    snapshot: &NetworkSnapshot,
    base_group: usize,
    scores: &GroupActorScores,
    k: usize,
    cap: usize,
    threshold: Option<&Threshold>,
) -> Vec<ScoredCandidate> {
    let group = &snapshot.groups()[base_group];
    if !sa_enumerable(group, cap, base_group) || k == 0 {
        return Vec::new();
    }
    let full = (1u32 << group.len()) - 1;
    let ranked = actors_by_score(group, scores);
    let mut out: Vec<ScoredCandidate> = Vec::new();
    let mut start = 0;
    while start < ranked.len() && out.len() < k {
        let score = ranked[start].1;
        if threshold.is_some_and(|t| t.rejects_score(score)) {
            break;
        }
        let mut end = start;
        while end < ranked.len() && ranked[end].1 == score {
            end += 1;
        }
        let tied = &ranked[start..end];

        // Per subgroup, s ∪ {a} ascends with a; merge the streams.
        let mut heap: BinaryHeap<Reverse<(GroupKey, u32, usize)>> = (1..full)
            .map(|mask| Reverse((subgroup_key(group, mask, tied[0].0), mask, 0)))
            .collect();
        while let Some(Reverse((key, mask, pos))) = heap.pop() {
            if out.len() >= k || threshold.is_some_and(|t| t.rejects(score, &key)) {
                break;
            }
            out.push(ScoredCandidate {
                score,
                candidate: CandidateGroup {
                    base_group,
                    absorbed: tied[pos].0,
                    subgroup_mask: Some(mask),
                    key,
                },
            });
            if pos + 1 < tied.len() {
                heap.push(Reverse((
                    subgroup_key(group, mask, tied[pos + 1].0),
                    mask,
                    pos + 1,
                )));
            }
        }
        start = end;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub score: f64,
    pub key: GroupKey,
    pub provenance: CandidateGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
    pub cutoff: usize,
}

impl RankedList {
    pub fn keys(&self) -> impl Iterator<Item = &GroupKey> {
        self.entries.iter().map(|e| &e.key)
    }
}

/// Streaming dedup-by-max top-N. Candidates can be offered in any order and
/// any grouping; the result depends only on the multiset offered.
#[derive(Debug, Clone)]
pub struct GlobalRanker {
    n_top: usize,
    best: HashMap<GroupKey, ScoredCandidate>,
    threshold: Option<Threshold>,
}

impl GlobalRanker {
    pub fn new(n_top: usize) -> Self {
        Self {
            n_top,
            best: HashMap::new(),
            threshold: None,
        }
    }

    pub fn threshold(&self) -> Option<&Threshold> {
        self.threshold.as_ref()
    }

    pub fn offer(&mut self, cand: ScoredCandidate) {
        if self.n_top == 0 {
            return;
        }
        if self
            .threshold
            .as_ref()
            .is_some_and(|t| t.rejects(cand.score, &cand.candidate.key))
        {
            return;
        }
        match self.best.get_mut(&cand.candidate.key) {
            Some(cur) => {
                if better_representative(&cand, cur) {
                    *cur = cand;
                }
            }
            None => {
                self.best.insert(cand.candidate.key.clone(), cand);
            }
        }
        if self.best.len() >= 2 * self.n_top.max(512) {
            self.prune();
        }
    }

    fn sorted(&mut self) -> Vec<ScoredCandidate> {
        let mut all: Vec<ScoredCandidate> = self.best.drain().map(|(_, v)| v).collect();
        all.sort_by(cand_order);
        all
    }

    fn prune(&mut self) {
        let mut all = self.sorted();
        all.truncate(self.n_top);
        if all.len() == self.n_top {
            let last = all.last().unwrap();
            self.threshold = Some(Threshold {
                score: last.score,
                key: last.candidate.key.clone(),
            });
        }
        self.best = all
            .into_iter()
            .map(|c| (c.candidate.key.clone(), c))
            .collect();
    }

    pub fn finish(mut self) -> RankedList {
        let mut all = self.sorted();
        all.truncate(self.n_top);
        RankedList {
            entries: all
                .into_iter()
                .map(|c| RankedEntry {
                    score: c.score,
                    key: c.candidate.key.clone(),
                    provenance: c.candidate,
                })
                .collect(),
            cutoff: self.n_top,
        }
    }
}

/// Collapses repeated keys to their best score, sorts and truncates.
pub fn rank_global(
    candidates: impl IntoIterator<Item = ScoredCandidate>,
    n_top: usize,
) -> RankedList {
    let mut r = GlobalRanker::new(n_top);
    for c in candidates {
        r.offer(c);
    }
    r.finish()
}

/// Precision and recall of one ranked list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPair {
    pub precision: f64,
    /// Absent when the test period holds no group of this kind.
    pub recall: Option<f64>,
}

/// How per-group recall treats groups that generated no test group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecallConvention {
    /// Such groups add 0 to the sum; the average is over all training groups.
    #[default]
    ZeroContribution,
    /// Such groups are left out of both the sum and the count.
    Exclude,
}

impl FromStr for RecallConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::ZeroContribution),
            "exclude" => Ok(Self::Exclude),
            _ => Err(Error::InvalidParameter(format!(
                "unknown recall convention {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMetric {
    pub hits: usize,
    pub actual: usize,
    pub precision: f64,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerGroupReport {
    pub avg_precision: Option<f64>,
    pub avg_recall: Option<f64>,
    pub detail: Vec<GroupMetric>,
}

/// Hits are candidates whose member set is exactly a test group.
/// `keys` is a ranked list truncated at `cutoff`.
pub fn evaluate_global<'k>(
    keys: impl IntoIterator<Item = &'k GroupKey>,
    cutoff: usize,
    test: &HashSet<GroupKey>,
    actual: usize,
) -> MetricPair {
    let hits = keys
        .into_iter()
        .take(cutoff)
        .filter(|k| test.contains(*k))
        .count() as f64;
    MetricPair {
        precision: if cutoff == 0 {
            0.0
        } else {
            hits / cutoff as f64
        },
        recall: (actual > 0).then(|| hits / actual as f64),
    }
}

/// For each training group, how many test groups it generates by the given
/// process. Only test groups whose members all occur in training count.
pub fn actual_per_group(train: &[GroupKey], test: &[GroupKey], process: Process) -> Vec<usize> {
    let position: HashMap<&GroupKey, usize> =
        train.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let actors: HashSet<ActorIndex> = train
        .iter()
        .flat_map(|g| g.members().iter().copied())
        .collect();
    let mut by_actor: HashMap<ActorIndex, Vec<usize>> = HashMap::new();
    for (i, g) in train.iter().enumerate() {
        for &a in g.members() {
            by_actor.entry(a).or_default().push(i);
        }
    }
    let mut counts = vec![0; train.len()];
    for t in test {
        if !t.members().iter().all(|a| actors.contains(a)) {
            continue;
        }
        for &x in t.members() {
            let Some(s) = t.without(x) else { continue };
            match process {
                Process::Incremental => {
                    if let Some(&i) = position.get(&s) {
                        counts[i] += 1;
                    }
                }
                Process::Subgroup => {
                    let shortest = s
                        .members()
                        .iter()
                        .map(|a| &by_actor[a])
                        .min_by_key(|p| p.len())
                        .unwrap();
                    for &i in shortest {
                        let g = &train[i];
                        if g.len() > s.len() && !g.contains(x) && s.is_subset_of(g) {
                            counts[i] += 1;
                        }
                    }
                }
            }
        }
    }
    counts
}

/// Per-group precision and recall at `n_top_group`, averaged over all
/// training groups. `lists[i]` holds the top keys of group `i`.
pub fn evaluate_per_group(
    train: &[GroupKey],
    lists: &[Vec<GroupKey>],
    test: &[GroupKey],
    process: Process,
    n_top_group: usize,
    convention: RecallConvention,
) -> Result<PerGroupReport> {
    if lists.len() != train.len() {
        return Err(Error::Dimension(format!(
            "{} per-group lists for {} training groups",
            lists.len(),
            train.len()
        )));
    }
    let test_set: HashSet<&GroupKey> = test.iter().collect();
    let actual = actual_per_group(train, test, process);
    let detail: Vec<GroupMetric> = lists
        .iter()
        .zip(&actual)
        .map(|(list, &actual)| {
            let hits = list
                .iter()
                .take(n_top_group)
                .filter(|k| test_set.contains(k))
                .count();
            GroupMetric {
                hits,
                actual,
                precision: if n_top_group == 0 {
                    0.0
                } else {
                    hits as f64 / n_top_group as f64
                },
                recall: (actual > 0).then(|| hits as f64 / actual as f64),
            }
        })
        .collect();
    let m = train.len();
    let avg_precision = (m > 0).then(|| detail.iter().map(|d| d.precision).sum::<f64>() / m as f64);
    let avg_recall = match convention {
        RecallConvention::ZeroContribution => {
            (m > 0).then(|| detail.iter().map(|d| d.recall.unwrap_or(0.0)).sum::<f64>() / m as f64)
        }
        RecallConvention::Exclude => {
            let counted: Vec<f64> = detail.iter().filter_map(|d| d.recall).collect();
            (!counted.is_empty()).then(|| counted.iter().sum::<f64>() / counted.len() as f64)
        }
    };
    Ok(PerGroupReport {
        avg_precision,
        avg_recall,
        detail,
    })
}

/// Number of IA- and SA-generated test groups, as counted by the accretion
/// statistics.
pub fn actual_totals(train: &[GroupKey], test: &[GroupKey]) -> (usize, usize) {
    let s = compute_accretion_stats(train, test, SgRule::OutsideParent);
    (s.incremental.total(), s.subincremental.total())
}

/// Global and per-group results for both processes. Missing parts are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluationReport {
    pub global_ia: Option<MetricPair>,
    pub global_sa: Option<MetricPair>,
    pub per_group_ia: Option<PerGroupReport>,
    pub per_group_sa: Option<PerGroupReport>,
}

pub const REPORT_KEYS: [&str; 8] = [
    "precision_at_N_ia",
    "recall_at_N_ia",
    "precision_at_N_sa",
    "recall_at_N_sa",
    "avg_precision_at_Ng_ia",
    "avg_recall_at_Ng_ia",
    "avg_precision_at_Ng_sa",
    "avg_recall_at_Ng_sa",
];

impl EvaluationReport {
    /// Values in [`REPORT_KEYS`] order.
    pub fn values(&self) -> [Option<f64>; 8] {
        let g = |p: &Option<MetricPair>| (p.map(|m| m.precision), p.and_then(|m| m.recall));
        let pg = |p: &Option<PerGroupReport>| {
            (
                p.as_ref().and_then(|r| r.avg_precision),
                p.as_ref().and_then(|r| r.avg_recall),
            )
        };
        let (a, b) = g(&self.global_ia);
        let (c, d) = g(&self.global_sa);
        let (e, f) = pg(&self.per_group_ia);
        let (h, i) = pg(&self.per_group_sa);
        [a, b, c, d, e, f, h, i]
    }

    /// `key=value` lines; absent values are written as `NA`.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in REPORT_KEYS.iter().zip(self.values()) {
            match v {
                Some(x) => out.push_str(&format!("{k}={x}\n")),
                None => out.push_str(&format!("{k}=NA\n")),
            }
        }
        out
    }
}
