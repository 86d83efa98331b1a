// SPDX-License-Identifier: Apache-2.0

//! Split preparation, the parallel scoring pass and ranked-list files.
//!
//! Scoring runs on a snapshot over the actors seen in training, renumbered
//! `0..n` in ascending corpus order. Test groups with an unseen actor cannot
//! be predicted and are dropped from the local view; statistics are always
//! computed on corpus indices.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use log::info;
use rayon::prelude::*;

use crate::birw::{self, BirwParams};
use crate::candidates::{
    self, evaluate_global, evaluate_per_group, top_ia, top_sa, EvaluationReport, GlobalRanker,
    Process, RankedEntry, RankedList, RecallConvention, ScoredCandidate,
};
use crate::corpus::{
    compute_accretion_stats, make_split, AccretionStats, Corpus, SgRule, Split, SplitSpec,
};
use crate::error::{Error, Result};
use crate::gks::GksScorer;
use crate::glps::GlpsSolver;
use crate::network::{GroupKey, IndexMap, NetworkSnapshot};
use crate::scores::GroupActorScores;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Gks,
    Brws,
    Glps,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gks, Method::Brws, Method::Glps];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gks => "gks",
            Method::Brws => "brws",
            Method::Glps => "glps",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gks" => Ok(Method::Gks),
            "brws" => Ok(Method::Brws),
            "glps" => Ok(Method::Glps),
            _ => Err(Error::InvalidParameter(format!("unknown method {s:?}"))),
        }
    }
}

/// A corpus cut into training and test periods, with the training-actor view.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub corpus: Corpus,
    pub spec: SplitSpec,
    /// Groups in corpus indices.
    pub split: Split,
    pub index: IndexMap,
    /// Training network in local indices; group `i` is `split.train[i]`.
    pub snapshot: NetworkSnapshot,
    /// Test groups whose actors were all seen in training, in local indices.
    pub test_local: Vec<GroupKey>,
}

impl Experiment {
    pub fn prepare(corpus: Corpus, spec: SplitSpec) -> Result<Self> {
        let split = make_split(&corpus, &spec)?;
        let mut seen: Vec<usize> = split
            .train
            .iter()
            .flat_map(|g| g.members().iter().copied())
            .collect();
        seen.sort_unstable();
        seen.dedup();
        let index = IndexMap::new(seen, corpus.actor_count());
        let remap = |g: &GroupKey| -> Option<GroupKey> {
            let local: Option<Vec<usize>> = g.members().iter().map(|&a| index.local(a)).collect();
            // The renumbering is monotone, so sorted members stay sorted.
            local.map(GroupKey::from_sorted)
        };
        let train_local: Vec<GroupKey> = split
            .train
            .iter()
            .map(|g| remap(g).expect("training actor"))
            .collect();
        let test_local: Vec<GroupKey> = split.test.iter().filter_map(remap).collect();
        let snapshot = NetworkSnapshot::build(train_local, index.len())?;
        Ok(Self {
            corpus,
            spec,
            split,
            index,
            snapshot,
            test_local,
        })
    }

    pub fn to_global(&self, local: &GroupKey) -> GroupKey {
        GroupKey::from_sorted(
            local
                .members()
                .iter()
                .map(|&a| self.index.actor(a))
                .collect(),
        )
    }

    pub fn names(&self, local: &[usize]) -> Vec<&str> {
        local
            .iter()
            .map(|&a| self.corpus.name(self.index.actor(a)))
            .collect()
    }

    /// Local index of a named actor seen in training.
    pub fn local_actor(&self, name: &str) -> Option<usize> {
        self.corpus.actor(name).and_then(|a| self.index.local(a))
    }

    pub fn stats(&self, rule: SgRule) -> AccretionStats {
        compute_accretion_stats(&self.split.train, &self.split.test, rule)
    }
}

/// Affinity of a training group for the actors outside it.
pub trait GroupScorer: Sync {
    fn score(&self, snapshot: &NetworkSnapshot, group: usize) -> Result<GroupActorScores>;
}

impl GroupScorer for GksScorer {
    fn score(&self, snapshot: &NetworkSnapshot, group: usize) -> Result<GroupActorScores> {
        GksScorer::score(self, snapshot, &snapshot.groups()[group])
    }
}

pub struct BrwsScorer(pub BirwParams);

impl GroupScorer for BrwsScorer {
    fn score(&self, snapshot: &NetworkSnapshot, group: usize) -> Result<GroupActorScores> {
        birw::score_group(snapshot, &snapshot.groups()[group], &self.0)
    }
}

impl GroupScorer for GlpsSolver<'_> {
    fn score(&self, snapshot: &NetworkSnapshot, group: usize) -> Result<GroupActorScores> {
        let g = &snapshot.groups()[group];
        let (scores, p) = GlpsSolver::score(self, g)?;
        if !p.converged {
            log::warn!(
                "label propagation for group {group} stopped after {} iterations",
                p.iterations
            );
        }
        Ok(scores)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassConfig {
    pub n_top: usize,
    pub n_top_group: usize,
    pub sa_cap: usize,
    pub ia: bool,
    pub sa: bool,
    pub global: bool,
    pub per_group: bool,
}

impl Default for PassConfig {
    fn default() -> Self {
        Self {
            n_top: 10_000,
            n_top_group: 100,
            sa_cap: candidates::DEFAULT_SA_CAP,
            ia: true,
            sa: true,
            global: true,
            per_group: true,
        }
    }
}

/// Output of one scoring pass. Lists are absent for disabled parts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PassOutput {
    pub global_ia: Option<RankedList>,
    pub global_sa: Option<RankedList>,
    pub per_group_ia: Option<Vec<Vec<RankedEntry>>>,
    pub per_group_sa: Option<Vec<Vec<RankedEntry>>>,
}

#[derive(Default)]
struct GroupOutput {
    ia: Vec<ScoredCandidate>,
    sa: Vec<ScoredCandidate>,
    ia_group: Vec<RankedEntry>,
    sa_group: Vec<RankedEntry>,
}

fn entries(c: Vec<ScoredCandidate>) -> Vec<RankedEntry> {
    c.into_iter()
        .map(|c| RankedEntry {
            score: c.score,
            key: c.candidate.key.clone(),
            provenance: c.candidate,
        })
        .collect()
}

const CHUNK: usize = 256;

/// Scores every training group and collects the global and per-group lists.
///
/// `group_scorer` is used for the per-group lists when given (it may differ
/// from `scorer` only in parameters); otherwise `scorer` serves both. Groups
/// are scored in parallel chunks and merged in group order, so the result
/// does not depend on the thread count.
pub fn run_pass(
    snapshot: &NetworkSnapshot,
    scorer: &dyn GroupScorer,
    group_scorer: Option<&dyn GroupScorer>,
    cfg: &PassConfig,
) -> Result<PassOutput> {
    candidates::validate_sa_cap(cfg.sa_cap)?;
    let m = snapshot.groups().len();
    let mut ia = GlobalRanker::new(cfg.n_top);
    let mut sa = GlobalRanker::new(cfg.n_top);
    let mut ia_group = Vec::with_capacity(if cfg.per_group && cfg.ia { m } else { 0 });
    let mut sa_group = Vec::with_capacity(if cfg.per_group && cfg.sa { m } else { 0 });
    let need_global = cfg.global && (cfg.ia || cfg.sa);
    let need_group = cfg.per_group && (cfg.ia || cfg.sa);

    let ids: Vec<usize> = (0..m).collect();
    for (ci, chunk) in ids.chunks(CHUNK).enumerate() {
        let th_ia = ia.threshold().cloned();
        let th_sa = sa.threshold().cloned();
        let results: Vec<Result<GroupOutput>> = chunk
            .par_iter()
            .map(|&gi| {
                let mut out = GroupOutput::default();
                let scores = if need_global || group_scorer.is_none() {
                    Some(scorer.score(snapshot, gi)?)
                } else {
                    None
                };
                if need_global {
                    let s = scores.as_ref().unwrap();
                    if cfg.ia {
                        out.ia = top_ia(snapshot, gi, s, cfg.n_top, th_ia.as_ref());
                    }
                    if cfg.sa {
                        out.sa = top_sa(snapshot, gi, s, cfg.n_top, cfg.sa_cap, th_sa.as_ref());
                    }
                }
                if need_group {
                    let own;
                    let s = match group_scorer {
                        Some(gs) => {
                            own = gs.score(snapshot, gi)?;
                            &own
                        }
                        None => scores.as_ref().unwrap(),
                    };
                    if cfg.ia {
                        out.ia_group = entries(top_ia(snapshot, gi, s, cfg.n_top_group, None));
                    }
                    if cfg.sa {
                        out.sa_group =
                            entries(top_sa(snapshot, gi, s, cfg.n_top_group, cfg.sa_cap, None));
                    }
                }
                Ok(out)
            })
            .collect();
        for r in results {
            let r = r?;
            for c in r.ia {
                ia.offer(c);
            }
            for c in r.sa {
                sa.offer(c);
            }
            if cfg.per_group && cfg.ia {
                ia_group.push(r.ia_group);
            }
            if cfg.per_group && cfg.sa {
                sa_group.push(r.sa_group);
            }
        }
        info!("scored {} of {m} groups", (ci * CHUNK + chunk.len()).min(m));
    }
    Ok(PassOutput {
        global_ia: (cfg.global && cfg.ia).then(|| ia.finish()),
        global_sa: (cfg.global && cfg.sa).then(|| sa.finish()),
        per_group_ia: (cfg.per_group && cfg.ia).then_some(ia_group),
        per_group_sa: (cfg.per_group && cfg.sa).then_some(sa_group),
    })
}

/// Ranked keys to evaluate; any part may be missing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalLists {
    /// Keys in rank order with the cutoff they were ranked at.
    pub global_ia: Option<(Vec<GroupKey>, usize)>,
    pub global_sa: Option<(Vec<GroupKey>, usize)>,
    /// One list per training group.
    pub per_group_ia: Option<(Vec<Vec<GroupKey>>, usize)>,
    pub per_group_sa: Option<(Vec<Vec<GroupKey>>, usize)>,
}

impl EvalLists {
    pub fn from_pass(out: &PassOutput, n_top_group: usize) -> Self {
        let global =
            |l: &Option<RankedList>| l.as_ref().map(|l| (l.keys().cloned().collect(), l.cutoff));
        let per = |l: &Option<Vec<Vec<RankedEntry>>>| {
            l.as_ref().map(|l| {
                (
                    l.iter()
                        .map(|g| g.iter().map(|e| e.key.clone()).collect())
                        .collect(),
                    n_top_group,
                )
            })
        };
        Self {
            global_ia: global(&out.global_ia),
            global_sa: global(&out.global_sa),
            per_group_ia: per(&out.per_group_ia),
            per_group_sa: per(&out.per_group_sa),
        }
    }
}

/// Scores ranked lists against the test period of `exp`.
pub fn evaluate_lists(
    exp: &Experiment,
    lists: &EvalLists,
    convention: RecallConvention,
) -> Result<EvaluationReport> {
    let test = test_set(exp);
    let (actual_ia, actual_sa) = candidates::actual_totals(exp.snapshot.groups(), &exp.test_local);
    let global = |l: &Option<(Vec<GroupKey>, usize)>, actual| {
        l.as_ref()
            .map(|(keys, cutoff)| evaluate_global(keys, *cutoff, &test, actual))
    };
    let per = |l: &Option<(Vec<Vec<GroupKey>>, usize)>, process| {
        l.as_ref()
            .map(|(lists, k)| {
                evaluate_per_group(
                    exp.snapshot.groups(),
                    lists,
                    &exp.test_local,
                    process,
                    *k,
                    convention,
                )
            })
            .transpose()
    };
    Ok(EvaluationReport {
        global_ia: global(&lists.global_ia, actual_ia),
        global_sa: global(&lists.global_sa, actual_sa),
        per_group_ia: per(&lists.per_group_ia, Process::Incremental)?,
        per_group_sa: per(&lists.per_group_sa, Process::Subgroup)?,
    })
}

/// Ordered `key=value` pairs echoed at the top of every output file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigEcho(pub Vec<(String, String)>);

impl ConfigEcho {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
    }

    /// Reads leading `# key=value` lines; returns the echo and the number of
    /// lines consumed.
    pub fn parse(text: &str) -> (Self, usize) {
        let mut echo = ConfigEcho::default();
        let mut used = 0;
        for line in text.lines() {
            let Some(rest) = line.strip_prefix("# ") else {
                break;
            };
            let Some((k, v)) = rest.split_once('=') else {
                break;
            };
            echo.push(k, v);
            used += 1;
        }
        (echo, used)
    }
}

pub const RANKED_COLUMNS: &str = "rank\tscore\tmembers\tbase_group\tabsorbed_actor\tsubgroup";
pub const PER_GROUP_COLUMNS: &str =
    "group\trank\tscore\tmembers\tbase_group\tabsorbed_actor\tsubgroup";
pub const SHARD_SIZE: usize = 10_000;

fn entry_fields(exp: &Experiment, e: &RankedEntry) -> String {
    let base = &exp.snapshot.groups()[e.provenance.base_group];
    let sub = match e.provenance.subgroup_mask {
        Some(_) => exp.names(&e.provenance.subgroup(base)).join(","),
        None => String::new(),
    };
    format!(
        "{}\t{}\t{}\t{}\t{}",
        e.score,
        exp.names(e.key.members()).join(","),
        exp.names(base.members()).join(","),
        exp.names(&[e.provenance.absorbed])[0],
        sub
    )
}

pub fn render_ranked(exp: &Experiment, echo: &ConfigEcho, list: &RankedList) -> String {
    let mut out = echo.render();
    out.push_str(RANKED_COLUMNS);
    out.push('\n');
    for (i, e) in list.entries.iter().enumerate() {
        let _ = writeln!(out, "{}\t{}", i + 1, entry_fields(exp, e));
    }
    out
}

/// Renders groups `start..end` of the per-group lists.
pub fn render_per_group(
    exp: &Experiment,
    echo: &ConfigEcho,
    lists: &[Vec<RankedEntry>],
    start: usize,
    end: usize,
) -> String {
    let mut out = echo.render();
    out.push_str(PER_GROUP_COLUMNS);
    out.push('\n');
    for (gi, list) in lists.iter().enumerate().take(end).skip(start) {
        for (i, e) in list.iter().enumerate() {
            let _ = writeln!(out, "{gi}\t{}\t{}", i + 1, entry_fields(exp, e));
        }
    }
    out
}

pub fn ranked_file_name(method: Method, process: Process) -> String {
    format!("{}.{}.ranked.tsv", method.name(), process.tag())
}

pub fn per_group_file_name(method: Method, process: Process, shard: usize) -> String {
    format!(
        "{}.{}.pergroup.{shard:04}.tsv",
        method.name(),
        process.tag()
    )
}

/// A ranked list read back from disk, with keys in local indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedList {
    pub echo: ConfigEcho,
    pub keys: Vec<GroupKey>,
}

/// Per-group lists read back from shards: `(group, keys)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPerGroup {
    pub echo: ConfigEcho,
    pub rows: Vec<(usize, Vec<GroupKey>)>,
}

fn parse_key(exp: &Experiment, field: &str, path: &str, line: usize) -> Result<GroupKey> {
    let perr = |msg: String| Error::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let mut local = Vec::new();
    for name in field.split(',') {
        let a = exp.local_actor(name).ok_or_else(|| {
            perr(format!(
                "actor {name:?} does not occur in the training period"
            ))
        })?;
        local.push(a);
    }
    GroupKey::new(local).map_err(|e| perr(e.to_string()))
}

fn body_lines<'t>(
    text: &'t str,
    path: &str,
    columns: &str,
) -> Result<(ConfigEcho, Vec<(usize, &'t str)>)> {
    let (echo, used) = ConfigEcho::parse(text);
    let mut lines = text.lines().enumerate().skip(used);
    match lines.next() {
        Some((_, l)) if l == columns => {}
        Some((i, l)) => {
            return Err(Error::Parse {
                path: path.to_string(),
                line: i + 1,
                msg: format!("expected column header {columns:?}, found {l:?}"),
            })
        }
        None => {
            return Err(Error::Parse {
                path: path.to_string(),
                line: used + 1,
                msg: "missing column header".into(),
            })
        }
    }
    Ok((
        echo,
        lines
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.is_empty())
            .collect(),
    ))
}

fn fields<'t>(l: &'t str, want: usize, path: &str, line: usize) -> Result<Vec<&'t str>> {
    let f: Vec<&str> = l.split('\t').collect();
    if f.len() != want {
        return Err(Error::Parse {
            path: path.to_string(),
            line,
            msg: format!("expected {want} tab-separated fields, found {}", f.len()),
        });
    }
    Ok(f)
}

fn parse_num<T: FromStr>(s: &str, what: &str, path: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        msg: format!("invalid {what} {s:?}"),
    })
}

pub fn parse_ranked(exp: &Experiment, text: &str, path: &str) -> Result<LoadedList> {
    let (echo, body) = body_lines(text, path, RANKED_COLUMNS)?;
    let mut keys = Vec::with_capacity(body.len());
    let mut prev: Option<f64> = None;
    for (line, l) in body {
        let f = fields(l, 6, path, line)?;
        let rank: usize = parse_num(f[0], "rank", path, line)?;
        if rank != keys.len() + 1 {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                msg: format!("rank {rank} out of sequence"),
            });
        }
        let score: f64 = parse_num(f[1], "score", path, line)?;
        if prev.is_some_and(|p| score > p) {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                msg: "scores are not in descending order".into(),
            });
        }
        prev = Some(score);
        keys.push(parse_key(exp, f[2], path, line)?);
    }
    Ok(LoadedList { echo, keys })
}

pub fn parse_per_group(exp: &Experiment, text: &str, path: &str) -> Result<LoadedPerGroup> {
    let (echo, body) = body_lines(text, path, PER_GROUP_COLUMNS)?;
    let mut rows: Vec<(usize, Vec<GroupKey>)> = Vec::new();
    for (line, l) in body {
        let f = fields(l, 7, path, line)?;
        let group: usize = parse_num(f[0], "group index", path, line)?;
        if group >= exp.snapshot.groups().len() {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                msg: format!("group index {group} out of range"),
            });
        }
        let key = parse_key(exp, f[3], path, line)?;
        match rows.last_mut() {
            Some((g, keys)) if *g == group => keys.push(key),
            _ => rows.push((group, vec![key])),
        }
    }
    Ok(LoadedPerGroup { echo, rows })
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Local test groups as a set, for exact-match lookups.
pub fn test_set(exp: &Experiment) -> HashSet<GroupKey> {
    exp.test_local.iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gks::KatzParams;
    use crate::glps::{build_propagation_operator, GlpsParams};

    fn demo() -> Experiment {
        let corpus = Corpus::from_records(vec![
            (2003, vec!["ann", "bob"]),
            (2004, vec!["bob", "cat", "dan"]),
            (2005, vec!["dan", "eve"]),
            (2008, vec!["ann", "bob", "cat"]),
            (2009, vec!["zed", "ann"]),
            (2009, vec!["cat", "eve"]),
        ])
        .unwrap();
        Experiment::prepare(corpus, SplitSpec::new(2003, 2007, 2008, 2010).unwrap()).unwrap()
    }

    #[test]
    fn unseen_actors_are_dropped_locally() {
        let exp = demo();
        assert_eq!(exp.snapshot.n(), 5);
        assert_eq!(exp.split.test.len(), 3);
        assert_eq!(exp.test_local.len(), 2);
        for (g, l) in exp.split.train.iter().zip(exp.snapshot.groups()) {
            assert_eq!(&exp.to_global(l), g);
        }
    }

    #[test]
    fn pass_is_thread_independent() {
        let exp = demo();
        let scorer = GksScorer::new(&exp.snapshot, KatzParams::default()).unwrap();
        let cfg = PassConfig {
            n_top: 5,
            n_top_group: 3,
            ..Default::default()
        };
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one
            .install(|| run_pass(&exp.snapshot, &scorer, None, &cfg))
            .unwrap();
        let b = four
            .install(|| run_pass(&exp.snapshot, &scorer, None, &cfg))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_group_ia.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn ranked_file_round_trip() {
        let exp = demo();
        let op = build_propagation_operator(&exp.snapshot);
        let solver = GlpsSolver::new(&op, GlpsParams::default()).unwrap();
        let out = run_pass(&exp.snapshot, &solver, None, &PassConfig::default()).unwrap();
        let mut echo = ConfigEcho::default();
        echo.push("process", "sa");
        let list = out.global_sa.unwrap();
        let text = render_ranked(&exp, &echo, &list);
        let back = parse_ranked(&exp, &text, "mem").unwrap();
        assert_eq!(back.echo, echo);
        assert_eq!(back.keys, list.keys().cloned().collect::<Vec<_>>());

        let lists = out.per_group_ia.unwrap();
        let text = render_per_group(&exp, &echo, &lists, 1, 3);
        let back = parse_per_group(&exp, &text, "mem").unwrap();
        assert_eq!(back.rows.len(), 2);
        assert_eq!(back.rows[0].0, 1);
        assert_eq!(
            back.rows[0].1,
            lists[1].iter().map(|e| e.key.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn malformed_files_name_the_line() {
        let exp = demo();
        let text = format!(
            "# a=b\n{RANKED_COLUMNS}\n1\t0.5\tann,bob,dan\tann,bob\tdan\t\n2\tx\tann\tann\tann\t\n"
        );
        match parse_ranked(&exp, &text, "f.tsv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let text = format!("{RANKED_COLUMNS}\n1\t0.5\tann,zed\tann,bob\tzed\t\n");
        assert!(matches!(
            parse_ranked(&exp, &text, "f.tsv"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_ranked(&exp, "nonsense\n", "f.tsv"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
