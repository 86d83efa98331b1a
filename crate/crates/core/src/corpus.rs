// SPDX-License-Identifier: Apache-2.0

//! Timestamped group records, temporal train/test splits and the accretion
//! statistics of a test period.
//!
//! The on-disk format is one record per line, `<year>\t<name>(,<name>)*`.
//! Lines starting with `#` and blank lines are ignored.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::network::{ActorIndex, GroupKey};

/// Records with more members than this are dropped at ingest.
pub const MAX_GROUP_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupRecord {
    pub year: i32,
    pub members: GroupKey,
}

/// A collaboration history with its actor-name registry.
///
/// Actor indices are assigned in order of first appearance in the source.
/// Equality compares content (years and member names), not index
/// assignment, so a corpus equals its re-ingested serialization.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    names: Vec<String>,
    lookup: HashMap<String, ActorIndex>,
    records: Vec<GroupRecord>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.names.len() == other.names.len()
            && self.records.len() == other.records.len()
            && self.named_records() == other.named_records()
    }
}

impl Corpus {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut corpus = Corpus::default();
        let mut pending: Vec<(i32, Vec<ActorIndex>)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: source.to_string(),
                line: lineno + 1,
                msg,
            };
            let (year, names) = line
                .split_once('\t')
                .ok_or_else(|| err("expected <year>\\t<names>".into()))?;
            let year: i32 = year
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid year {year:?}")))?;
            if names.contains('\t') {
                return Err(err("unexpected extra tab".into()));
            }
            let mut seen = HashSet::new();
            let mut members: Vec<&str> = Vec::new();
            for name in names.split(',') {
                let name = name.trim();
                if name.is_empty() {
                    return Err(err("empty actor name".into()));
                }
                if seen.insert(name) {
                    members.push(name);
                }
            }
            if members.len() > MAX_GROUP_SIZE {
                warn!(
                    "{source}:{}: dropping group of {} members (limit {MAX_GROUP_SIZE})",
                    lineno + 1,
                    members.len()
                );
                continue;
            }
            let ids = members.into_iter().map(|m| corpus.intern(m)).collect();
            pending.push((year, ids));
        }
        if pending.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        corpus.records = pending
            .into_iter()
            .map(|(year, ids)| GroupRecord {
                year,
                members: GroupKey::new(ids).expect("records have at least one member"),
            })
            .collect();
        corpus
            .records
            .sort_by(|a, b| (a.year, &a.members).cmp(&(b.year, &b.members)));
        Ok(corpus)
    }

    pub fn ingest(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn from_records<S: AsRef<str>>(
        records: impl IntoIterator<Item = (i32, Vec<S>)>,
    ) -> Result<Self> {
        let mut text = String::new();
        for (year, names) in records {
            let names: Vec<&str> = names.iter().map(|s| s.as_ref()).collect();
            writeln!(text, "{year}\t{}", names.join(",")).unwrap();
        }
        Self::parse(&text, "<memory>")
    }

    fn intern(&mut self, name: &str) -> ActorIndex {
        if let Some(&i) = self.lookup.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), i);
        i
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            writeln!(
                out,
                "{}\t{}",
                r.year,
                self.member_names(&r.members).join(",")
            )
            .unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn records(&self) -> &[GroupRecord] {
        &self.records
    }

    pub fn actor_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, actor: ActorIndex) -> &str {
        &self.names[actor]
    }

    pub fn actor(&self, name: &str) -> Option<ActorIndex> {
        self.lookup.get(name).copied()
    }

    pub fn member_names(&self, key: &GroupKey) -> Vec<&str> {
        key.members().iter().map(|&a| self.name(a)).collect()
    }

    fn named_records(&self) -> Vec<(i32, Vec<&str>)> {
        let mut out: Vec<(i32, Vec<&str>)> = self
            .records
            .iter()
            .map(|r| {
                let mut names = self.member_names(&r.members);
                names.sort_unstable();
                (r.year, names)
            })
            .collect();
        out.sort();
        out
    }
}

/// Inclusive training and test year ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_start: i32,
    pub train_end: i32,
    pub test_start: i32,
    pub test_end: i32,
}

/// Named splits with a fixed boundary year.
pub const PRESETS: &[(&str, SplitSpec)] = &[
    ("A.1", SplitSpec::new_unchecked(1992, 1995, 1996, 1998)),
    ("A.2", SplitSpec::new_unchecked(1993, 1995, 1996, 1998)),
    ("A.3", SplitSpec::new_unchecked(1993, 1995, 1996, 1999)),
    ("A.4", SplitSpec::new_unchecked(1997, 2000, 2001, 2003)),
    ("A.5", SplitSpec::new_unchecked(1998, 2000, 2001, 2003)),
    ("A.6", SplitSpec::new_unchecked(1998, 2000, 2001, 2004)),
    ("A.7", SplitSpec::new_unchecked(2002, 2005, 2006, 2008)),
    ("A.8", SplitSpec::new_unchecked(2003, 2005, 2006, 2008)),
    ("A.9", SplitSpec::new_unchecked(2003, 2005, 2006, 2009)),
    ("main", SplitSpec::new_unchecked(2003, 2007, 2008, 2010)),
    (
        "main-2004",
        SplitSpec::new_unchecked(2004, 2007, 2008, 2010),
    ),
];

impl SplitSpec {
    const fn new_unchecked(
        train_start: i32,
        train_end: i32,
        test_start: i32,
        test_end: i32,
    ) -> Self {
        Self {
            train_start,
            train_end,
            test_start,
            test_end,
        }
    }

    pub fn new(train_start: i32, train_end: i32, test_start: i32, test_end: i32) -> Result<Self> {
        let s = Self::new_unchecked(train_start, train_end, test_start, test_end);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_start <= self.train_end
            && self.train_end < self.test_start
            && self.test_start <= self.test_end
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "split {self} must satisfy train_start <= train_end < test_start <= test_end"
            )))
        }
    }

    pub fn preset(name: &str) -> Option<SplitSpec> {
        PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
    }

    pub fn in_train(&self, year: i32) -> bool {
        (self.train_start..=self.train_end).contains(&year)
    }

    pub fn in_test(&self, year: i32) -> bool {
        (self.test_start..=self.test_end).contains(&year)
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}:{}-{}",
            self.train_start, self.train_end, self.test_start, self.test_end
        )
    }
}

/// Accepts a preset name or `TRAIN_START-TRAIN_END:TEST_START-TEST_END`.
impl FromStr for SplitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(p) = Self::preset(s) {
            return Ok(p);
        }
        let bad = || Error::InvalidParameter(format!("unknown split {s:?}"));
        let (train, test) = s.split_once(':').ok_or_else(bad)?;
        let range = |r: &str| -> Result<(i32, i32)> {
            let (a, b) = r.split_once('-').ok_or_else(bad)?;
            Ok((
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ))
        };
        let (a, b) = range(train)?;
        let (c, d) = range(test)?;
        SplitSpec::new(a, b, c, d)
    }
}

/// Unique groups on each side of a split, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<GroupKey>,
    pub test: Vec<GroupKey>,
}

pub fn make_split(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut train = BTreeSet::new();
    let mut test = BTreeSet::new();
    for r in corpus.records() {
        if spec.in_train(r.year) {
            train.insert(r.members.clone());
        } else if spec.in_test(r.year) {
            test.insert(r.members.clone());
        }
    }
    if train.is_empty() {
        warn!("split {spec}: no training groups");
    }
    if test.is_empty() {
        warn!("split {spec}: no test groups");
    }
    Ok(Split {
        train: train.into_iter().collect(),
        test: test.into_iter().collect(),
    })
}

/// Whether every member of a test group was seen in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorNovelty {
    /// New-actor group: at least one member absent from training.
    Nag,
    /// Old-actor group: all members seen in training.
    Oag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupTag {
    pub actors: ActorNovelty,
    /// The exact member set occurs in training.
    pub old: bool,
}

pub fn classify_test_groups(train: &[GroupKey], test: &[GroupKey]) -> Vec<GroupTag> {
    let seen_actors: HashSet<ActorIndex> = train
        .iter()
        .flat_map(|g| g.members().iter().copied())
        .collect();
    let seen_groups: HashSet<&GroupKey> = train.iter().collect();
    test.iter()
        .map(|t| GroupTag {
            actors: if t.members().iter().all(|a| seen_actors.contains(a)) {
                ActorNovelty::Oag
            } else {
                ActorNovelty::Nag
            },
            old: seen_groups.contains(t),
        })
        .collect()
}

/// Which actors may be absorbed by a proper subgroup `s ⊂ g` when detecting
/// subgroup accretion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SgRule {
    /// The absorbed actor lies outside the whole parent group `g`.
    #[default]
    OutsideParent,
    /// The absorbed actor only has to lie outside the subgroup `s`.
    OutsideSubgroup,
}

impl FromStr for SgRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outside-parent" => Ok(SgRule::OutsideParent),
            "outside-subgroup" => Ok(SgRule::OutsideSubgroup),
            _ => Err(Error::InvalidParameter(format!("unknown SG rule {s:?}"))),
        }
    }
}

/// Lookup structure over the training groups for accretion detection.
pub struct AccretionIndex<'a> {
    groups: HashSet<&'a GroupKey>,
    by_actor: HashMap<ActorIndex, Vec<&'a GroupKey>>,
    rule: SgRule,
}

impl<'a> AccretionIndex<'a> {
    pub fn new(train: &'a [GroupKey], rule: SgRule) -> Self {
        let mut by_actor: HashMap<ActorIndex, Vec<&GroupKey>> = HashMap::new();
        for g in train {
            for &a in g.members() {
                by_actor.entry(a).or_default().push(g);
            }
        }
        Self {
            groups: train.iter().collect(),
            by_actor,
            rule,
        }
    }

    /// `t = g ∪ {a}` for some training group `g` and `a ∉ g`.
    pub fn is_incremental(&self, t: &GroupKey) -> bool {
        t.len() >= 2
            && t.members()
                .iter()
                .any(|&x| t.without(x).is_some_and(|g| self.groups.contains(&g)))
    }

    /// `t = s ∪ {a}` for a proper non-empty subgroup `s` of a training group
    /// `g`, with `a` outside `g` (or outside `s`, depending on the rule).
    pub fn is_subincremental(&self, t: &GroupKey) -> bool {
        t.members().iter().any(|&x| {
            let Some(s) = t.without(x) else { return false };
            let Some(postings) = s
                .members()
                .iter()
                .map(|a| self.by_actor.get(a))
                .collect::<Option<Vec<_>>>()
            else {
                return false;
            };
            let shortest = postings.into_iter().min_by_key(|p| p.len()).unwrap();
            shortest.iter().any(|g| {
                g.len() > s.len()
                    && s.is_subset_of(g)
                    && match self.rule {
                        SgRule::OutsideParent => !g.contains(x),
                        SgRule::OutsideSubgroup => true,
                    }
            })
        })
    }
}

/// Counts for one accretion process (IA or SA) among old-actor test groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AccretionCounts {
    pub old: usize,
    pub new: usize,
}

impl AccretionCounts {
    pub fn total(&self) -> usize {
        self.old + self.new
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AccretionStats {
    pub new_actor_groups: usize,
    pub old_actor_groups: usize,
    pub incremental: AccretionCounts,
    pub subincremental: AccretionCounts,
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

impl AccretionStats {
    pub fn total_groups(&self) -> usize {
        self.new_actor_groups + self.old_actor_groups
    }

    pub fn pct_new(&self) -> Option<f64> {
        percent(self.new_actor_groups, self.total_groups())
    }

    pub fn pct_old(&self) -> Option<f64> {
        percent(self.old_actor_groups, self.total_groups())
    }

    /// New, old and total events as a share of old-actor groups.
    pub fn pct_of_oag(&self, c: &AccretionCounts) -> [Option<f64>; 3] {
        let d = self.old_actor_groups;
        [percent(c.new, d), percent(c.old, d), percent(c.total(), d)]
    }

    /// New and old events as a share of all events of that kind.
    pub fn pct_of_total(c: &AccretionCounts) -> [Option<f64>; 2] {
        [percent(c.new, c.total()), percent(c.old, c.total())]
    }

    pub const TSV_HEADER: &'static str = "split\tnag\toag\ttotal_groups\tpct_nag\tpct_oag\t\
old_igs\tnew_igs\ttotal_igs\tpct_oag_new_igs\tpct_oag_old_igs\tpct_oag_total_igs\tpct_igs_new\tpct_igs_old\t\
old_sgs\tnew_sgs\ttotal_sgs\tpct_oag_new_sgs\tpct_oag_old_sgs\tpct_oag_total_sgs\tpct_sgs_new\tpct_sgs_old";

    /// One TSV row; absent percentages are written as `NA`.
    pub fn tsv_row(&self, label: &str) -> String {
        let mut cols: Vec<String> = vec![
            label.to_string(),
            self.new_actor_groups.to_string(),
            self.old_actor_groups.to_string(),
            self.total_groups().to_string(),
            fmt_pct(self.pct_new()),
            fmt_pct(self.pct_old()),
        ];
        for c in [&self.incremental, &self.subincremental] {
            cols.push(c.old.to_string());
            cols.push(c.new.to_string());
            cols.push(c.total().to_string());
            cols.extend(self.pct_of_oag(c).into_iter().map(fmt_pct));
            cols.extend(Self::pct_of_total(c).into_iter().map(fmt_pct));
        }
        cols.join("\t")
    }
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn fmt_pct(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.2}", round2(v)),
        None => "NA".to_string(),
    }
}

pub fn compute_accretion_stats(
    train: &[GroupKey],
    test: &[GroupKey],
    rule: SgRule,
) -> AccretionStats {
    let tags = classify_test_groups(train, test);
    let index = AccretionIndex::new(train, rule);
    let mut stats = AccretionStats::default();
    for (t, tag) in test.iter().zip(tags) {
        if tag.actors == ActorNovelty::Nag {
            stats.new_actor_groups += 1;
            continue;
        }
        stats.old_actor_groups += 1;
        let bump = |c: &mut AccretionCounts| {
            if tag.old {
                c.old += 1
            } else {
                c.new += 1
            }
        };
        if index.is_incremental(t) {
            bump(&mut stats.incremental);
        }
        if index.is_subincremental(t) {
            bump(&mut stats.subincremental);
        }
    }
    stats
}
