// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic collaboration histories.
//!
//! Actors are split into communities; groups draw most members from one
//! community. Test-period groups are a mix of planted incremental and
//! subgroup accretions of training groups and fresh random groups, some
//! with actors never seen in training.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub actors: usize,
    pub train_groups: usize,
    pub test_groups: usize,
    pub community_size: usize,
    pub min_size: usize,
    pub max_size: usize,
    /// Share of test groups planted as accretions of a training group.
    pub accretion_share: f64,
    /// Chance that a fresh test group includes a newcomer.
    pub newcomer_share: f64,
    pub train_years: (i32, i32),
    pub test_years: (i32, i32),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            actors: 20_000,
            train_groups: 5_000,
            test_groups: 2_000,
            community_size: 40,
            min_size: 2,
            max_size: 5,
            accretion_share: 0.3,
            newcomer_share: 0.5,
            train_years: (2003, 2007),
            test_years: (2008, 2010),
            seed: 1,
        }
    }
}

fn name(a: usize) -> String {
    format!("a{a}")
}

struct Gen<'c> {
    cfg: &'c SynthConfig,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn community_group(&mut self, pool: usize) -> Vec<usize> {
        let cfg = self.cfg;
        let size = self.rng.gen_range(cfg.min_size..=cfg.max_size);
        let communities = pool.div_ceil(cfg.community_size).max(1);
        let c = self.rng.gen_range(0..communities);
        let lo = c * cfg.community_size;
        let hi = ((c + 1) * cfg.community_size).min(pool);
        let mut g = HashSet::new();
        while g.len() < size {
            // One member in five comes from anywhere.
            let a = if self.rng.gen_bool(0.2) || hi <= lo {
                self.rng.gen_range(0..pool)
            } else {
                self.rng.gen_range(lo..hi)
            };
            g.insert(a);
        }
        let mut g: Vec<usize> = g.into_iter().collect();
        g.sort_unstable();
        g
    }

    fn year(&mut self, span: (i32, i32)) -> i32 {
        self.rng.gen_range(span.0..=span.1)
    }
}

/// Generates a corpus whose training period holds exactly
/// `cfg.train_groups` distinct groups.
pub fn generate(cfg: &SynthConfig) -> Result<Corpus> {
    if cfg.min_size == 0
        || cfg.min_size > cfg.max_size
        || cfg.max_size > cfg.actors
        || cfg.community_size == 0
    {
        return Err(Error::InvalidParameter(
            "inconsistent synthetic group sizes".into(),
        ));
    }
    let mut g = Gen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    // The last tenth of the actors only appears in the test period.
    let veterans = (cfg.actors - cfg.actors / 10).max(cfg.max_size);
    let mut seen = HashSet::new();
    let mut train = Vec::with_capacity(cfg.train_groups);
    let mut attempts = 0usize;
    while train.len() < cfg.train_groups {
        attempts += 1;
        if attempts > 50 * cfg.train_groups + 1000 {
            return Err(Error::InvalidParameter(
                "too few actors for the requested number of distinct groups".into(),
            ));
        }
        let grp = g.community_group(veterans);
        if seen.insert(grp.clone()) {
            train.push(grp);
        }
    }
    let mut records: Vec<(i32, Vec<String>)> =
        Vec::with_capacity(cfg.train_groups + cfg.test_groups);
    for grp in &train {
        let y = g.year(cfg.train_years);
        records.push((y, grp.iter().map(|&a| name(a)).collect()));
    }
    for _ in 0..cfg.test_groups {
        let grp = if g.rng.gen_bool(cfg.accretion_share) {
            let base = train.choose(&mut g.rng).unwrap().clone();
            let mut t: Vec<usize> = if base.len() >= 2 && g.rng.gen_bool(0.5) {
                let keep = g.rng.gen_range(1..base.len());
                base.choose_multiple(&mut g.rng, keep).copied().collect()
            } else {
                base.clone()
            };
            loop {
                let a = g.rng.gen_range(0..veterans);
                if !base.contains(&a) {
                    t.push(a);
                    break;
                }
            }
            t
        } else {
            let mut t = g.community_group(veterans);
            if cfg.actors > veterans && g.rng.gen_bool(cfg.newcomer_share) {
                t[0] = g.rng.gen_range(veterans..cfg.actors);
            }
            t
        };
        let y = g.year(cfg.test_years);
        records.push((y, grp.iter().map(|&a| name(a)).collect()));
    }
    Corpus::from_records(records)
}
