// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: `stats`, `score`, `evaluate` and `verify`.
//!
//! Settings come from flags, then from an optional `key=value` file given
//! with `--config` (keys are flag names without the dashes), then from the
//! built-in defaults. Every file written starts with `# key=value` lines
//! recording the resolved configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use log::warn;

use crate::birw::{BirwParams, PriorNormalization};
use crate::candidates::{Process, RecallConvention, DEFAULT_SA_CAP};
use crate::corpus::{AccretionStats, Corpus, SgRule, SplitSpec, PRESETS};
use crate::error::{Error, Result};
use crate::gks::{GksScorer, KatzParams};
use crate::glps::{build_propagation_operator, GlpsParams, GlpsSolver, SolverKind};
use crate::pipeline::{
    self, evaluate_lists, per_group_file_name, ranked_file_name, render_per_group, render_ranked,
    run_pass, BrwsScorer, ConfigEcho, EvalLists, Experiment, GroupScorer, Method, PassConfig,
    SHARD_SIZE,
};
use crate::verify::{self, VerifyParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;

const DEFAULT_OUT: &str = "results";
const DEFAULT_SPLIT: &str = "main";

#[derive(Debug, Parser)]
#[command(
    name = "accretion",
    version,
    about = "Score and rank small-group accretion candidates"
)]
pub struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Accretion statistics of the test period.
    Stats(StatsArgs),
    /// Score every training group and write ranked candidate lists.
    Score(ScoreArgs),
    /// Compare ranked lists with the test period.
    Evaluate(EvaluateArgs),
    /// Cross-check all scorers against brute-force oracles on a small corpus.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Collaboration history, one `year<TAB>name,name,...` line per group.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Preset (A.1 to A.9, main, main-2004) or TRAIN_START-TRAIN_END:TEST_START-TEST_END.
    #[arg(long)]
    pub split: Option<String>,
    /// File of `key=value` settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Subgroup accretion rule: outside-parent or outside-subgroup.
    #[arg(long)]
    pub sg_rule: Option<String>,
}

#[derive(Debug, Args)]
pub struct Params {
    /// gks, brws, glps or all.
    #[arg(long)]
    pub method: Option<String>,
    /// ia, sa or both.
    #[arg(long)]
    pub mode: Option<String>,
    /// Katz decay.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Longest walk counted by the Katz score.
    #[arg(long)]
    pub max_length: Option<usize>,
    /// Bi-random walk restart weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Group-side walk steps.
    #[arg(long)]
    pub lg: Option<usize>,
    /// Outer-side walk steps.
    #[arg(long)]
    pub lo: Option<usize>,
    /// Prior scaling for the bi-random walk: grand-total or per-row.
    #[arg(long)]
    pub prior_norm: Option<String>,
    /// Label propagation regularization, for both list kinds unless --mu-group is given.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Label propagation regularization for per-group lists.
    #[arg(long)]
    pub mu_group: Option<f64>,
    /// auto, closed-form or iterative.
    #[arg(long)]
    pub solver: Option<String>,
    /// Stopping tolerance of the iterative solver.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap of the iterative solver.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Length of the global ranked lists.
    #[arg(long)]
    pub n_top: Option<usize>,
    /// Length of the per-group lists.
    #[arg(long)]
    pub n_top_group: Option<usize>,
    /// Largest group whose subgroups are enumerated.
    #[arg(long)]
    pub sa_cap: Option<usize>,
    /// Recorded in outputs; runs are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the per-group lists.
    #[arg(long)]
    pub no_per_group: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// gks, brws, glps or all; selects lists in the input directory.
    #[arg(long)]
    pub method: Option<String>,
    /// Directory holding the ranked lists (default: the output directory).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Ranked-list files to evaluate instead of searching the input directory.
    #[arg(long = "ranked")]
    pub ranked: Vec<PathBuf>,
    /// Per-group recall of groups with no accretion event: zero or exclude.
    #[arg(long)]
    pub recall_convention: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub params: Params,
    /// Perturb scorer outputs before checking (negative control).
    #[arg(long, hide = true)]
    pub mutate: bool,
}

const KNOWN_KEYS: &[&str] = &[
    "corpus",
    "split",
    "threads",
    "out",
    "sg-rule",
    "method",
    "mode",
    "beta",
    "max-length",
    "alpha",
    "lg",
    "lo",
    "prior-norm",
    "mu",
    "mu-group",
    "solver",
    "tol",
    "max-iter",
    "n-top",
    "n-top-group",
    "sa-cap",
    "seed",
    "no-per-group",
    "input",
    "recall-convention",
];

/// Values from the `--config` file, with their line numbers.
#[derive(Debug, Default)]
struct Settings {
    path: String,
    values: BTreeMap<String, (String, usize)>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = pipeline::read_text(path)?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: "expected key=value".into(),
            })?;
            let key = k.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                warn!(
                    "{}:{}: unknown setting {key:?} ignored",
                    path.display(),
                    i + 1
                );
            }
            values.insert(key, (v.trim().to_string(), i + 1));
        }
        Ok(Self {
            path: path.display().to_string(),
            values,
        })
    }

    fn file<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e| Error::Parse {
                path: self.path.clone(),
                line: *line,
                msg: format!("{key}: {e}"),
            }),
        }
    }

    /// The flag value if given, else the file value, else `default`.
    fn pick<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.file(key)?.unwrap_or(default)),
        }
    }

    fn pick_opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file(key),
        }
    }
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s == "all" {
        return Ok(Method::ALL.to_vec());
    }
    Ok(vec![s.parse()?])
}

fn parse_mode(s: &str) -> Result<(bool, bool)> {
    match s {
        "ia" => Ok((true, false)),
        "sa" => Ok((false, true)),
        "both" => Ok((true, true)),
        _ => Err(Error::InvalidParameter(format!("unknown mode {s:?}"))),
    }
}

fn prior_label(p: PriorNormalization) -> &'static str {
    match p {
        PriorNormalization::GrandTotal => "grand-total",
        PriorNormalization::PerRow => "per-row",
    }
}

fn solver_label(s: SolverKind) -> &'static str {
    match s {
        SolverKind::Auto => "auto",
        SolverKind::ClosedForm => "closed-form",
        SolverKind::Iterative => "iterative",
    }
}

fn sg_rule_label(r: SgRule) -> &'static str {
    match r {
        SgRule::OutsideParent => "outside-parent",
        SgRule::OutsideSubgroup => "outside-subgroup",
    }
}

fn recall_label(r: RecallConvention) -> &'static str {
    match r {
        RecallConvention::ZeroContribution => "zero",
        RecallConvention::Exclude => "exclude",
    }
}

struct Input {
    corpus_path: PathBuf,
    split_label: String,
    spec: SplitSpec,
    out: PathBuf,
}

fn resolve_input(c: &Common, s: &Settings, fallback: Option<&ConfigEcho>) -> Result<Input> {
    let corpus_path = s
        .pick_opt("corpus", c.corpus.clone())?
        .or_else(|| fallback.and_then(|e| e.get("corpus")).map(PathBuf::from))
        .ok_or_else(|| Error::InvalidParameter("--corpus is required".into()))?;
    let split_label = s
        .pick_opt("split", c.split.clone())?
        .or_else(|| fallback.and_then(|e| e.get("split")).map(String::from))
        .unwrap_or_else(|| DEFAULT_SPLIT.to_string());
    let spec: SplitSpec = split_label.parse()?;
    let out = s.pick("out", c.out.clone(), PathBuf::from(DEFAULT_OUT))?;
    Ok(Input {
        corpus_path,
        split_label,
        spec,
        out,
    })
}

fn setup_threads(c: &Common, s: &Settings) -> Result<()> {
    if let Some(t) = s.pick_opt::<usize>("threads", c.threads)? {
        if t == 0 {
            return Err(Error::InvalidParameter(
                "--threads must be at least 1".into(),
            ));
        }
        if rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .is_err()
        {
            warn!("thread pool already initialized; --threads ignored");
        }
    }
    Ok(())
}

fn base_echo(command: &str, input: &Input) -> ConfigEcho {
    let mut e = ConfigEcho::default();
    e.push("tool", "accretion");
    e.push("version", env!("CARGO_PKG_VERSION"));
    e.push("command", command);
    e.push("corpus", input.corpus_path.display());
    e.push("split", &input.split_label);
    e.push("years", input.spec);
    e
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    let result = match &cli.command {
        Command::Stats(a) => cmd_stats(a).map(|_| EXIT_OK),
        Command::Score(a) => cmd_score(a).map(|_| EXIT_OK),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| EXIT_OK),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let s = Settings::load(a.common.config.as_deref())?;
    setup_threads(&a.common, &s)?;
    let rule: SgRule = s.pick(
        "sg-rule",
        a.sg_rule.as_deref().map(str::parse).transpose()?,
        SgRule::default(),
    )?;
    let split_arg = s.pick_opt("split", a.common.split.clone())?;
    let all = split_arg.as_deref() == Some("all");
    let common = Common {
        corpus: a.common.corpus.clone(),
        split: if all {
            Some(DEFAULT_SPLIT.into())
        } else {
            split_arg.clone()
        },
        config: None,
        threads: None,
        out: a.common.out.clone(),
    };
    let mut input = resolve_input(&common, &s, None)?;
    let corpus = Corpus::ingest(&input.corpus_path)?;
    let splits: Vec<(String, SplitSpec)> = if all {
        PRESETS.iter().map(|(n, p)| (n.to_string(), *p)).collect()
    } else {
        vec![(input.split_label.clone(), input.spec)]
    };
    if all {
        input.split_label = "all".into();
    }
    let mut echo = base_echo("stats", &input);
    if all {
        echo.0.retain(|(k, _)| k != "years");
    }
    echo.push("sg_rule", sg_rule_label(rule));
    let mut text = echo.render();
    text.push_str(AccretionStats::TSV_HEADER);
    text.push('\n');
    for (label, spec) in splits {
        let split = crate::corpus::make_split(&corpus, &spec)?;
        let st = crate::corpus::compute_accretion_stats(&split.train, &split.test, rule);
        text.push_str(&st.tsv_row(&label));
        text.push('\n');
    }
    create_dir(&input.out)?;
    let path = input.out.join("stats.tsv");
    pipeline::write_text(&path, &text)?;
    print!("{text}");
    Ok(())
}

struct Resolved {
    methods: Vec<Method>,
    katz: KatzParams,
    birw: BirwParams,
    glps: GlpsParams,
    glps_group: GlpsParams,
    pass: PassConfig,
    seed: u64,
}

fn resolve_params(p: &Params, s: &Settings) -> Result<Resolved> {
    let methods = parse_methods(&s.pick("method", p.method.clone(), "all".to_string())?)?;
    let (ia, sa) = parse_mode(&s.pick("mode", p.mode.clone(), "both".to_string())?)?;
    let kd = KatzParams::default();
    let katz = KatzParams {
        beta: s.pick("beta", p.beta, kd.beta)?,
        max_length: s.pick("max-length", p.max_length, kd.max_length)?,
    };
    katz.validate()?;
    let bd = BirwParams::default();
    let prior = s.pick_opt::<String>("prior-norm", p.prior_norm.clone())?;
    let birw = BirwParams {
        alpha: s.pick("alpha", p.alpha, bd.alpha)?,
        l_group: s.pick("lg", p.lg, bd.l_group)?,
        l_outer: s.pick("lo", p.lo, bd.l_outer)?,
        normalization: prior
            .as_deref()
            .map(str::parse)
            .transpose()?
            .unwrap_or_default(),
    };
    birw.validate()?;
    let gd = GlpsParams::default();
    let solver = s.pick_opt::<String>("solver", p.solver.clone())?;
    let glps = GlpsParams {
        mu: s.pick("mu", p.mu, gd.mu)?,
        solver: solver
            .as_deref()
            .map(str::parse)
            .transpose()?
            .unwrap_or_default(),
        tol: s.pick("tol", p.tol, gd.tol)?,
        max_iter: s.pick("max-iter", p.max_iter, gd.max_iter)?,
    };
    let mu_group = match (p.mu_group, p.mu) {
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => s
            .file::<f64>("mu-group")?
            .or(s.file::<f64>("mu")?)
            .unwrap_or(GlpsParams::PER_GROUP_MU),
    };
    let glps_group = GlpsParams {
        mu: mu_group,
        ..glps
    };
    glps.validate()?;
    glps_group.validate()?;
    let pd = PassConfig::default();
    let no_per_group = p.no_per_group || s.file::<bool>("no-per-group")?.unwrap_or(false);
    let pass = PassConfig {
        n_top: s.pick("n-top", p.n_top, pd.n_top)?,
        n_top_group: s.pick("n-top-group", p.n_top_group, pd.n_top_group)?,
        sa_cap: s.pick("sa-cap", p.sa_cap, DEFAULT_SA_CAP)?,
        ia,
        sa,
        global: true,
        per_group: !no_per_group,
    };
    crate::candidates::validate_sa_cap(pass.sa_cap)?;
    Ok(Resolved {
        methods,
        katz,
        birw,
        glps,
        glps_group,
        pass,
        seed: s.pick("seed", p.seed, 0)?,
    })
}

fn method_echo(echo: &mut ConfigEcho, method: Method, r: &Resolved, per_group: bool) {
    echo.push("method", method.name());
    match method {
        Method::Gks => {
            echo.push("beta", r.katz.beta);
            echo.push("max_length", r.katz.max_length);
        }
        Method::Brws => {
            echo.push("alpha", r.birw.alpha);
            echo.push("lg", r.birw.l_group);
            echo.push("lo", r.birw.l_outer);
            echo.push("prior_norm", prior_label(r.birw.normalization));
        }
        Method::Glps => {
            let g = if per_group { &r.glps_group } else { &r.glps };
            echo.push("mu", g.mu);
            echo.push("solver", solver_label(g.solver));
            echo.push("tol", g.tol);
            echo.push("max_iter", g.max_iter);
        }
    }
    echo.push("sa_cap", r.pass.sa_cap);
    echo.push("seed", r.seed);
}

fn remove_stale_shards(dir: &Path, method: Method, process: Process) -> Result<()> {
    let prefix = format!("{}.{}.pergroup.", method.name(), process.tag());
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().to_string();
        if name.starts_with(&prefix) && name.ends_with(".tsv") {
            std::fs::remove_file(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        }
    }
    Ok(())
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let s = Settings::load(a.common.config.as_deref())?;
    setup_threads(&a.common, &s)?;
    let input = resolve_input(&a.common, &s, None)?;
    let r = resolve_params(&a.params, &s)?;
    let corpus = Corpus::ingest(&input.corpus_path)?;
    let exp = Experiment::prepare(corpus, input.spec)?;
    create_dir(&input.out)?;
    let m = exp.snapshot.groups().len();

    for &method in &r.methods {
        let op;
        let solvers;
        let gks;
        let brws;
        let (scorer, group_scorer): (&dyn GroupScorer, Option<&dyn GroupScorer>) = match method {
            Method::Gks => {
                gks = GksScorer::new(&exp.snapshot, r.katz)?;
                (&gks, None)
            }
            Method::Brws => {
                brws = BrwsScorer(r.birw);
                (&brws, None)
            }
            Method::Glps => {
                op = build_propagation_operator(&exp.snapshot);
                solvers = (
                    GlpsSolver::new(&op, r.glps)?,
                    GlpsSolver::new(&op, r.glps_group)?,
                );
                let separate = r.glps_group.mu != r.glps.mu;
                (
                    &solvers.0,
                    separate.then_some(&solvers.1 as &dyn GroupScorer),
                )
            }
        };
        let out = run_pass(&exp.snapshot, scorer, group_scorer, &r.pass)?;

        let parts = [
            (Process::Incremental, &out.global_ia, &out.per_group_ia),
            (Process::Subgroup, &out.global_sa, &out.per_group_sa),
        ];
        for (process, global, per_group) in parts {
            if let Some(list) = global {
                let mut echo = base_echo("score", &input);
                method_echo(&mut echo, method, &r, false);
                echo.push("process", process.tag());
                echo.push("list", "global");
                echo.push("n_top", r.pass.n_top);
                let path = input.out.join(ranked_file_name(method, process));
                pipeline::write_text(&path, &render_ranked(&exp, &echo, list))?;
                println!("{}: {} entries", path.display(), list.entries.len());
            }
            if let Some(lists) = per_group {
                remove_stale_shards(&input.out, method, process)?;
                let shards = m.div_ceil(SHARD_SIZE).max(1);
                for shard in 0..shards {
                    let start = shard * SHARD_SIZE;
                    let end = ((shard + 1) * SHARD_SIZE).min(m);
                    let mut echo = base_echo("score", &input);
                    method_echo(&mut echo, method, &r, true);
                    echo.push("process", process.tag());
                    echo.push("list", "pergroup");
                    echo.push("n_top_group", r.pass.n_top_group);
                    echo.push("groups", m);
                    echo.push("shard", format!("{start}-{end}"));
                    let path = input.out.join(per_group_file_name(method, process, shard));
                    pipeline::write_text(&path, &render_per_group(&exp, &echo, lists, start, end))?;
                    println!("{}: groups {start}..{end}", path.display());
                }
            }
        }
    }
    Ok(())
}

/// One ranked-list file and its parsed header.
struct Source {
    path: PathBuf,
    text: String,
    echo: ConfigEcho,
}

impl Source {
    fn read(path: PathBuf) -> Result<Self> {
        let text = pipeline::read_text(&path)?;
        let (echo, _) = ConfigEcho::parse(&text);
        Ok(Self { path, text, echo })
    }

    fn field(&self, key: &str) -> Result<&str> {
        self.echo.get(key).ok_or_else(|| Error::Parse {
            path: self.path.display().to_string(),
            line: 1,
            msg: format!("header lacks {key}="),
        })
    }

    fn number(&self, key: &str) -> Result<usize> {
        let v = self.field(key)?;
        v.parse().map_err(|_| Error::Parse {
            path: self.path.display().to_string(),
            line: 1,
            msg: format!("invalid {key}={v}"),
        })
    }
}

fn discover(dir: &Path, methods: &[Method]) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names: Vec<String> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        names.push(entry.file_name().to_string_lossy().to_string());
    }
    names.sort();
    for name in names {
        let wanted = methods.iter().any(|m| {
            let p = format!("{}.", m.name());
            name.starts_with(&p) && (name.ends_with(".ranked.tsv") || name.contains(".pergroup."))
        });
        if wanted && name.ends_with(".tsv") {
            found.push(dir.join(name));
        }
    }
    Ok(found)
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let s = Settings::load(a.common.config.as_deref())?;
    setup_threads(&a.common, &s)?;
    let convention: RecallConvention = s.pick(
        "recall-convention",
        a.recall_convention.as_deref().map(str::parse).transpose()?,
        RecallConvention::default(),
    )?;
    let methods = parse_methods(&s.pick("method", a.method.clone(), "all".to_string())?)?;
    let out = s.pick("out", a.common.out.clone(), PathBuf::from(DEFAULT_OUT))?;
    let files = if a.ranked.is_empty() {
        let dir = s.pick("input", a.input.clone(), out.clone())?;
        discover(&dir, &methods)?
    } else {
        a.ranked.clone()
    };
    if files.is_empty() {
        return Err(Error::InvalidParameter(
            "no ranked lists to evaluate".into(),
        ));
    }
    let sources: Vec<Source> = files.into_iter().map(Source::read).collect::<Result<_>>()?;
    let input = resolve_input(&a.common, &s, Some(&sources[0].echo))?;
    for src in &sources {
        if let Some(y) = src.echo.get("years") {
            if y != input.spec.to_string() {
                return Err(Error::InvalidParameter(format!(
                    "{} was scored on split {y}, evaluating on {}",
                    src.path.display(),
                    input.spec
                )));
            }
        }
    }
    let corpus = Corpus::ingest(&input.corpus_path)?;
    let exp = Experiment::prepare(corpus, input.spec)?;
    let m = exp.snapshot.groups().len();

    let mut by_method: BTreeMap<Method, (EvalLists, Vec<String>)> = BTreeMap::new();
    for src in &sources {
        let method: Method = src.field("method")?.parse()?;
        let process: Process = src.field("process")?.parse()?;
        let path = src.path.display().to_string();
        let (lists, names) = by_method.entry(method).or_default();
        names.push(
            src.path
                .file_name()
                .map(|f| f.to_string_lossy().to_string())
                .unwrap_or(path.clone()),
        );
        match src.field("list")? {
            "global" => {
                let n_top = src.number("n_top")?;
                let loaded = pipeline::parse_ranked(&exp, &src.text, &path)?;
                let slot = match process {
                    Process::Incremental => &mut lists.global_ia,
                    Process::Subgroup => &mut lists.global_sa,
                };
                *slot = Some((loaded.keys, n_top));
            }
            "pergroup" => {
                let k = src.number("n_top_group")?;
                let groups = src.number("groups")?;
                if groups != m {
                    return Err(Error::InvalidParameter(format!(
                        "{path} covers {groups} training groups, the split has {m}"
                    )));
                }
                let loaded = pipeline::parse_per_group(&exp, &src.text, &path)?;
                let slot = match process {
                    Process::Incremental => &mut lists.per_group_ia,
                    Process::Subgroup => &mut lists.per_group_sa,
                };
                let (all, cutoff) = slot.get_or_insert_with(|| (vec![Vec::new(); m], k));
                if *cutoff != k {
                    return Err(Error::InvalidParameter(format!(
                        "{path}: shards disagree on n_top_group"
                    )));
                }
                for (g, keys) in loaded.rows {
                    all[g] = keys;
                }
            }
            other => {
                return Err(Error::Parse {
                    path,
                    line: 1,
                    msg: format!("unknown list kind {other:?}"),
                })
            }
        }
    }

    create_dir(&out)?;
    for (method, (lists, names)) in by_method {
        let report = evaluate_lists(&exp, &lists, convention)?;
        let mut echo = base_echo("evaluate", &input);
        echo.push("method", method.name());
        echo.push("recall_convention", recall_label(convention));
        if let Some((_, n)) = &lists.global_ia.as_ref().or(lists.global_sa.as_ref()) {
            echo.push("n_top", n);
        }
        if let Some((_, n)) = &lists.per_group_ia.as_ref().or(lists.per_group_sa.as_ref()) {
            echo.push("n_top_group", n);
        }
        echo.push("sources", names.join(","));
        let text = format!("{}{}", echo.render(), report.to_key_values());
        let path = out.join(format!("{}.report.txt", method.name()));
        pipeline::write_text(&path, &text)?;
        println!("[{}] {}", method.name(), path.display());
        print!("{}", report.to_key_values());
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let s = Settings::load(a.common.config.as_deref())?;
    setup_threads(&a.common, &s)?;
    let input = resolve_input(&a.common, &s, None)?;
    let r = resolve_params(&a.params, &s)?;
    let corpus = Corpus::ingest(&input.corpus_path)?;
    let exp = Experiment::prepare(corpus, input.spec)?;
    let params = VerifyParams {
        katz: r.katz,
        birw: r.birw,
        glps: r.glps,
        glps_group: r.glps_group,
        pass: PassConfig {
            ia: true,
            sa: true,
            per_group: true,
            ..r.pass
        },
    };
    let checks = verify::run_checks(&exp, &params, a.mutate)?;
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    println!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY })
}
