// SPDX-License-Identifier: Apache-2.0

//! Cross-checks of every scorer and the evaluation path against the
//! brute-force oracles, for inputs small enough to enumerate.

#![allow(clippy::needless_range_loop)]

use crate::birw::{self, BirwParams, PriorNormalization};
use crate::candidates::{enumerate_ia, enumerate_sa, RecallConvention};
use crate::error::{Error, Result};
use crate::gks::{compute_katz, GksScorer, KatzParams};
use crate::glps::{build_propagation_operator, residual_inf, GlpsParams, GlpsSolver, SolverKind};
use crate::oracles::{
    adjacency_oracle, birw_oracle, dense_solve_oracle, katz_oracle, metric_oracle, theta_oracle,
    MetricOracleInput, WALK_MAX_LENGTH, WALK_MAX_VERTICES,
};
use crate::pipeline::{
    evaluate_lists, run_pass, BrwsScorer, EvalLists, Experiment, GroupScorer, Method, PassConfig,
};
use crate::scores::GroupActorScores;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyParams {
    pub katz: KatzParams,
    pub birw: BirwParams,
    pub glps: GlpsParams,
    pub glps_group: GlpsParams,
    pub pass: PassConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, failures: Vec<String>, compared: usize) -> Self {
        Self {
            name: name.to_string(),
            passed: failures.is_empty(),
            detail: match failures.first() {
                None => format!("{compared} values agree"),
                Some(f) => format!("{} of {compared} values differ; first: {f}", failures.len()),
            },
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Refuses snapshots beyond the walk-enumeration limits.
pub fn check_size(exp: &Experiment, params: &VerifyParams) -> Result<()> {
    let n = exp.snapshot.n();
    if n == 0 || exp.snapshot.groups().is_empty() {
        return Err(Error::TooLarge(
            "nothing to verify: the training period is empty".into(),
        ));
    }
    if n > WALK_MAX_VERTICES {
        return Err(Error::TooLarge(format!(
            "verification needs at most {WALK_MAX_VERTICES} training actors (got {n}) and walk length at most {WALK_MAX_LENGTH}"
        )));
    }
    if params.katz.max_length > WALK_MAX_LENGTH {
        return Err(Error::TooLarge(format!(
            "verification needs walk length at most {WALK_MAX_LENGTH} (got {})",
            params.katz.max_length
        )));
    }
    Ok(())
}

/// Runs all checks. With `mutate`, every scorer output is shifted before
/// comparison, which the checks must catch.
pub fn run_checks(exp: &Experiment, params: &VerifyParams, mutate: bool) -> Result<Vec<Check>> {
    check_size(exp, params)?;
    let snap = &exp.snapshot;
    let n = snap.n();
    let groups: Vec<Vec<usize>> = snap.groups().iter().map(|g| g.members().to_vec()).collect();
    let shift = |x: f64| if mutate { x + 1e-3 } else { x };
    let mut checks = Vec::new();

    // network
    let adj = adjacency_oracle(&groups, n);
    let dense = snap.adjacency().to_dense();
    let mut fails = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let want = if adj[i][j] { 1.0 } else { 0.0 };
            if dense[i][j] != want {
                fails.push(format!("A({i},{j}) = {} expected {want}", dense[i][j]));
            }
        }
        let d = groups.iter().filter(|g| g.contains(&i)).count() as f64;
        if snap.vertex_degree()[i] != d {
            fails.push(format!("d({i}) = {} expected {d}", snap.vertex_degree()[i]));
        }
    }
    checks.push(Check::new("adjacency", fails, n * n + n));

    // Katz and GKS
    let katz = compute_katz(snap, &params.katz)?;
    let k_ref = katz_oracle(&adj, params.katz.beta, params.katz.max_length)?;
    let mut fails = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let got = shift(katz.k.get(i, j));
            if !close(got, k_ref[i][j], 1e-12) {
                fails.push(format!("K({i},{j}) = {got} expected {}", k_ref[i][j]));
            }
        }
    }
    checks.push(Check::new("katz", fails, n * n));

    let gks = GksScorer::new(snap, params.katz)?;
    let mut fails = Vec::new();
    let mut compared = 0;
    for (gi, g) in groups.iter().enumerate() {
        let s = gks.score(snap, &snap.groups()[gi])?.map_scores(shift);
        for j in (0..n).filter(|j| !g.contains(j)) {
            let want = g.iter().map(|&p| k_ref[p][j]).sum::<f64>() / g.len() as f64;
            compared += 1;
            match s.get(j) {
                Some(got) if close(got, want, 1e-12) => {}
                got => fails.push(format!("group {gi}, actor {j}: {got:?} expected {want}")),
            }
        }
    }
    checks.push(Check::new("gks", fails, compared));

    // BRWS, with the oracle's grand-total prior
    let bp = BirwParams {
        normalization: PriorNormalization::GrandTotal,
        ..params.birw
    };
    let mut fails = Vec::new();
    let mut compared = 0;
    for (gi, g) in groups.iter().enumerate() {
        let outside: Vec<usize> = (0..n).filter(|j| !g.contains(j)).collect();
        if outside.is_empty() {
            continue;
        }
        let c = g.len();
        let bit = |b: bool| if b { 1.0 } else { 0.0 };
        let clique: Vec<Vec<f64>> = (0..c)
            .map(|p| (0..c).map(|q| bit(p != q)).collect())
            .collect();
        let outer: Vec<Vec<f64>> = outside
            .iter()
            .map(|&u| outside.iter().map(|&v| bit(adj[u][v])).collect())
            .collect();
        let inter: Vec<Vec<f64>> = g
            .iter()
            .map(|&p| outside.iter().map(|&v| bit(adj[p][v])).collect())
            .collect();
        let r = birw_oracle(&clique, &outer, &inter, bp.alpha, bp.l_group, bp.l_outer);
        let s = birw::score_group(snap, &snap.groups()[gi], &bp)?.map_scores(shift);
        for (q, &j) in outside.iter().enumerate() {
            let want = r.iter().map(|row| row[q]).sum::<f64>() / c as f64;
            compared += 1;
            match s.get(j) {
                Some(got) if close(got, want, 1e-12) => {}
                got => fails.push(format!("group {gi}, actor {j}: {got:?} expected {want}")),
            }
        }
    }
    checks.push(Check::new("brws", fails, compared));

    // GLPS
    let op = build_propagation_operator(snap);
    let t_ref = theta_oracle(&groups, n);
    let mut fails = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let got = shift(op.theta.get(i, j));
            if !close(got, t_ref[i][j], 1e-12) {
                fails.push(format!("theta({i},{j}) = {got} expected {}", t_ref[i][j]));
            }
        }
    }
    checks.push(Check::new("theta", fails, n * n));

    let mut fails = Vec::new();
    let mut compared = 0;
    for base in [params.glps, params.glps_group] {
        for solver in [SolverKind::ClosedForm, SolverKind::Iterative] {
            let p = GlpsParams { solver, ..base };
            let alpha = p.alpha();
            let gs = GlpsSolver::new(&op, p)?;
            for (gi, g) in groups.iter().enumerate() {
                let mut y = vec![0.0; n];
                for &a in g {
                    y[a] = 1.0;
                }
                let want = dense_solve_oracle(&t_ref, &y, alpha)?;
                let prop = gs.propagate(&snap.groups()[gi])?;
                let tol = match solver {
                    SolverKind::Iterative => p.tol / (1.0 - alpha),
                    _ => 1e-10,
                };
                if !prop.converged {
                    fails.push(format!(
                        "mu {}, group {gi}: iteration did not converge",
                        p.mu
                    ));
                }
                let res = residual_inf(&op.theta, &prop.labels.0, &y, alpha);
                if res > 10.0 * p.tol {
                    fails.push(format!(
                        "mu {}, {solver:?}, group {gi}: residual {res:e}",
                        p.mu
                    ));
                }
                for j in 0..n {
                    let got = shift(prop.labels.0[j]);
                    compared += 1;
                    if (got - want[j]).abs() > tol {
                        fails.push(format!(
                            "mu {}, {solver:?}, group {gi}, actor {j}: {got} expected {}",
                            p.mu, want[j]
                        ));
                    }
                }
            }
        }
    }
    checks.push(Check::new("glps", fails, compared));

    // candidate counts
    let mut fails = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        let s = gks.score(snap, &snap.groups()[gi])?;
        let c = g.len();
        let ia = enumerate_ia(snap, gi, &s).len();
        if ia != n - c {
            fails.push(format!(
                "group {gi}: {ia} IA candidates, expected {}",
                n - c
            ));
        }
        let sa = enumerate_sa(snap, gi, &s, params.pass.sa_cap).map_or(0, |v| v.len());
        let want = if c <= params.pass.sa_cap {
            ((1usize << c) - 2) * (n - c)
        } else {
            0
        };
        if sa != want {
            fails.push(format!("group {gi}: {sa} SA candidates, expected {want}"));
        }
    }
    checks.push(Check::new("candidates", fails, 2 * groups.len()));

    // evaluation, for each scorer
    let glps_solver = GlpsSolver::new(&op, params.glps)?;
    let brws = BrwsScorer(params.birw);
    for method in Method::ALL {
        let scorer: &dyn GroupScorer = match method {
            Method::Gks => &gks,
            Method::Brws => &brws,
            Method::Glps => &glps_solver,
        };
        let out = run_pass(snap, scorer, None, &params.pass)?;
        let report = evaluate_lists(
            exp,
            &EvalLists::from_pass(&out, params.pass.n_top_group),
            RecallConvention::ZeroContribution,
        )?;
        let dense: Vec<Vec<f64>> = (0..groups.len())
            .map(|gi| {
                let s: GroupActorScores = scorer.score(snap, gi)?;
                Ok((0..n).map(|j| s.get(j).unwrap_or(0.0)).collect())
            })
            .collect::<Result<_>>()?;
        let test: Vec<Vec<usize>> = exp
            .test_local
            .iter()
            .map(|t| t.members().to_vec())
            .collect();
        let want = metric_oracle(&MetricOracleInput {
            n,
            train: &groups,
            test: &test,
            scores: &dense,
            n_top: params.pass.n_top,
            n_top_group: params.pass.n_top_group,
            sa_cap: params.pass.sa_cap,
        });
        let mut fails = Vec::new();
        for (k, (got, want)) in crate::candidates::REPORT_KEYS
            .iter()
            .zip(report.values().into_iter().zip(want))
        {
            let ok = match (got, want) {
                (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
                (None, None) => true,
                _ => false,
            };
            if !ok {
                fails.push(format!("{k} = {got:?} expected {want:?}"));
            }
        }
        checks.push(Check::new(&format!("metrics-{}", method.name()), fails, 8));
    }
    Ok(checks)
}
