// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference implementations.
//!
//! Everything here works on plain nested `Vec`s and re-derives each quantity
//! from its definition with naive loops. Nothing calls into the sparse
//! kernels, the scorers or the ranking code, so agreement with those paths
//! is independent evidence. Only small inputs are accepted.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

pub const WALK_MAX_VERTICES: usize = 12;
pub const WALK_MAX_LENGTH: usize = 6;
pub const SOLVE_MAX_VERTICES: usize = 200;

/// Number of walks of exactly `length` edges from `i` to `j`, by DFS.
pub fn walk_count_oracle(adj: &[Vec<bool>], i: usize, j: usize, length: usize) -> Result<u64> {
    let n = adj.len();
    if n > WALK_MAX_VERTICES || length > WALK_MAX_LENGTH {
        return Err(Error::TooLarge(format!(
            "walk counting needs <= {WALK_MAX_VERTICES} vertices and length <= {WALK_MAX_LENGTH} \
             (got {n} vertices, length {length})"
        )));
    }
    fn dfs(adj: &[Vec<bool>], at: usize, target: usize, left: usize) -> u64 {
        if left == 0 {
            return u64::from(at == target);
        }
        let mut total = 0;
        for next in 0..adj.len() {
            if adj[at][next] {
                total += dfs(adj, next, target, left - 1);
            }
        }
        total
    }
    Ok(dfs(adj, i, j, length))
}

/// `Σ_{l=1..max_length} βˡ · walks_l(i, j)` for every pair.
pub fn katz_oracle(adj: &[Vec<bool>], beta: f64, max_length: usize) -> Result<Vec<Vec<f64>>> {
    let n = adj.len();
    let mut k = vec![vec![0.0; n]; n];
    for (i, row) in k.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            for l in 1..=max_length {
                *cell += beta.powi(l as i32) * walk_count_oracle(adj, i, j, l)? as f64;
            }
        }
    }
    Ok(k)
}

/// Clique-expansion adjacency straight from group lists.
pub fn adjacency_oracle(groups: &[Vec<usize>], n: usize) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for p in 0..n {
        for q in 0..n {
            if p != q {
                adj[p][q] = groups.iter().any(|g| g.contains(&p) && g.contains(&q));
            }
        }
    }
    adj
}

/// `θ(u,v) = Σ_{g ∋ u,v} 1 / (δ(g) √(d(u) d(v)))` with unit weights.
pub fn theta_oracle(groups: &[Vec<usize>], n: usize) -> Vec<Vec<f64>> {
    let degree: Vec<f64> = (0..n)
        .map(|v| groups.iter().filter(|g| g.contains(&v)).count() as f64)
        .collect();
    let mut theta = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in 0..n {
            if degree[u] == 0.0 || degree[v] == 0.0 {
                continue;
            }
            for g in groups {
                if g.contains(&u) && g.contains(&v) {
                    theta[u][v] += 1.0 / (g.len() as f64 * (degree[u] * degree[v]).sqrt());
                }
            }
        }
    }
    theta
}

/// Gaussian elimination with partial pivoting on `(I − αθ) f = (1 − α) y`.
pub fn dense_solve_oracle(theta: &[Vec<f64>], y: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let n = theta.len();
    if n > SOLVE_MAX_VERTICES {
        return Err(Error::TooLarge(format!(
            "dense solve needs <= {SOLVE_MAX_VERTICES} vertices (got {n})"
        )));
    }
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "rhs has {} entries, system has {n}",
            y.len()
        )));
    }
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n)
                .map(|j| if i == j { 1.0 } else { 0.0 } - alpha * theta[i][j])
                .collect();
            row.push((1.0 - alpha) * y[i]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::Singular);
        }
        m.swap(col, pivot);
        for r in col + 1..n {
            let factor = m[r][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..=n {
                m[r][c] -= factor * m[col][c];
            }
        }
    }
    let mut f = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = m[r][n];
        for c in r + 1..n {
            acc -= m[r][c] * f[c];
        }
        f[r] = acc / m[r][r];
    }
    Ok(f)
}

/// Literal dense execution of the sequential bi-random walk with the
/// grand-total prior normalization.
pub fn birw_oracle(
    clique: &[Vec<f64>],
    outer: &[Vec<f64>],
    inter: &[Vec<f64>],
    alpha: f64,
    l_group: usize,
    l_outer: usize,
) -> Vec<Vec<f64>> {
    let c = clique.len();
    let m = outer.len();
    let total: f64 = inter.iter().flatten().sum();
    if total == 0.0 {
        return vec![vec![0.0; m]; c];
    }
    let matmul = |a: &[Vec<f64>], b: &[Vec<f64>], rows: usize, inner: usize, cols: usize| {
        let mut out = vec![vec![0.0; cols]; rows];
        for i in 0..rows {
            for j in 0..cols {
                for k in 0..inner {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    };
    let mut r: Vec<Vec<f64>> = inter
        .iter()
        .map(|row| row.iter().map(|v| v / total).collect())
        .collect();
    for t in 1..=l_group.max(l_outer) {
        let mut group_step = r.clone();
        if t <= l_group {
            group_step = matmul(clique, &r, c, c, m);
            for i in 0..c {
                for j in 0..m {
                    group_step[i][j] = alpha * group_step[i][j] + (1.0 - alpha) * inter[i][j];
                }
            }
        }
        r = group_step.clone();
        if t <= l_outer {
            r = matmul(&group_step, outer, c, m, m);
            for i in 0..c {
                for j in 0..m {
                    r[i][j] = alpha * r[i][j] + (1.0 - alpha) * inter[i][j];
                }
            }
        }
    }
    r
}

fn same_set(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && a.iter().all(|x| b.contains(x)) && b.iter().all(|x| a.contains(x))
}

/// Indices of candidates whose member set equals some test group, by a full
/// pairwise scan.
pub fn exhaustive_match_oracle(candidates: &[Vec<usize>], test: &[Vec<usize>]) -> Vec<usize> {
    let mut hits = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let mut found = false;
        for t in test {
            if same_set(c, t) {
                found = true;
            }
        }
        if found {
            hits.push(i);
        }
    }
    hits
}

/// Inputs for [`metric_oracle`]: groups as plain member lists, and for every
/// training group a dense score per actor (members' entries are ignored).
pub struct MetricOracleInput<'a> {
    pub n: usize,
    pub train: &'a [Vec<usize>],
    pub test: &'a [Vec<usize>],
    pub scores: &'a [Vec<f64>],
    pub n_top: usize,
    pub n_top_group: usize,
    pub sa_cap: usize,
}

/// The eight metric values, in report key order. `None` marks an absent value.
pub type MetricValues = [Option<f64>; 8];

struct Cand {
    score: f64,
    key: Vec<usize>,
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    // insertion sort keeps this file free of library sorting assumptions
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            j -= 1;
        }
    }
    v
}

fn ranks_before(a: &Cand, b: &Cand) -> bool {
    a.score > b.score || (a.score == b.score && a.key < b.key)
}

fn insertion_rank(mut v: Vec<Cand>) -> Vec<Cand> {
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && ranks_before(&v[j], &v[j - 1]) {
            v.swap(j - 1, j);
            j -= 1;
        }
    }
    v
}

fn all_candidates(input: &MetricOracleInput<'_>, gi: usize, subgroups: bool) -> Vec<Cand> {
    let g = &input.train[gi];
    let mut out = Vec::new();
    for a in 0..input.n {
        if g.contains(&a) {
            continue;
        }
        if !subgroups {
            let mut key = g.clone();
            key.push(a);
            out.push(Cand {
                score: input.scores[gi][a],
                key: sorted(key),
            });
            continue;
        }
        let c = g.len();
        if c < 2 || c > input.sa_cap {
            continue;
        }
        for mask in 1u64..(1u64 << c) - 1 {
            let mut key: Vec<usize> = (0..c)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| g[i])
                .collect();
            key.push(a);
            out.push(Cand {
                score: input.scores[gi][a],
                key: sorted(key),
            });
        }
    }
    out
}

fn seen_in_training(input: &MetricOracleInput<'_>, t: &[usize]) -> bool {
    t.iter().all(|a| input.train.iter().any(|g| g.contains(a)))
}

/// Whether `t` arises from training group `g` by absorbing one outside actor,
/// either with all of `g` or with a proper non-empty part of it.
fn generated_by(g: &[usize], t: &[usize], subgroups: bool) -> bool {
    let outside: Vec<usize> = t.iter().copied().filter(|a| !g.contains(a)).collect();
    let inside = t.len() - outside.len();
    if outside.len() != 1 || inside == 0 {
        return false;
    }
    if subgroups {
        inside < g.len()
    } else {
        inside == g.len()
    }
}

/// All eight global and per-group metrics by exhaustive enumeration:
/// every candidate is materialized, duplicates are collapsed to their
/// maximum with a quadratic scan, lists are insertion-sorted and matched
/// against the test set pairwise. Per-group recall uses the zero-contribution
/// convention.
pub fn metric_oracle(input: &MetricOracleInput<'_>) -> MetricValues {
    let mut out = [None; 8];
    for (slot, subgroups) in [(0usize, false), (1, true)] {
        // global
        let mut pool: Vec<Cand> = Vec::new();
        for gi in 0..input.train.len() {
            for cand in all_candidates(input, gi, subgroups) {
                match pool.iter_mut().find(|p| p.key == cand.key) {
                    Some(p) => {
                        if cand.score > p.score {
                            p.score = cand.score;
                        }
                    }
                    None => pool.push(cand),
                }
            }
        }
        let ranked = insertion_rank(pool);
        let top: Vec<Vec<usize>> = ranked
            .into_iter()
            .take(input.n_top)
            .map(|c| c.key)
            .collect();
        let hits = exhaustive_match_oracle(&top, input.test).len() as f64;
        let actual = input
            .test
            .iter()
            .filter(|t| seen_in_training(input, t))
            .filter(|t| input.train.iter().any(|g| generated_by(g, t, subgroups)))
            .count();
        out[slot * 2] = Some(if input.n_top == 0 {
            0.0
        } else {
            hits / input.n_top as f64
        });
        out[slot * 2 + 1] = (actual > 0).then(|| hits / actual as f64);

        // per group
        let m = input.train.len();
        let mut precision_sum = 0.0;
        let mut recall_sum = 0.0;
        for gi in 0..m {
            let ranked = insertion_rank(all_candidates(input, gi, subgroups));
            let top: Vec<Vec<usize>> = ranked
                .into_iter()
                .take(input.n_top_group)
                .map(|c| c.key)
                .collect();
            let hits = exhaustive_match_oracle(&top, input.test).len() as f64;
            let actual = input
                .test
                .iter()
                .filter(|t| seen_in_training(input, t))
                .filter(|t| generated_by(&input.train[gi], t, subgroups))
                .count();
            if input.n_top_group > 0 {
                precision_sum += hits / input.n_top_group as f64;
            }
            if actual > 0 {
                recall_sum += hits / actual as f64;
            }
        }
        out[4 + slot * 2] = (m > 0).then(|| precision_sum / m as f64);
        out[4 + slot * 2 + 1] = (m > 0).then(|| recall_sum / m as f64);
    }
    out
}
