// SPDX-License-Identifier: Apache-2.0

//! Group label propagation score.
//!
//! Members of a group start with label 1, everyone else with 0, and labels
//! diffuse over the hypergraph of groups. With the propagation operator
//! `θ = D_v^{-1/2} H W D_e^{-1} Hᵀ D_v^{-1/2}` (unit hyperedge weights, so
//! `W = I`) the normalized hypergraph Laplacian is `L_h = I − θ`, and the
//! regularized labels solve
//!
//! ```text
//! (I − αθ) f = (1 − α) y,    α = 1 / (1 + μ).
//! ```
//!
//! `θ` is block diagonal over the connected components of the hypergraph, so
//! every solve runs only on the components that contain a labelled vertex.

use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{GroupKey, NetworkSnapshot};
use crate::scores::GroupActorScores;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Closed form up to [`GlpsParams::CLOSED_FORM_LIMIT`] actors, iterative above.
    #[default]
    Auto,
    ClosedForm,
    Iterative,
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "closed-form" => Ok(Self::ClosedForm),
            "iterative" => Ok(Self::Iterative),
            _ => Err(Error::InvalidParameter(format!("unknown solver {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlpsParams {
    pub mu: f64,
    pub solver: SolverKind,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GlpsParams {
    fn default() -> Self {
        Self {
            mu: 0.1,
            solver: SolverKind::Auto,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

impl GlpsParams {
    pub const CLOSED_FORM_LIMIT: usize = 5000;
    /// Default `mu` for per-group lists; [`Default`] holds the global one.
    pub const PER_GROUP_MU: f64 = 0.5;

    pub fn alpha(&self) -> f64 {
        1.0 / (1.0 + self.mu)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOperator {
    pub theta: SparseMatrix,
    components: Vec<Vec<usize>>,
    component_of: Vec<usize>,
}

impl PropagationOperator {
    pub fn n(&self) -> usize {
        self.theta.rows()
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }
}

/// Assembles `θ`. Vertices in no group get zero rows and columns.
pub fn build_propagation_operator(snapshot: &NetworkSnapshot) -> PropagationOperator {
    let n = snapshot.n();
    let inv_sqrt: Vec<f64> = snapshot
        .vertex_degree()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut triplets = Vec::new();
    for (g, delta) in snapshot.groups().iter().zip(snapshot.edge_degree()) {
        for &u in g.members() {
            for &v in g.members() {
                triplets.push((u, v, (inv_sqrt[u] * inv_sqrt[v]) / delta));
            }
        }
    }
    let theta = SparseMatrix::from_triplets(n, n, triplets).expect("members are in range");

    let mut component_of = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if component_of[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        component_of[start] = id;
        let mut head = 0;
        while head < members.len() {
            let v = members[head];
            head += 1;
            for &u in theta.row(v).0 {
                if component_of[u] == usize::MAX {
                    component_of[u] = id;
                    members.push(u);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    PropagationOperator {
        theta,
        components,
        component_of,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub labels: LabelVector,
    /// False when the iterative solver stopped at `max_iter`.
    pub converged: bool,
    /// Largest iteration count over the solved components (0 for closed form).
    pub iterations: usize,
}

struct Block {
    theta: SparseMatrix,
    lu: OnceLock<Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>>,
}

/// Reusable solver over one operator; per-component factorizations are
/// computed on first use and shared afterwards.
pub struct GlpsSolver<'a> {
    op: &'a PropagationOperator,
    params: GlpsParams,
    blocks: Vec<OnceLock<Block>>,
}

impl<'a> GlpsSolver<'a> {
    pub fn new(op: &'a PropagationOperator, params: GlpsParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            op,
            params,
            blocks: (0..op.components.len()).map(|_| OnceLock::new()).collect(),
        })
    }

    fn use_closed_form(&self) -> bool {
        match self.params.solver {
            SolverKind::ClosedForm => true,
            SolverKind::Iterative => false,
            SolverKind::Auto => self.op.n() <= GlpsParams::CLOSED_FORM_LIMIT,
        }
    }

    fn block(&self, comp: usize) -> &Block {
        self.blocks[comp].get_or_init(|| {
            let verts = &self.op.components[comp];
            Block {
                theta: self.op.theta.select(verts, verts),
                lu: OnceLock::new(),
            }
        })
    }

    /// Solves for an arbitrary non-negative label vector.
    pub fn propagate_labels(&self, y: &[f64]) -> Result<Propagation> {
        if y.len() != self.op.n() {
            return Err(Error::Dimension(format!(
                "label vector has {} entries, operator has {}",
                y.len(),
                self.op.n()
            )));
        }
        let mut comps: Vec<usize> = y
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| self.op.component_of[i])
            .collect();
        comps.sort_unstable();
        comps.dedup();

        let alpha = self.params.alpha();
        let mut f = vec![0.0; y.len()];
        let mut converged = true;
        let mut iterations = 0;
        for comp in comps {
            let verts = &self.op.components[comp];
            let block = self.block(comp);
            let rhs: Vec<f64> = verts.iter().map(|&v| y[v]).collect();
            let local = if self.use_closed_form() {
                let lu = block.lu.get_or_init(|| {
                    let k = verts.len();
                    let mut m = DMatrix::<f64>::identity(k, k);
                    for (r, c, v) in block.theta.triplets() {
                        m[(r, c)] -= alpha * v;
                    }
                    Some(m.lu())
                });
                let lu = lu.as_ref().ok_or(Error::Singular)?;
                let b = DVector::from_iterator(rhs.len(), rhs.iter().map(|v| (1.0 - alpha) * v));
                let x = lu.solve(&b).ok_or(Error::Singular)?;
                x.iter().copied().collect::<Vec<f64>>()
            } else {
                let (x, ok, it) = iterate(
                    &block.theta,
                    &rhs,
                    alpha,
                    self.params.tol,
                    self.params.max_iter,
                );
                converged &= ok;
                iterations = iterations.max(it);
                x
            };
            for (&v, x) in verts.iter().zip(local) {
                f[v] = x;
            }
        }
        Ok(Propagation {
            labels: LabelVector(f),
            converged,
            iterations,
        })
    }

    pub fn propagate(&self, group: &GroupKey) -> Result<Propagation> {
        let n = self.op.n();
        if let Some(&bad) = group.members().iter().find(|&&a| a >= n) {
            return Err(Error::UnknownActor { actor: bad, n });
        }
        let mut y = vec![0.0; n];
        for &a in group.members() {
            y[a] = 1.0;
        }
        self.propagate_labels(&y)
    }

    pub fn score(&self, group: &GroupKey) -> Result<(GroupActorScores, Propagation)> {
        let p = self.propagate(group)?;
        Ok((score_group_glps(&p.labels, group), p))
    }
}

/// `f ← αθf + (1−α)y` from `f = y` until the max-norm step is at most `tol`.
fn iterate(
    theta: &SparseMatrix,
    y: &[f64],
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, bool, usize) {
    let mut f = y.to_vec();
    for it in 1..=max_iter {
        let tf = theta.mul_vec(&f);
        let mut step: f64 = 0.0;
        for ((fi, t), yi) in f.iter_mut().zip(tf).zip(y) {
            let next = alpha * t + (1.0 - alpha) * yi;
            step = step.max((next - *fi).abs());
            *fi = next;
        }
        if step <= tol {
            return (f, true, it);
        }
    }
    (f, false, max_iter)
}

pub fn propagate(
    op: &PropagationOperator,
    group: &GroupKey,
    params: &GlpsParams,
) -> Result<Propagation> {
    GlpsSolver::new(op, *params)?.propagate(group)
}

/// `S(i,j) = f*(j)` for every actor outside the group.
pub fn score_group_glps(f: &LabelVector, group: &GroupKey) -> GroupActorScores {
    GroupActorScores::from_dense(group, f.0.clone())
}

/// `‖(I − αθ)f − (1−α)y‖∞`.
pub fn residual_inf(theta: &SparseMatrix, f: &[f64], y: &[f64], alpha: f64) -> f64 {
    let tf = theta.mul_vec(f);
    f.iter()
        .zip(tf)
        .zip(y)
        .map(|((fi, t), yi)| (fi - alpha * t - (1.0 - alpha) * yi).abs())
        .fold(0.0, f64::max)
}

/// Power-iteration estimate of the spectral radius of a symmetric
/// non-negative matrix, started from the all-ones vector.
pub fn spectral_radius_estimate(m: &SparseMatrix, iters: usize) -> f64 {
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut estimate = 0.0;
    for _ in 0..iters {
        let y = m.mul_vec(&x);
        let ny = norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        estimate = ny;
        x = y.into_iter().map(|v| v / ny).collect();
    }
    estimate
}
