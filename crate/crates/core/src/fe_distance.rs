//! Free-energy dissimilarities between nodes, with shortest-path and
//! commute-time distances as the two limiting references.
//!
//! The directed dissimilarity `phi[s][t]` is computed by the fixed-point
//! recurrence over absorbing paths:
//!
//! ```text
//! phi[s][t](k+1) = x* - (1/eta) * ln sum_{i in N(s)} P[s][i] * exp(-eta * (x_i - x*))
//! x_i = C[s][i] + phi[i][t](k),   x* = min_i x_i,   phi[t][t] = 0
//! ```
//!
//! started from `phi = +inf` off the target. After `k` steps `phi` accounts for
//! all absorbing paths of length at most `k`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ndarray::{Array1, Array2};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::graph::{cost_matrix, transition_matrix, Graph};
use crate::linalg;
use crate::rng;

/// How many recurrence steps to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    /// Exactly `L` steps: only paths of length at most `L` contribute.
    Steps(usize),
    /// Until the largest change of any finite entry drops below the tolerance.
    UntilConvergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeParams {
    pub eta: f64,
    pub horizon: Horizon,
    pub convergence_tol: f64,
    /// Terms with `eta * (x_i - x*)` above this value are left out of the sum.
    pub drop_threshold: f64,
    /// Iteration cap for [`Horizon::UntilConvergence`]; the effective cap is at
    /// least `10 * n`.
    pub max_iterations: usize,
}

impl FeParams {
    pub const DEFAULT_DROP_THRESHOLD: f64 = 7.0;
    pub const DEFAULT_TOL: f64 = 1e-9;
    pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

    pub fn new(eta: f64) -> Self {
        FeParams {
            eta,
            horizon: Horizon::UntilConvergence,
            convergence_tol: Self::DEFAULT_TOL,
            drop_threshold: Self::DEFAULT_DROP_THRESHOLD,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_drop_threshold(mut self, threshold: f64) -> Self {
        self.drop_threshold = threshold;
        self
    }

    /// No term dropping: the recurrence is evaluated exactly.
    pub fn exact(self) -> Self {
        self.with_drop_threshold(f64::INFINITY)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.convergence_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return validation(format!("eta must be positive and finite, got {}", self.eta));
        }
        if !(self.convergence_tol > 0.0) {
            return validation("convergence tolerance must be positive");
        }
        if !(self.drop_threshold > 0.0) {
            return validation("drop threshold must be positive");
        }
        if let Horizon::Steps(0) = self.horizon {
            return validation("horizon must be at least one step");
        }
        Ok(())
    }
}

/// Dissimilarities from every node (rows) to a set of target nodes (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    pub values: Array2<f64>,
    /// Node index of each column.
    pub targets: Vec<usize>,
    pub symmetric: bool,
    /// Recurrence parameters, when the matrix came from the FE recurrence.
    pub params: Option<FeParams>,
    /// Recurrence steps run (largest over columns).
    pub iterations: usize,
    /// False if any column hit the iteration cap before converging.
    pub converged: bool,
}

impl DissimilarityMatrix {
    /// Wraps a square matrix whose columns are all nodes in order.
    pub fn square(values: Array2<f64>, symmetric: bool) -> Self {
        let n = values.nrows();
        DissimilarityMatrix {
            values,
            targets: (0..n).collect(),
            symmetric,
            params: None,
            iterations: 0,
            converged: true,
        }
    }

    pub fn node_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_square_over_all_nodes(&self) -> bool {
        self.targets.len() == self.values.nrows()
            && self.targets.iter().enumerate().all(|(k, &t)| k == t)
    }

    pub fn get(&self, source: usize, target_column: usize) -> f64 {
        self.values[[source, target_column]]
    }
}

// Per-node neighbor list with transition probability and cost.
struct Adjacency {
    rows: Vec<Vec<(usize, f64, f64)>>,
}

impl Adjacency {
    fn new(g: &Graph) -> Result<Self> {
        let p = transition_matrix(g)?;
        let c = cost_matrix(g);
        let rows = (0..g.node_count())
            .map(|s| {
                p.row(s)
                    .iter()
                    .zip(c.row(s))
                    .map(|(&(j, pj), &(_, cj))| (j, pj, cj))
                    .collect()
            })
            .collect();
        Ok(Adjacency { rows })
    }
}

fn check_targets(n: usize, targets: &[usize]) -> Result<()> {
    if targets.is_empty() {
        return validation("target set is empty");
    }
    let mut seen = vec![false; n];
    for &t in targets {
        if t >= n {
            return validation(format!("target {t} out of range for {n} nodes"));
        }
        if std::mem::replace(&mut seen[t], true) {
            return validation(format!("target {t} listed twice"));
        }
    }
    Ok(())
}

struct Column {
    values: Vec<f64>,
    iterations: usize,
    converged: bool,
}

type UpdateFn = fn(&[(usize, f64, f64)], &[f64], f64, f64) -> f64;

/// One recurrence step for a single source using the log-sum-exp form.
fn lse_update(row: &[(usize, f64, f64)], phi: &[f64], eta: f64, threshold: f64) -> f64 {
    let mut x_min = f64::INFINITY;
    for &(i, _, c) in row {
        let x = c + phi[i];
        if x < x_min {
            x_min = x;
        }
    }
    if x_min == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    for &(i, p, c) in row {
        let x = c + phi[i];
        if x == f64::INFINITY {
            continue;
        }
        let gap = eta * (x - x_min);
        if gap > threshold {
            continue;
        }
        sum += p * (-gap).exp();
    }
    x_min - sum.ln() / eta
}

/// One recurrence step evaluated literally, without shifting by the minimum.
fn naive_update(row: &[(usize, f64, f64)], phi: &[f64], eta: f64, _threshold: f64) -> f64 {
    let sum: f64 = row.iter().map(|&(i, p, c)| p * (-eta * (c + phi[i])).exp()).sum();
    -sum.ln() / eta
}

fn run_column(adj: &Adjacency, target: usize, params: &FeParams, update: UpdateFn) -> Result<Column> {
    let n = adj.rows.len();
    let mut phi = vec![f64::INFINITY; n];
    phi[target] = 0.0;
    let mut next = phi.clone();
    let (steps, until_converged) = match params.horizon {
        Horizon::Steps(l) => (l, false),
        Horizon::UntilConvergence => (params.max_iterations.max(10 * n), true),
    };

    let mut converged = !until_converged;
    let mut iterations = 0;
    for step in 1..=steps {
        let mut change: f64 = 0.0;
        for s in 0..n {
            if s == target {
                continue;
            }
            let v = update(&adj.rows[s], &phi, params.eta, params.drop_threshold);
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(Error::Numerical(format!(
                    "non-finite dissimilarity at source {s}, target {target}, step {step}"
                )));
            }
            let old = phi[s];
            if old.is_finite() {
                change = change.max((v - old).abs());
            } else if v.is_finite() {
                change = f64::INFINITY;
            }
            next[s] = v;
        }
        std::mem::swap(&mut phi, &mut next);
        iterations = step;
        if until_converged && change < params.convergence_tol {
            converged = true;
            break;
        }
    }
    Ok(Column { values: phi, iterations, converged })
}

fn assemble(n: usize, targets: &[usize], params: &FeParams, columns: Vec<Column>) -> DissimilarityMatrix {
    let mut values = Array2::from_elem((n, targets.len()), f64::INFINITY);
    let mut iterations = 0;
    let mut converged = true;
    for (k, col) in columns.into_iter().enumerate() {
        for (s, v) in col.values.into_iter().enumerate() {
            values[[s, k]] = v;
        }
        iterations = iterations.max(col.iterations);
        converged &= col.converged;
    }
    DissimilarityMatrix {
        values,
        targets: targets.to_vec(),
        symmetric: false,
        params: Some(*params),
        iterations,
        converged,
    }
}

fn directed_with(
    g: &Graph,
    params: &FeParams,
    targets: &[usize],
    update: UpdateFn,
) -> Result<DissimilarityMatrix> {
    params.validate()?;
    if !g.is_connected() {
        return validation("free-energy dissimilarities need a connected graph");
    }
    check_targets(g.node_count(), targets)?;
    let adj = Adjacency::new(g)?;
    let columns = targets
        .par_iter()
        .map(|&t| run_column(&adj, t, params, update))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(g.node_count(), targets, params, columns))
}

/// Directed FE dissimilarities from every node to each node in `targets`.
/// Columns are computed independently (in parallel) and stored in the order
/// given.
pub fn fe_directed(g: &Graph, params: &FeParams, targets: &[usize]) -> Result<DissimilarityMatrix> {
    directed_with(g, params, targets, lse_update)
}

/// Same recurrence evaluated without the log-sum-exp shift or term dropping.
/// Underflows for large `eta` or long paths; kept as a cross-check.
pub fn fe_directed_naive(g: &Graph, params: &FeParams, targets: &[usize]) -> Result<DissimilarityMatrix> {
    directed_with(g, params, targets, naive_update)
}

/// `(Phi + Phi^T) / 2` for a square matrix over all nodes.
pub fn symmetrize(phi: &DissimilarityMatrix) -> Result<DissimilarityMatrix> {
    if !phi.is_square_over_all_nodes() {
        return validation("symmetrization needs a square matrix over all nodes");
    }
    let values = (&phi.values + &phi.values.t()) / 2.0;
    Ok(DissimilarityMatrix { values, symmetric: true, ..phi.clone() })
}

/// Exact symmetric FE distance: the recurrence without term dropping, run to
/// convergence for every target, then symmetrized.
pub fn fe_distance(g: &Graph, eta: f64, tol: f64) -> Result<DissimilarityMatrix> {
    let params = FeParams::new(eta).exact().with_tolerance(tol);
    let all: Vec<usize> = (0..g.node_count()).collect();
    symmetrize(&fe_directed(g, &params, &all)?)
}

/// Uniform sample of `count` distinct target nodes, sorted ascending.
pub fn sample_targets(node_count: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 || count > node_count {
        return validation(format!("cannot sample {count} targets from {node_count} nodes"));
    }
    let mut rng = rng::seeded(seed);
    let mut targets = index::sample(&mut rng, node_count, count).into_vec();
    targets.sort_unstable();
    Ok(targets)
}

/// All-pairs shortest-path costs under `C = 1 / A`, by Dijkstra from each source.
pub fn sp_distance(g: &Graph) -> Result<DissimilarityMatrix> {
    if !g.is_connected() {
        return validation("shortest-path distances need a connected graph");
    }
    let n = g.node_count();
    let cost = cost_matrix(g);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|source| {
            let mut dist = vec![f64::INFINITY; n];
            dist[source] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((OrdF64(0.0), source)));
            while let Some(Reverse((OrdF64(d), v))) = heap.pop() {
                if d > dist[v] {
                    continue;
                }
                for &(u, c) in cost.row(v) {
                    let nd = d + c;
                    if nd < dist[u] {
                        dist[u] = nd;
                        heap.push(Reverse((OrdF64(nd), u)));
                    }
                }
            }
            dist
        })
        .collect();
    let mut values = Array2::zeros((n, n));
    for (s, row) in rows.into_iter().enumerate() {
        for (t, d) in row.into_iter().enumerate() {
            values[[s, t]] = d;
        }
    }
    Ok(DissimilarityMatrix::square(values, true))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Expected hitting times `H[s][t]`: the number of steps a random walk from `s`
/// needs to first reach `t`. Solves `H(s,t) = 1 + sum_i P[s][i] H(i,t)` per target.
pub fn hitting_times(g: &Graph) -> Result<Array2<f64>> {
    if !g.is_connected() {
        return validation("hitting times need a connected graph");
    }
    let n = g.node_count();
    let p = transition_matrix(g)?;
    let columns = (0..n)
        .into_par_iter()
        .map(|t| {
            // Unknowns are H(s,t) for s != t, indexed by skipping t.
            let idx = |s: usize| if s < t { s } else { s - 1 };
            let m = n - 1;
            let mut a = Array2::<f64>::eye(m);
            for s in (0..n).filter(|&s| s != t) {
                for &(i, pi) in p.row(s) {
                    if i != t {
                        a[[idx(s), idx(i)]] -= pi;
                    }
                }
            }
            let h = linalg::solve(a, Array1::ones(m))?;
            let mut col = vec![0.0; n];
            for s in (0..n).filter(|&s| s != t) {
                col[s] = h[idx(s)];
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Array2::zeros((n, n));
    for (t, col) in columns.into_iter().enumerate() {
        for (s, h) in col.into_iter().enumerate() {
            out[[s, t]] = h;
        }
    }
    Ok(out)
}

/// Commute-time distance `H(s,t) + H(t,s)` for graphs with unit edge costs.
pub fn ct_distance(g: &Graph) -> Result<DissimilarityMatrix> {
    if !g.is_unweighted() {
        return Err(Error::Unsupported(
            "commute-time reference is only defined for unit edge costs".into(),
        ));
    }
    let h = hitting_times(g)?;
    let values = &h + &h.t();
    Ok(DissimilarityMatrix::square(values, true))
}

/// Directed FE dissimilarity from `s` to `t` by explicit enumeration of every
/// absorbing path of length at most `max_len`:
/// `-(1/eta) ln sum_p P_ref(p) exp(-eta c(p))`. Exponential in `max_len`; for
/// tiny graphs only.
pub fn path_enumeration_oracle(g: &Graph, eta: f64, s: usize, t: usize, max_len: usize) -> Result<f64> {
    let n = g.node_count();
    if n > 8 || max_len > 12 {
        return validation("path enumeration is limited to 8 nodes and paths of length 12");
    }
    if s >= n || t >= n {
        return validation("node out of range");
    }
    if !(eta > 0.0) {
        return validation("eta must be positive");
    }
    if s == t {
        return Ok(0.0);
    }
    let p = transition_matrix(g)?;
    let c = cost_matrix(g);
    // Log-weights ln P_ref(p) - eta c(p) of every absorbing path found.
    let mut log_weights = Vec::new();
    let mut stack = vec![(s, 0usize, 0.0f64, 0.0f64)];
    while let Some((v, len, log_prob, cost)) = stack.pop() {
        if len == max_len {
            continue;
        }
        for &(u, puv) in p.row(v) {
            let lp = log_prob + puv.ln();
            let cu = cost + c.get(v, u);
            if u == t {
                log_weights.push(lp - eta * cu);
            } else {
                stack.push((u, len + 1, lp, cu));
            }
        }
    }
    if log_weights.is_empty() {
        return Ok(f64::INFINITY);
    }
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_weights.iter().map(|w| (w - top).exp()).sum();
    Ok(-(top + sum.ln()) / eta)
}
