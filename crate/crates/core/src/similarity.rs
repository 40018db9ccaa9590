//! Similarity matrices for factorization: the shifted and scaled negative of a
//! distance matrix, the window-averaged random-walk similarity implicit in
//! DeepWalk, or any external matrix; plus the positive/negative weight pair
//! the factorization objective consumes.

use ndarray::{Array2, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::fe_distance::DissimilarityMatrix;
use crate::graph::{transition_matrix, Graph, DEFAULT_DENSE_CAP};

/// Largest similarity that may be exponentiated into a positive weight.
pub const DEFAULT_EXP_CAP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Distance { eta: Option<f64>, percentile: f64, max_target: f64 },
    Deepwalk { window: usize, negatives: usize },
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    /// May contain negative values and `-inf`.
    pub values: Array2<f64>,
    pub provenance: Provenance,
    /// Shift `b`.
    pub shift: f64,
    /// Scale `gamma`.
    pub scale: f64,
    /// Node index of each column when rows and columns are both nodes; entries
    /// pairing a node with itself carry no information and get zero weight.
    pub self_columns: Option<Vec<usize>>,
}

impl SimilarityMatrix {
    pub fn external(values: Array2<f64>) -> Self {
        SimilarityMatrix {
            values,
            provenance: Provenance::External,
            shift: 0.0,
            scale: 1.0,
            self_columns: None,
        }
    }

    pub fn is_self_pair(&self, row: usize, col: usize) -> bool {
        self.self_columns.as_ref().is_some_and(|cols| cols[col] == row)
    }
}

/// Nearest-rank percentile: the `ceil(p/100 * m)`-th smallest value.
pub fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let m = sorted.len();
    let rank = ((percentile / 100.0) * m as f64).ceil() as usize;
    sorted[rank.clamp(1, m) - 1]
}

/// `S = gamma * (b - Delta)`, where `b` is the given percentile of the
/// off-diagonal distances and `gamma` makes the largest off-diagonal
/// similarity equal `max_target`. Entries pairing a node with itself are left
/// out of both statistics.
pub fn to_similarity(delta: &DissimilarityMatrix, percentile: f64, max_target: f64) -> Result<SimilarityMatrix> {
    if !(percentile > 0.0 && percentile <= 100.0) {
        return validation(format!("percentile must lie in (0, 100], got {percentile}"));
    }
    if !(max_target > 0.0 && max_target.is_finite()) {
        return validation(format!("max target must be positive, got {max_target}"));
    }
    let (rows, cols) = delta.values.dim();
    let mut off: Vec<f64> = Vec::with_capacity(rows * cols);
    for ((r, c), &v) in delta.values.indexed_iter() {
        if !v.is_finite() {
            return validation(format!(
                "distance ({r}, {}) is not finite; use a longer horizon or run to convergence",
                delta.targets[c]
            ));
        }
        if delta.targets[c] != r {
            off.push(v);
        }
    }
    if off.is_empty() {
        return validation("no off-diagonal distances");
    }
    off.sort_by(f64::total_cmp);
    let min = off[0];
    if off[off.len() - 1] == min {
        return validation("all off-diagonal distances are equal; the scale is undefined");
    }
    let shift = nearest_rank(&off, percentile);
    if shift <= min {
        return validation(format!(
            "percentile {percentile} leaves no positive similarity; the scale is undefined"
        ));
    }
    let scale = max_target / (shift - min);
    let values = delta.values.mapv(|d| scale * (shift - d));
    Ok(SimilarityMatrix {
        values,
        provenance: Provenance::Distance {
            eta: delta.params.map(|p| p.eta),
            percentile,
            max_target,
        },
        shift,
        scale,
        self_columns: Some(delta.targets.clone()),
    })
}

/// `log( vol(G) / (b T) * sum_{t=1..T} P^t D^-1 )`, with zero entries mapped to `-inf`.
pub fn deepwalk_similarity(g: &Graph, window: usize, negatives: usize) -> Result<SimilarityMatrix> {
    deepwalk_similarity_capped(g, window, negatives, DEFAULT_DENSE_CAP)
}

pub fn deepwalk_similarity_capped(
    g: &Graph,
    window: usize,
    negatives: usize,
    dense_cap: usize,
) -> Result<SimilarityMatrix> {
    if window == 0 || negatives == 0 {
        return validation("window and negative-sample count must be positive");
    }
    let n = g.node_count();
    if n > dense_cap {
        return validation(format!("{n} nodes exceeds the dense storage cap of {dense_cap}"));
    }
    let p = transition_matrix(g)?;
    let mut power = p.to_dense();
    let mut acc = power.clone();
    for _ in 1..window {
        let mut next = Array2::<f64>::zeros((n, n));
        // Right-multiply by sparse P, row by row.
        Zip::from(next.axis_iter_mut(Axis(0)))
            .and(power.axis_iter(Axis(0)))
            .into_par_iter()
            .for_each(|(mut out, row)| {
                for (i, &x) in row.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    for &(j, pij) in p.row(i) {
                        out[j] += x * pij;
                    }
                }
            });
        acc += &next;
        power = next;
    }
    let factor = g.volume() / (negatives as f64 * window as f64);
    let degrees = g.degrees();
    for ((_, j), v) in acc.indexed_iter_mut() {
        *v = (factor * *v / degrees[j]).ln();
    }
    Ok(SimilarityMatrix {
        values: acc,
        provenance: Provenance::Deepwalk { window, negatives },
        shift: 0.0,
        scale: 1.0,
        self_columns: None,
    })
}

/// Per-entry weights of the positive and negative log-sigmoid terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PosNegWeights {
    pub s_plus: Array2<f64>,
    pub s_minus: Array2<f64>,
}

impl PosNegWeights {
    pub fn new(s_plus: Array2<f64>, s_minus: Array2<f64>) -> Result<Self> {
        if s_plus.dim() != s_minus.dim() {
            return validation(format!(
                "weight shapes differ: {:?} vs {:?}",
                s_plus.dim(),
                s_minus.dim()
            ));
        }
        if s_plus.iter().chain(s_minus.iter()).any(|&x| !(x >= 0.0 && x.is_finite())) {
            return validation("weights must be finite and nonnegative");
        }
        Ok(PosNegWeights { s_plus, s_minus })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.s_plus.dim()
    }

    /// Entries with both weights zero are left out of the objective.
    pub fn is_included(&self, i: usize, j: usize) -> bool {
        self.s_plus[[i, j]] > 0.0 || self.s_minus[[i, j]] > 0.0
    }

    /// Drops entry `(i, j)` from the objective.
    pub fn exclude(&mut self, i: usize, j: usize) {
        self.s_plus[[i, j]] = 0.0;
        self.s_minus[[i, j]] = 0.0;
    }

    /// `log(S+ / S-)`, the matrix the objective implicitly factorizes.
    pub fn log_ratio(&self) -> Array2<f64> {
        Zip::from(&self.s_plus).and(&self.s_minus).map_collect(|&a, &b| (a / b).ln())
    }
}

/// `S+ = exp(S)` (with `-inf` giving zero) and `S- = 1`.
pub fn pos_neg_from_similarity(s: &SimilarityMatrix) -> Result<PosNegWeights> {
    pos_neg_from_similarity_capped(s, DEFAULT_EXP_CAP)
}

pub fn pos_neg_from_similarity_capped(s: &SimilarityMatrix, cap: f64) -> Result<PosNegWeights> {
    let mut s_plus = Array2::zeros(s.values.dim());
    let mut s_minus = Array2::ones(s.values.dim());
    for ((i, j), &v) in s.values.indexed_iter() {
        if s.is_self_pair(i, j) {
            s_minus[[i, j]] = 0.0;
            continue;
        }
        if v.is_nan() || v == f64::INFINITY {
            return validation(format!("similarity ({i}, {j}) is {v}"));
        }
        if v > cap {
            return validation(format!(
                "similarity {v} at ({i}, {j}) exceeds {cap}; reduce the scale gamma"
            ));
        }
        s_plus[[i, j]] = v.exp();
    }
    Ok(PosNegWeights { s_plus, s_minus })
}
