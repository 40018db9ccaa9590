//! Seeded random graphs and the edge-reconstruction experiment on them.

use ndarray::Array2;
use rand::Rng as _;
use serde::Serialize;

use crate::error::{validation, Result};
use crate::factorization::{gmf_fit, reconstruct, truncated_svd, FitOptions};
use crate::graph::Graph;
use crate::rng::{derive_seed, seeded};
use crate::similarity::{pos_neg_from_similarity, SimilarityMatrix};

/// G(n, p): each of the `n(n-1)/2` pairs is an edge independently with
/// probability `p`. The result may be disconnected.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return validation(format!("edge probability must lie in [0, 1], got {p}"));
    }
    let mut rng = seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// G(n, p) redrawn with derived seeds until connected.
pub fn connected_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 || p <= 0.0 {
        return validation("a connected random graph needs n >= 2 and p > 0");
    }
    for attempt in 0.. {
        let g = erdos_renyi(n, p, derive_seed(seed, attempt))?;
        if g.is_connected() {
            return Ok(g);
        }
        if attempt == 10_000 {
            break;
        }
    }
    validation(format!("no connected G({n}, {p}) found"))
}

/// Random graph with `n` nodes and about `m` distinct edges, made connected by
/// a random spanning path. Used for timing runs.
pub fn sparse_connected(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if n < 2 {
        return validation("need at least two nodes");
    }
    let mut rng = seeded(seed);
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
    let mut edges: Vec<(usize, usize, f64)> = order.windows(2).map(|w| (w[0], w[1], 1.0)).collect();
    let mut seen: std::collections::HashSet<(usize, usize)> =
        edges.iter().map(|&(a, b, _)| (a.min(b), a.max(b))).collect();
    let max_edges = n * (n - 1) / 2;
    while seen.len() < m.min(max_edges) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b, 1.0));
        }
    }
    Graph::from_edges(n, edges)
}

/// `+value` on edges and `-value` elsewhere, diagonal included.
pub fn signed_adjacency(g: &Graph, value: f64) -> Array2<f64> {
    let n = g.node_count();
    Array2::from_shape_fn((n, n), |(i, j)| if g.has_edge(i, j) { value } else { -value })
}

/// Mean absolute reconstruction error over edge and non-edge entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitError {
    pub edge: f64,
    pub non_edge: f64,
    pub max: f64,
}

pub fn split_error(g: &Graph, target: &Array2<f64>, recon: &Array2<f64>) -> SplitError {
    let (mut edge, mut ne, mut non_edge, mut nn, mut max) = (0.0, 0usize, 0.0, 0usize, 0.0f64);
    for ((i, j), &t) in target.indexed_iter() {
        let e = (recon[[i, j]] - t).abs();
        max = max.max(e);
        if g.has_edge(i, j) {
            edge += e;
            ne += 1;
        } else {
            non_edge += e;
            nn += 1;
        }
    }
    SplitError { edge: edge / ne.max(1) as f64, non_edge: non_edge / nn.max(1) as f64, max }
}

/// Reconstructions of a `±value` signed adjacency by the weighted objective
/// and by truncated SVD at the same rank.
#[derive(Debug, Clone)]
pub struct ReconDemo {
    pub graph: Graph,
    pub target: Array2<f64>,
    pub gmf: Array2<f64>,
    pub svd: Array2<f64>,
    pub gmf_error: SplitError,
    pub svd_error: SplitError,
}

pub fn recon_demo(n: usize, p: f64, value: f64, fit: &FitOptions, seed: u64) -> Result<ReconDemo> {
    let graph = erdos_renyi(n, p, derive_seed(seed, 0))?;
    let target = signed_adjacency(&graph, value);
    let weights = pos_neg_from_similarity(&SimilarityMatrix::external(target.clone()))?;
    let opts = FitOptions { symmetric: false, seed: derive_seed(seed, 1), ..*fit };
    let gmf = reconstruct(&gmf_fit(&weights, &opts)?);
    let svd = truncated_svd(&target, fit.dim)?.reconstruct();
    let gmf_error = split_error(&graph, &target, &gmf);
    let svd_error = split_error(&graph, &target, &svd);
    Ok(ReconDemo { graph, target, gmf, svd, gmf_error, svd_error })
}
