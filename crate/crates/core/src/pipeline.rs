//! Graph -> distance -> similarity -> embedding, as one configurable call.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::factorization::{gmf_fit, Embedding, FitOptions};
use crate::fe_distance::{fe_directed, sample_targets, symmetrize, DissimilarityMatrix, FeParams, Horizon};
use crate::graph::Graph;
use crate::rng::derive_seed;
use crate::similarity::{
    deepwalk_similarity, pos_neg_from_similarity_capped, to_similarity, SimilarityMatrix, DEFAULT_EXP_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilaritySource {
    /// Free-energy distances turned into similarities.
    Fe,
    /// The window-averaged random-walk matrix implicit in DeepWalk.
    Deepwalk,
    /// A similarity matrix supplied by the caller.
    External,
}

impl fmt::Display for SimilaritySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimilaritySource::Fe => "fe",
            SimilaritySource::Deepwalk => "deepwalk",
            SimilaritySource::External => "external",
        })
    }
}

impl FromStr for SimilaritySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fe" => Ok(SimilaritySource::Fe),
            "deepwalk" => Ok(SimilaritySource::Deepwalk),
            "external" => Ok(SimilaritySource::External),
            other => validation(format!("unknown similarity source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub source: SimilaritySource,
    pub eta: f64,
    pub percentile: f64,
    pub max_target: f64,
    pub horizon: Horizon,
    /// Number of sampled target columns; `None` uses every node.
    pub targets: Option<usize>,
    pub drop_threshold: f64,
    pub convergence_tol: f64,
    pub window: usize,
    pub negatives: usize,
    pub exp_cap: f64,
    pub fit: FitOptions,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            source: SimilaritySource::Fe,
            eta: 1.0,
            percentile: 70.0,
            max_target: 6.0,
            horizon: Horizon::UntilConvergence,
            targets: None,
            drop_threshold: FeParams::DEFAULT_DROP_THRESHOLD,
            convergence_tol: FeParams::DEFAULT_TOL,
            window: 10,
            negatives: 1,
            exp_cap: DEFAULT_EXP_CAP,
            fit: FitOptions::default(),
            seed: 0,
        }
    }
}

impl EmbedConfig {
    pub fn fe_params(&self) -> FeParams {
        FeParams::new(self.eta)
            .with_horizon(self.horizon)
            .with_drop_threshold(self.drop_threshold)
            .with_tolerance(self.convergence_tol)
    }
}

/// Everything produced on the way to an embedding.
#[derive(Debug, Clone)]
pub struct EmbedOutput {
    pub distance: Option<DissimilarityMatrix>,
    pub similarity: SimilarityMatrix,
    pub embedding: Embedding,
}

/// FE dissimilarities for the configured targets. With all nodes as targets
/// the result is the symmetrized distance; with a sample it is the directed
/// `n x |targets|` block.
pub fn fe_for_config(g: &Graph, cfg: &EmbedConfig) -> Result<DissimilarityMatrix> {
    let n = g.node_count();
    match cfg.targets {
        Some(k) if k < n => {
            let targets = sample_targets(n, k, derive_seed(cfg.seed, 0))?;
            fe_directed(g, &cfg.fe_params(), &targets)
        }
        _ => {
            let all: Vec<usize> = (0..n).collect();
            symmetrize(&fe_directed(g, &cfg.fe_params(), &all)?)
        }
    }
}

/// Builds the configured similarity for `g` and factorizes it.
pub fn embed_graph(g: &Graph, cfg: &EmbedConfig) -> Result<EmbedOutput> {
    let (distance, similarity) = match cfg.source {
        SimilaritySource::Fe => {
            let delta = fe_for_config(g, cfg)?;
            let s = to_similarity(&delta, cfg.percentile, cfg.max_target)?;
            (Some(delta), s)
        }
        SimilaritySource::Deepwalk => (None, deepwalk_similarity(g, cfg.window, cfg.negatives)?),
        SimilaritySource::External => {
            return validation("an external similarity is not derived from the graph; use embed_similarity");
        }
    };
    let embedding = embed_similarity(&similarity, cfg)?;
    Ok(EmbedOutput { distance, similarity, embedding })
}

/// Factorizes a similarity matrix. Non-square inputs (sampled targets) are
/// always fitted with a separate context matrix.
pub fn embed_similarity(s: &SimilarityMatrix, cfg: &EmbedConfig) -> Result<Embedding> {
    let weights = pos_neg_from_similarity_capped(s, cfg.exp_cap)?;
    let (n, m) = weights.dim();
    let mut fit = cfg.fit;
    fit.seed = derive_seed(cfg.seed, 1);
    fit.symmetric = fit.symmetric && n == m;
    if fit.dim > n.max(m) {
        log::warn!("embedding dimension {} exceeds the matrix size {n}x{m}", fit.dim);
    }
    gmf_fit(&weights, &fit)
}

/// Node embedding rows only, for the evaluation protocols.
pub fn embed_rows(g: &Graph, cfg: &EmbedConfig) -> Result<Array2<f64>> {
    Ok(embed_graph(g, cfg)?.embedding.u)
}
