//! Resolved run settings: defaults, then a `key=value` file, then flags.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use fenode::evaluation::{ClassificationOptions, ClusteringOptions, LinkPredictionOptions, LogRegOptions};
use fenode::graph::{DirectedMerge, LoadOptions};
use fenode::{EmbedConfig, FitOptions, Horizon, PairOperator, SimilaritySource};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub eta: f64,
    pub percentile: f64,
    pub max_target: f64,
    /// Embedding dimension; `None` means the command's default.
    pub d: Option<usize>,
    #[serde(serialize_with = "horizon_str")]
    pub horizon: Horizon,
    pub targets: Option<usize>,
    pub similarity: SimilaritySource,
    /// `None` evaluates every operator.
    pub operator: Option<PairOperator>,
    pub removal_fraction: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub iterations: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub untied: bool,
    pub drop_threshold: f64,
    pub tol: f64,
    pub window: usize,
    pub negatives: usize,
    pub splits: usize,
    pub repetitions: usize,
    pub embed_reps: usize,
    pub kmeans_runs: usize,
    pub l2: f64,
    pub directed: bool,
    pub merge: String,
}

fn horizon_str<S: serde::Serializer>(h: &Horizon, s: S) -> Result<S::Ok, S::Error> {
    match h {
        Horizon::Steps(l) => s.serialize_str(&l.to_string()),
        Horizon::UntilConvergence => s.serialize_str("converge"),
    }
}

impl Default for Settings {
    fn default() -> Self {
        let embed = EmbedConfig::default();
        let fit = FitOptions::default();
        let logreg = LogRegOptions::default();
        Settings {
            eta: embed.eta,
            percentile: embed.percentile,
            max_target: embed.max_target,
            d: None,
            horizon: embed.horizon,
            targets: None,
            similarity: embed.source,
            operator: None,
            removal_fraction: LinkPredictionOptions::default().removal_fraction,
            train_fraction: ClassificationOptions::default().train_fraction,
            seed: 0,
            threads: None,
            iterations: fit.iterations,
            learning_rate: fit.learning_rate,
            init_scale: fit.init_scale,
            untied: false,
            drop_threshold: embed.drop_threshold,
            tol: embed.convergence_tol,
            window: embed.window,
            negatives: embed.negatives,
            splits: ClassificationOptions::default().splits,
            repetitions: LinkPredictionOptions::default().repetitions,
            embed_reps: ClusteringOptions::default().embed_reps,
            kmeans_runs: ClusteringOptions::default().kmeans_runs,
            l2: logreg.l2,
            directed: false,
            merge: "max".into(),
        }
    }
}

pub fn parse_horizon(value: &str) -> Result<Horizon> {
    match value {
        "converge" | "convergence" | "inf" => Ok(Horizon::UntilConvergence),
        v => {
            let steps: usize = v.parse().with_context(|| format!("horizon must be a step count or `converge`, got {v:?}"))?;
            if steps == 0 {
                bail!("horizon must be at least 1");
            }
            Ok(Horizon::Steps(steps))
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        v => bail!("invalid value {v:?} for {key}: expected true or false"),
    }
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "eta" => self.eta = parse(&key, v)?,
            "percentile" => self.percentile = parse(&key, v)?,
            "max_target" => self.max_target = parse(&key, v)?,
            "d" | "dim" => self.d = Some(parse(&key, v)?),
            "horizon" => self.horizon = parse_horizon(v)?,
            "targets" => self.targets = if v == "all" { None } else { Some(parse(&key, v)?) },
            "similarity" => self.similarity = parse(&key, v)?,
            "operator" => self.operator = if v == "all" { None } else { Some(parse(&key, v)?) },
            "removal_fraction" => self.removal_fraction = parse(&key, v)?,
            "train_fraction" => self.train_fraction = parse(&key, v)?,
            "seed" => self.seed = parse(&key, v)?,
            "threads" => self.threads = Some(parse(&key, v)?),
            "iterations" => self.iterations = parse(&key, v)?,
            "learning_rate" | "lr" => self.learning_rate = parse(&key, v)?,
            "init_scale" => self.init_scale = parse(&key, v)?,
            "untied" => self.untied = parse_bool(&key, v)?,
            "drop_threshold" => self.drop_threshold = parse(&key, v)?,
            "tol" => self.tol = parse(&key, v)?,
            "window" => self.window = parse(&key, v)?,
            "negatives" => self.negatives = parse(&key, v)?,
            "splits" => self.splits = parse(&key, v)?,
            "repetitions" => self.repetitions = parse(&key, v)?,
            "embed_reps" => self.embed_reps = parse(&key, v)?,
            "kmeans_runs" => self.kmeans_runs = parse(&key, v)?,
            "l2" => self.l2 = parse(&key, v)?,
            "directed" => self.directed = parse_bool(&key, v)?,
            "merge" => {
                if v != "max" && v != "sum" {
                    bail!("merge must be `max` or `sum`, got {v:?}");
                }
                self.merge = v.to_string();
            }
            other => bail!("unknown setting {other:?}"),
        }
        Ok(())
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), k + 1))?;
            self.set(key, value).with_context(|| format!("{}:{}", path.display(), k + 1))?;
        }
        Ok(())
    }

    pub fn dim_or(&self, default: usize) -> usize {
        self.d.unwrap_or(default)
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            directed: self.directed,
            merge: if self.merge == "sum" { DirectedMerge::Sum } else { DirectedMerge::Max },
        }
    }

    pub fn embed_config(&self, default_dim: usize) -> EmbedConfig {
        EmbedConfig {
            source: self.similarity,
            eta: self.eta,
            percentile: self.percentile,
            max_target: self.max_target,
            horizon: self.horizon,
            targets: self.targets,
            drop_threshold: self.drop_threshold,
            convergence_tol: self.tol,
            window: self.window,
            negatives: self.negatives,
            fit: FitOptions {
                dim: self.dim_or(default_dim),
                symmetric: !self.untied,
                learning_rate: self.learning_rate,
                iterations: self.iterations,
                init_scale: self.init_scale,
                ..FitOptions::default()
            },
            seed: self.seed,
            ..EmbedConfig::default()
        }
    }

    pub fn logreg(&self) -> LogRegOptions {
        LogRegOptions { l2: self.l2, ..LogRegOptions::default() }
    }

    /// The resolved settings as JSON, with the dimension filled in.
    pub fn to_json(&self, default_dim: usize) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("settings serialize");
        v["d"] = serde_json::json!(self.dim_or(default_dim));
        v
    }
}

/// Pipeline flags shared by all commands. Anything given here overrides the
/// config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Tunables {
    /// FE temperature parameter.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Percentile of the distances used as the similarity shift.
    #[arg(long)]
    pub percentile: Option<f64>,
    /// Largest similarity after scaling.
    #[arg(long)]
    pub max_target: Option<f64>,
    /// Embedding dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Recurrence steps, or `converge`.
    #[arg(long)]
    pub horizon: Option<String>,
    /// Number of sampled target nodes, or `all`.
    #[arg(long)]
    pub targets: Option<String>,
    /// Similarity source: fe, deepwalk or external.
    #[arg(long)]
    pub similarity: Option<String>,
    /// Pair operator: average, hadamard, l1, l2 or all.
    #[arg(long)]
    pub operator: Option<String>,
    #[arg(long)]
    pub removal_fraction: Option<f64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Adam iterations.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    /// Fit a separate context matrix even for square similarities.
    #[arg(long)]
    pub untied: bool,
    #[arg(long)]
    pub drop_threshold: Option<f64>,
    /// Convergence tolerance of the FE recurrence.
    #[arg(long)]
    pub tol: Option<f64>,
    /// DeepWalk window size.
    #[arg(long)]
    pub window: Option<usize>,
    /// DeepWalk negative samples.
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub splits: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub embed_reps: Option<usize>,
    #[arg(long)]
    pub kmeans_runs: Option<usize>,
    /// Logistic regression l2 penalty.
    #[arg(long)]
    pub l2: Option<f64>,
    /// Read the edge list as directed arcs.
    #[arg(long)]
    pub directed: bool,
    /// How reciprocal arcs are merged: max or sum.
    #[arg(long)]
    pub merge: Option<String>,
}

impl Tunables {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        macro_rules! push {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    out.push((stringify!($field), v.to_string()));
                })*
            };
        }
        push!(
            eta, percentile, max_target, d, horizon, targets, similarity, operator, removal_fraction,
            train_fraction, seed, threads, iterations, learning_rate, init_scale, drop_threshold, tol,
            window, negatives, splits, repetitions, embed_reps, kmeans_runs, l2, merge
        );
        if self.untied {
            out.push(("untied", "true".into()));
        }
        if self.directed {
            out.push(("directed", "true".into()));
        }
        out
    }

    pub fn resolve(&self, config: Option<&Path>) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = config {
            s.merge_file(path)?;
        }
        for (key, value) in self.pairs() {
            s.set(key, &value).with_context(|| format!("--{}", key.replace('_', "-")))?;
        }
        Ok(s)
    }
}
