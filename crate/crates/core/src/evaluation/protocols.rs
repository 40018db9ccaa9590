//! Clustering, classification and link-prediction protocols.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::kmeans::kmeans;
use super::logreg::{fit_logreg_ovr, BinaryLogReg, LogRegOptions};
use super::metrics::{auc_score, clustering_scores, f1_scores};
use super::{EvalReport, Task};
use crate::error::{validation, Error, Result};
use crate::graph::{split_edges_for_link_prediction, Graph, LabelSet};
use crate::rng::{derive_seed, seeded};

/// Ways of combining two node embeddings into one edge feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOperator {
    Average,
    Hadamard,
    WeightedL1,
    WeightedL2,
}

impl PairOperator {
    pub const ALL: [PairOperator; 4] =
        [PairOperator::Average, PairOperator::Hadamard, PairOperator::WeightedL1, PairOperator::WeightedL2];

    pub fn name(self) -> &'static str {
        match self {
            PairOperator::Average => "average",
            PairOperator::Hadamard => "hadamard",
            PairOperator::WeightedL1 => "weighted_l1",
            PairOperator::WeightedL2 => "weighted_l2",
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            PairOperator::Average => (a + b) / 2.0,
            PairOperator::Hadamard => a * b,
            PairOperator::WeightedL1 => (a - b).abs(),
            PairOperator::WeightedL2 => (a - b) * (a - b),
        }
    }
}

impl fmt::Display for PairOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PairOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" | "avg" => Ok(PairOperator::Average),
            "hadamard" => Ok(PairOperator::Hadamard),
            "l1" | "weighted_l1" | "weighted-l1" => Ok(PairOperator::WeightedL1),
            "l2" | "weighted_l2" | "weighted-l2" => Ok(PairOperator::WeightedL2),
            other => validation(format!("unknown pair operator {other:?}")),
        }
    }
}

pub fn pair_embedding(u: ArrayView1<f64>, v: ArrayView1<f64>, op: PairOperator) -> Result<Array1<f64>> {
    if u.len() != v.len() {
        return validation(format!("pair dimensions differ: {} vs {}", u.len(), v.len()));
    }
    Ok(u.iter().zip(v.iter()).map(|(&a, &b)| op.apply(a, b)).collect())
}

fn pair_features(emb: &Array2<f64>, pairs: &[(usize, usize)], op: PairOperator) -> Array2<f64> {
    let d = emb.ncols();
    let mut out = Array2::zeros((pairs.len(), d));
    for (row, &(i, j)) in out.rows_mut().into_iter().zip(pairs) {
        for ((o, &a), &b) in row.into_iter().zip(emb.row(i)).zip(emb.row(j)) {
            *o = op.apply(a, b);
        }
    }
    out
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

fn logreg_hyperparameters(h: &mut BTreeMap<String, serde_json::Value>, opts: &LogRegOptions) {
    h.insert("logreg_l2".into(), json!(opts.l2));
    h.insert("logreg_max_iters".into(), json!(opts.max_iters));
    h.insert("logreg_tol".into(), json!(opts.tol));
    h.insert("logreg_standardize".into(), json!(opts.standardize));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationOptions {
    pub train_fraction: f64,
    pub splits: usize,
    pub logreg: LogRegOptions,
}

impl Default for ClassificationOptions {
    fn default() -> Self {
        ClassificationOptions { train_fraction: 0.5, splits: 10, logreg: LogRegOptions::default() }
    }
}

/// Micro/macro F1 of one-vs-rest logistic regression over random node splits.
/// Each test node is assigned as many top-scoring labels as it truly has.
pub fn classification_protocol(
    emb: &Array2<f64>,
    labels: &LabelSet,
    opts: &ClassificationOptions,
    seed: u64,
) -> Result<EvalReport> {
    let n = emb.nrows();
    if labels.node_count() != n {
        return validation(format!("{n} embedding rows but {} labelled nodes", labels.node_count()));
    }
    if !(opts.train_fraction > 0.0 && opts.train_fraction < 1.0) {
        return validation(format!("train fraction must lie in (0, 1), got {}", opts.train_fraction));
    }
    if opts.splits == 0 {
        return validation("at least one split is required");
    }
    let n_train = (opts.train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return validation(format!(
            "train fraction {} leaves an empty train or test set for {n} nodes",
            opts.train_fraction
        ));
    }
    let seeds: Vec<u64> = (0..opts.splits).map(|r| derive_seed(seed, r as u64)).collect();
    let results = seeds
        .par_iter()
        .map(|&s| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut seeded(s));
            let (train, test) = order.split_at(n_train);
            let model = fit_logreg_ovr(&emb.select(ndarray::Axis(0), train), &labels.select(train), &opts.logreg)?;
            let test_labels = labels.select(test);
            let k: Vec<usize> = (0..test.len()).map(|i| test_labels.labels_of(i).len()).collect();
            let predicted = model.predict_top_k(&emb.select(ndarray::Axis(0), test), &k);
            let truth: Vec<Vec<usize>> = (0..test.len()).map(|i| test_labels.labels_of(i).to_vec()).collect();
            Ok(f1_scores(&truth, &predicted, labels.num_labels()))
        })
        .collect::<Result<Vec<_>>>()?;
    let micro: Vec<f64> = results.iter().map(|r| r.0).collect();
    let macro_f1: Vec<f64> = results.iter().map(|r| r.1).collect();

    let mut metrics = BTreeMap::new();
    metrics.insert("micro_f1".into(), mean(&micro));
    metrics.insert("macro_f1".into(), mean(&macro_f1));
    metrics.insert("micro_f1_std".into(), std_dev(&micro));
    metrics.insert("macro_f1_std".into(), std_dev(&macro_f1));
    let mut hyperparameters = BTreeMap::new();
    hyperparameters.insert("train_fraction".into(), json!(opts.train_fraction));
    hyperparameters.insert("dim".into(), json!(emb.ncols()));
    logreg_hyperparameters(&mut hyperparameters, &opts.logreg);
    Ok(EvalReport {
        task: Task::Classification,
        metrics,
        seeds,
        hyperparameters,
        repetitions: opts.splits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPredictionOptions {
    pub removal_fraction: f64,
    pub repetitions: usize,
    pub operators: Vec<PairOperator>,
    pub logreg: LogRegOptions,
}

impl Default for LinkPredictionOptions {
    fn default() -> Self {
        LinkPredictionOptions {
            removal_fraction: 0.3,
            repetitions: 10,
            operators: PairOperator::ALL.to_vec(),
            logreg: LogRegOptions::default(),
        }
    }
}

/// Test AUC of a logistic regression on pair features, per operator. The
/// embedding is learned on the reduced training graph only: `embed` receives
/// that graph and a derived seed and must return one row per node of it.
pub fn link_prediction_protocol<F>(
    g: &Graph,
    embed: F,
    opts: &LinkPredictionOptions,
    seed: u64,
) -> Result<EvalReport>
where
    F: Fn(&Graph, u64) -> Result<Array2<f64>> + Sync,
{
    if opts.repetitions == 0 {
        return validation("at least one repetition is required");
    }
    if opts.operators.is_empty() {
        return validation("at least one pair operator is required");
    }
    let seeds: Vec<u64> = (0..opts.repetitions).map(|r| derive_seed(seed, r as u64)).collect();
    // Repetitions run one after another; the embedding itself is parallel.
    let mut per_rep = Vec::with_capacity(seeds.len());
    for &s in &seeds {
        let split = split_edges_for_link_prediction(g, opts.removal_fraction, derive_seed(s, 0))?;
        let emb = embed(&split.train_graph, derive_seed(s, 1))?;
        if emb.nrows() != split.train_graph.node_count() {
            return validation(format!(
                "embedding has {} rows for a training graph of {} nodes",
                emb.nrows(),
                split.train_graph.node_count()
            ));
        }
        let train_pos = split.train_positive_pairs();
        let train_pairs: Vec<(usize, usize)> =
            train_pos.iter().chain(&split.negative_pairs_train).copied().collect();
        let train_y: Vec<bool> = (0..train_pairs.len()).map(|i| i < train_pos.len()).collect();
        let test_pairs: Vec<(usize, usize)> =
            split.test_positive_pairs.iter().chain(&split.negative_pairs_test).copied().collect();
        let test_y: Vec<bool> =
            (0..test_pairs.len()).map(|i| i < split.test_positive_pairs.len()).collect();
        let aucs = opts
            .operators
            .par_iter()
            .map(|&op| {
                let model = BinaryLogReg::fit(&pair_features(&emb, &train_pairs, op), &train_y, &opts.logreg)?;
                let scores = model.decision_function(&pair_features(&emb, &test_pairs, op));
                auc_score(scores.as_slice().unwrap(), &test_y)
            })
            .collect::<Result<Vec<f64>>>()?;
        per_rep.push(aucs);
    }

    let mut metrics = BTreeMap::new();
    for (k, op) in opts.operators.iter().enumerate() {
        let values: Vec<f64> = per_rep.iter().map(|r| r[k]).collect();
        metrics.insert(format!("auc_{}", op.name()), mean(&values));
        metrics.insert(format!("auc_{}_std", op.name()), std_dev(&values));
    }
    let mut hyperparameters = BTreeMap::new();
    hyperparameters.insert("removal_fraction".into(), json!(opts.removal_fraction));
    hyperparameters.insert(
        "operators".into(),
        json!(opts.operators.iter().map(|o| o.name()).collect::<Vec<_>>()),
    );
    logreg_hyperparameters(&mut hyperparameters, &opts.logreg);
    Ok(EvalReport {
        task: Task::LinkPrediction,
        metrics,
        seeds,
        hyperparameters,
        repetitions: opts.repetitions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringOptions {
    pub embed_reps: usize,
    pub kmeans_runs: usize,
}

impl Default for ClusteringOptions {
    fn default() -> Self {
        ClusteringOptions { embed_reps: 5, kmeans_runs: 10 }
    }
}

/// Embeds `embed_reps` times and clusters each embedding `kmeans_runs` times
/// from independent k-means++ starts with k = number of classes; every
/// (embedding, start) pair is one realization and metrics are averaged.
pub fn clustering_protocol<F>(
    embed: F,
    labels: &LabelSet,
    opts: &ClusteringOptions,
    seed: u64,
) -> Result<EvalReport>
where
    F: Fn(u64) -> Result<Array2<f64>>,
{
    let truth = labels.classes()?;
    if opts.embed_reps == 0 || opts.kmeans_runs == 0 {
        return validation("embed_reps and kmeans_runs must be positive");
    }
    let k = labels.num_labels();
    let seeds: Vec<u64> = (0..opts.embed_reps).map(|r| derive_seed(seed, r as u64)).collect();
    let mut scores = Vec::new();
    let mut dim = 0;
    for &s in &seeds {
        let emb = embed(derive_seed(s, 0))?;
        if emb.nrows() != truth.len() {
            return validation(format!("{} embedding rows but {} labelled nodes", emb.nrows(), truth.len()));
        }
        dim = emb.ncols();
        let kmeans_seed = derive_seed(s, 1);
        let realizations = (0..opts.kmeans_runs)
            .into_par_iter()
            .map(|run| {
                let result = kmeans(&emb, k, 1, derive_seed(kmeans_seed, run as u64))?;
                clustering_scores(&result.labels, &truth)
            })
            .collect::<Result<Vec<_>>>()?;
        scores.extend(realizations);
    }
    let mut metrics = BTreeMap::new();
    for (name, get) in [
        ("acc", (|s: &super::metrics::ClusteringScores| s.acc) as fn(&_) -> f64),
        ("nmi", |s| s.nmi),
        ("ari", |s| s.ari),
        ("weighted_f1", |s| s.weighted_f1),
    ] {
        let values: Vec<f64> = scores.iter().map(get).collect();
        metrics.insert(name.to_string(), mean(&values));
        metrics.insert(format!("{name}_std"), std_dev(&values));
    }
    let mut hyperparameters = BTreeMap::new();
    hyperparameters.insert("k".into(), json!(k));
    hyperparameters.insert("dim".into(), json!(dim));
    hyperparameters.insert("embed_reps".into(), json!(opts.embed_reps));
    hyperparameters.insert("kmeans_runs".into(), json!(opts.kmeans_runs));
    Ok(EvalReport {
        task: Task::Clustering,
        metrics,
        seeds,
        hyperparameters,
        repetitions: scores.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn operator_table() {
        let u = array![1.0, 2.0];
        let v = array![3.0, 4.0];
        let expect = [
            (PairOperator::Average, [2.0, 3.0]),
            (PairOperator::Hadamard, [3.0, 8.0]),
            (PairOperator::WeightedL1, [2.0, 2.0]),
            (PairOperator::WeightedL2, [4.0, 4.0]),
        ];
        for (op, e) in expect {
            assert_eq!(pair_embedding(u.view(), v.view(), op).unwrap().to_vec(), e.to_vec());
            assert_eq!(
                pair_embedding(u.view(), v.view(), op).unwrap(),
                pair_embedding(v.view(), u.view(), op).unwrap()
            );
        }
        assert!(pair_embedding(u.view(), array![1.0].view(), PairOperator::Hadamard).is_err());
        assert_eq!("l2".parse::<PairOperator>().unwrap(), PairOperator::WeightedL2);
    }

    fn separated(n_per: usize, classes: usize) -> (Array2<f64>, LabelSet) {
        let n = n_per * classes;
        let mut emb = Array2::zeros((n, classes));
        let mut rng = seeded(5);
        let mut cls = Vec::new();
        for i in 0..n {
            let c = i % classes;
            cls.push(c);
            for j in 0..classes {
                let noise: f64 = StandardNormal.sample(&mut rng);
                emb[[i, j]] = if j == c { 5.0 } else { 0.0 } + 0.1 * noise;
            }
        }
        (emb, LabelSet::from_classes(&cls).unwrap())
    }

    #[test]
    fn classification_perfect_and_chance() {
        let (emb, labels) = separated(30, 3);
        let opts = ClassificationOptions { splits: 3, ..Default::default() };
        let r = classification_protocol(&emb, &labels, &opts, 1).unwrap();
        assert_eq!(r.metrics["micro_f1"], 1.0);
        assert_eq!(r.metrics["macro_f1"], 1.0);

        let mut rng = seeded(9);
        let n = 600;
        let noise = Array2::from_shape_fn((n, 4), |_| StandardNormal.sample(&mut rng));
        let cls: Vec<usize> = (0..n).map(|i| i % 6).collect();
        let labels = LabelSet::from_classes(&cls).unwrap();
        let r = classification_protocol(&noise, &labels, &ClassificationOptions::default(), 2).unwrap();
        assert!((r.metrics["micro_f1"] - 1.0 / 6.0).abs() < 0.05, "{:?}", r.metrics);
    }

    #[test]
    fn clustering_repetitions() {
        let (emb, labels) = separated(10, 2);
        let r = clustering_protocol(|_| Ok(emb.clone()), &labels, &ClusteringOptions::default(), 0)
            .unwrap();
        assert_eq!(r.repetitions, 50);
        assert_eq!(r.metrics["acc"], 1.0);
        assert_eq!(r.metrics["acc_std"], 0.0);
    }

    #[test]
    fn bad_fraction_rejected() {
        let (emb, labels) = separated(2, 2);
        let opts = ClassificationOptions { train_fraction: 0.01, ..Default::default() };
        assert!(classification_protocol(&emb, &labels, &opts, 0).is_err());
    }
}
