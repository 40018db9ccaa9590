//! Downstream evaluation: node clustering, node classification and link
//! prediction, with the metrics they report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub mod kmeans;
pub mod logreg;
pub mod metrics;
pub mod protocols;

pub use kmeans::{kmeans, KMeansResult};
pub use logreg::{fit_logreg_ovr, BinaryLogReg, LogRegOptions, OneVsRest};
pub use metrics::{
    adjusted_rand_index, auc_score, clustering_accuracy, clustering_scores, contingency, f1_scores,
    hungarian, normalized_mutual_info, weighted_f1_after_mapping, ClusteringScores,
};
pub use protocols::{
    classification_protocol, clustering_protocol, link_prediction_protocol, pair_embedding,
    ClassificationOptions, ClusteringOptions, LinkPredictionOptions, PairOperator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Clustering,
    Classification,
    LinkPrediction,
}

/// Averaged metrics of one protocol run, with the seeds and settings used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub metrics: BTreeMap<String, f64>,
    pub seeds: Vec<u64>,
    pub hyperparameters: BTreeMap<String, serde_json::Value>,
    pub repetitions: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
