//! Node embeddings from free-energy graph distances and a generalized
//! skip-gram (negative sampling) matrix factorization.
//!
//! The pipeline is: [`graph`] preprocessing, [`fe_distance`] dissimilarities,
//! [`similarity`] conversion into positive/negative weights, [`factorization`]
//! with Adam, and the downstream [`evaluation`] protocols.

pub mod error;
pub mod evaluation;
pub mod factorization;
pub mod fe_distance;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod similarity;
pub mod synthetic;

pub use error::{Error, Result};
pub use factorization::{
    gmf_fit, gmf_gradient, gmf_loss, reconstruct, truncated_svd, Embedding, FitOptions, TruncatedSvd,
};
pub use evaluation::{EvalReport, PairOperator, Task};
pub use fe_distance::{
    fe_directed, fe_distance, path_enumeration_oracle, sp_distance, ct_distance, symmetrize,
    DissimilarityMatrix, FeParams, Horizon,
};
pub use graph::{load_edge_list, preprocess, EdgeSplit, Graph, LabelSet};
pub use pipeline::{embed_graph, embed_similarity, EmbedConfig, EmbedOutput, SimilaritySource};
pub use similarity::{pos_neg_from_similarity, to_similarity, PosNegWeights, SimilarityMatrix};

pub use ndarray;
