//! Graph encoder: node featurization, five-layer message passing, a bilinear
//! relation decoder and contrastive training with hand-written gradients.
//!
//! Node states start as a learned projection of `[box ‖ category one-hot ‖
//! content stub]`. Each layer mixes a node's own state with the mean state of
//! its neighbours per relation channel and of its parent. The pooled mean,
//! projected to `pooled_dim`, is the graph embedding `h_a`; the decoder scores
//! every ordered pair from the final node states.

mod features;
mod gradcheck;
mod loss;
mod model;
mod params;
pub mod tape;
mod train;

pub use features::{
    content_stub, featurize_node, payload_key, raw_features, GraphInput, NodeView, CATEGORY_SLOTS, DEGREE_STATS,
    MASK_SLOT,
};
pub use gradcheck::{grad_check, numeric_derivative, CheckSample, GradCheckReport, GRAD_FLOOR};
pub use loss::{cosine_similarity, relation_decode_loss, simcse_loss, LossConfig, SCORE_CLIP};
pub use model::{decode_relations, embed, encode_graph, featurize, reconcile, repair, GraphEmbedding, RelationScores};
pub use params::{EncoderConfig, EncoderParams, CHECKPOINT_VERSION, LAYER_BLOCKS};
pub use train::{
    decoder_f1, evaluate_loss, predict_relations, ranking_accuracy, train, train_from, train_observed,
    EpochLoss, LossTrace, Optimizer, RankingReport, TrainConfig, TrainingSet,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("cosine similarity of a zero-norm embedding")]
    ZeroNorm,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize, loss: f64 },
    #[error("triplets: {0}")]
    Triplets(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}: {1}")]
    Io(String, String),
}
