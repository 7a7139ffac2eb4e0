//! Layout workbench: typed UI-layout graphs, relation matrices, a contrastive
//! graph encoder, a relation-constrained layout solver and evaluation metrics.

pub mod model;
pub mod relations;
pub mod dataset;
pub mod synth;
pub mod encoder;
pub mod metrics;
pub mod app;
