//! Training corpora: splits, masked positives, negatives, triplets, the
//! synthetic layout generator and the on-disk manifest.

mod manifest;
mod mask;
mod negative;
mod split;
mod synthetic;
mod triplet;

pub use manifest::{read_manifest, store_layout, write_manifest, Corpus, ManifestEntry, SplitName};
pub use mask::{mask_graph, MaskedGraph, NodeSlot, MAX_MASK_RATIO, MIN_MASK_RATIO};
pub use negative::{sample_negative, MAX_RESAMPLES};
pub use split::{split, DatasetSplit};
pub use synthetic::{synthesize_random_layout, synthetic_corpus, MAX_NODES, LEAF_PRIOR};
pub use triplet::{build_triplets, Triplet, TripletRecord};

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("a split needs at least 10 entries, got {0}")]
    TooFewEntries(usize),
    #[error("mask ratio {0} is outside [0.05, 0.25]")]
    RatioOutOfRange(f64),
    #[error("graph with {n} nodes has {candidates} maskable nodes, need {needed}")]
    NothingToMask {
        n: usize,
        candidates: usize,
        needed: usize,
    },
    #[error("negative sampling needs a pool of at least 2, got {0}")]
    PoolTooSmall(usize),
    #[error("entry {0} is not in the pool")]
    NotInPool(usize),
    #[error("node count {0} is outside 1..=64")]
    NodeCountOutOfRange(usize),
    #[error("could not place a random layout with {0} nodes")]
    GenerationFailed(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent sub-seed for item `k` of a seeded batch.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
