use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{EncoderError, EncoderParams};
use crate::dataset::{MaskedGraph, NodeSlot};
use crate::model::{ComponentNode, LayoutGraph};
use crate::relations::{RelationChannel, RelationMatrix};

/// One-hot slots: the six categories plus the mask sentinel.
pub const CATEGORY_SLOTS: usize = 7;
pub const MASK_SLOT: usize = 6;
/// In- and out-degree per channel, appended to the layer-0 state.
pub const DEGREE_STATS: usize = 8;

/// 64-bit key of a content payload.
pub fn payload_key(payload: &str) -> u64 {
    let digest = Sha256::digest(payload.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}

/// Unit-norm pseudo-random vector keyed by the payload hash.
pub fn content_stub(payload: &str, dim: usize) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(payload_key(payload));
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut r)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// A node as the encoder sees it.
#[derive(Debug, Clone, Copy)]
pub enum NodeView<'a> {
    Node(&'a ComponentNode),
    Mask,
}

/// `[x, y, w, h] ‖ one-hot(7) ‖ content stub`, before projection.
pub fn raw_features(node: NodeView<'_>, stub_dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; 4 + CATEGORY_SLOTS + stub_dim];
    match node {
        NodeView::Node(n) => {
            out[..4].copy_from_slice(&[n.bbox.x, n.bbox.y, n.bbox.w, n.bbox.h]);
            out[4 + n.category.index()] = 1.0;
            out[4 + CATEGORY_SLOTS..].copy_from_slice(&content_stub(&n.content.payload, stub_dim));
        }
        NodeView::Mask => out[4 + MASK_SLOT] = 1.0,
    }
    out
}

/// Everything the encoder needs from one graph, precomputed.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub raw: Array2<f64>,
    pub relations: RelationMatrix,
    /// `n × 8` degree statistics.
    pub stats: Array2<f64>,
    /// Row-normalised neighbour means: TOP, LEFT, PARALLEL, CONTAIN
    /// successors, then CONTAIN predecessors (the parent).
    pub aggregators: Vec<Array2<f64>>,
}

impl GraphInput {
    pub fn new(views: &[NodeView<'_>], relations: &RelationMatrix, stub_dim: usize) -> Result<Self, EncoderError> {
        let n = views.len();
        if n == 0 {
            return Err(EncoderError::EmptyGraph);
        }
        if relations.len() != n {
            return Err(EncoderError::DimensionMismatch {
                expected: n,
                found: relations.len(),
            });
        }
        let width = 4 + CATEGORY_SLOTS + stub_dim;
        let mut raw = Array2::zeros((n, width));
        for (i, v) in views.iter().enumerate() {
            for (k, x) in raw_features(*v, stub_dim).into_iter().enumerate() {
                raw[[i, k]] = x;
            }
        }
        let scale = (n.max(2) - 1) as f64;
        let mut stats = Array2::zeros((n, DEGREE_STATS));
        for c in RelationChannel::ALL {
            for (i, j) in relations.entries(c) {
                stats[[i, 2 * c.index()]] += 1.0 / scale;
                stats[[j, 2 * c.index() + 1]] += 1.0 / scale;
            }
        }
        let mut aggregators: Vec<Array2<f64>> = RelationChannel::ALL
            .iter()
            .map(|&c| mean_matrix(n, relations.entries(c)))
            .collect();
        aggregators.push(mean_matrix(n, relations.entries(RelationChannel::Contain).map(|(i, j)| (j, i))));
        Ok(GraphInput {
            raw,
            relations: relations.clone(),
            stats,
            aggregators,
        })
    }

    pub fn from_graph(g: &LayoutGraph, relations: &RelationMatrix, stub_dim: usize) -> Result<Self, EncoderError> {
        let views: Vec<NodeView<'_>> = g.nodes().iter().map(NodeView::Node).collect();
        Self::new(&views, relations, stub_dim)
    }

    pub fn from_masked(g: &MaskedGraph, stub_dim: usize) -> Result<Self, EncoderError> {
        let views: Vec<NodeView<'_>> = g
            .nodes
            .iter()
            .map(|slot| match slot {
                NodeSlot::Visible(n) => NodeView::Node(n),
                NodeSlot::Masked { .. } => NodeView::Mask,
            })
            .collect();
        Self::new(&views, &g.relations, stub_dim)
    }

    pub fn len(&self) -> usize {
        self.raw.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.nrows() == 0
    }
}

fn mean_matrix(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for (i, j) in edges {
        a[[i, j]] = 1.0;
    }
    for mut row in a.rows_mut() {
        let d = row.sum();
        if d > 0.0 {
            row /= d;
        }
    }
    a
}

/// Projects one node's raw features to the learned feature space.
pub fn featurize_node(node: NodeView<'_>, params: &EncoderParams) -> Vec<f64> {
    let raw = raw_features(node, params.config.stub_dim);
    let row = Array2::from_shape_vec((1, raw.len()), raw).expect("one row");
    let out = (row.dot(params.feature_weight()) + params.feature_bias()).mapv(|x| x.max(0.0));
    out.into_raw_vec_and_offset().0
}
