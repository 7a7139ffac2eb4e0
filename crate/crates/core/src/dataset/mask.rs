use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{rng, DatasetError};
use crate::model::{Canvas, ComponentNode, LayoutGraph};
use crate::relations::RelationMatrix;

pub const MIN_MASK_RATIO: f64 = 0.05;
pub const MAX_MASK_RATIO: f64 = 0.25;

/// A node position in a masked graph: either the original node or a blank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum NodeSlot {
    Visible(ComponentNode),
    /// Category hidden, box zeroed, content cleared; only the id survives.
    Masked { node_id: u32 },
}

impl NodeSlot {
    pub fn node_id(&self) -> u32 {
        match self {
            NodeSlot::Visible(n) => n.node_id,
            NodeSlot::Masked { node_id } => *node_id,
        }
    }

    pub fn visible(&self) -> Option<&ComponentNode> {
        match self {
            NodeSlot::Visible(n) => Some(n),
            NodeSlot::Masked { .. } => None,
        }
    }

    pub fn is_masked(&self) -> bool {
        matches!(self, NodeSlot::Masked { .. })
    }
}

/// A layout with some nodes blanked out. Indices line up with the source
/// graph, and every relation entry touching a masked node is cleared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedGraph {
    pub canvas: Canvas,
    pub nodes: Vec<NodeSlot>,
    pub relations: RelationMatrix,
    pub masked: BTreeSet<u32>,
    pub ratio: f64,
}

impl MaskedGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The same graph with the given node ids blanked.
    pub fn with_masked(gt: &LayoutGraph, relations: &RelationMatrix, masked: BTreeSet<u32>, ratio: f64) -> Self {
        let nodes = gt
            .nodes()
            .iter()
            .map(|n| {
                if masked.contains(&n.node_id) {
                    NodeSlot::Masked { node_id: n.node_id }
                } else {
                    NodeSlot::Visible(n.clone())
                }
            })
            .collect();
        let idx: Vec<usize> = masked.iter().map(|&id| id as usize - 1).collect();
        MaskedGraph {
            canvas: gt.canvas(),
            nodes,
            relations: relations.isolate(&idx),
            masked,
            ratio,
        }
    }

    /// A masked view with nothing hidden.
    pub fn unmasked(gt: &LayoutGraph, relations: &RelationMatrix) -> Self {
        MaskedGraph::with_masked(gt, relations, BTreeSet::new(), 0.0)
    }
}

/// Blanks `ceil(ratio * n)` non-root nodes chosen uniformly by `seed`.
pub fn mask_graph(
    gt: &LayoutGraph,
    relations: &RelationMatrix,
    ratio: f64,
    seed: u64,
) -> Result<MaskedGraph, DatasetError> {
    if !(MIN_MASK_RATIO..=MAX_MASK_RATIO).contains(&ratio) {
        return Err(DatasetError::RatioOutOfRange(ratio));
    }
    let n = gt.len();
    let root = gt.root();
    let candidates: Vec<u32> = gt
        .nodes()
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != root)
        .map(|(_, node)| node.node_id)
        .collect();
    let needed = (ratio * n as f64 - 1e-9).ceil() as usize;
    if needed == 0 || needed > candidates.len() {
        return Err(DatasetError::NothingToMask {
            n,
            candidates: candidates.len(),
            needed,
        });
    }
    let picks = rand::seq::index::sample(&mut rng(seed), candidates.len(), needed);
    let masked: BTreeSet<u32> = picks.into_iter().map(|k| candidates[k]).collect();
    Ok(MaskedGraph::with_masked(gt, relations, masked, ratio))
}
