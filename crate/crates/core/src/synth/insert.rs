use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use super::bands::{interior, MIN_SIZE};
use super::{GenerationResult, Provenance};
use crate::dataset::{rng, LEAF_PRIOR};
use crate::model::{BBox, ComponentNode, LayoutGraph};
use crate::relations::{derive_relations, RelationChannel, RelationMatrix};

const ATTEMPTS_PER_NODE: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertionReport {
    pub requested: usize,
    /// Ids of the nodes that were added.
    pub inserted: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Adds up to `k` random leaf nodes without disturbing the relations among
/// existing nodes. Each new node sits inside a randomly chosen parent and
/// clear of that parent's children. When no spot is found the result keeps
/// fewer insertions and the report says so.
pub fn insert_random_nodes(result: &GenerationResult, k: usize, seed: u64) -> GenerationResult {
    let mut r = rng(seed);
    let prior = WeightedIndex::new(LEAF_PRIOR.iter().map(|(_, w)| *w)).expect("positive weights");
    let canvas = result.layout.canvas();
    let mut nodes: Vec<ComponentNode> = result.layout.nodes().to_vec();
    let mut relations = derive_relations(&result.layout);
    let mut report = result.backend_report.clone();
    let mut inserted = Vec::new();

    for _ in 0..k {
        let mut placed = None;
        for _ in 0..ATTEMPTS_PER_NODE {
            let p = r.random_range(0..nodes.len());
            let Some(bbox) = random_box(&nodes[p].bbox, &mut r) else {
                continue;
            };
            let children: Vec<usize> = relations.row(RelationChannel::Contain, p);
            if children
                .iter()
                .any(|&c| nodes[c].bbox.intersection_area(&bbox) > 0.0)
            {
                continue;
            }
            let id = nodes.len() as u32 + 1;
            let category = LEAF_PRIOR[prior.sample(&mut r)].0;
            let mut trial = nodes.clone();
            trial.push(ComponentNode::new(id, category, bbox));
            let Ok(graph) = LayoutGraph::new(canvas, trial) else {
                continue;
            };
            let derived = derive_relations(&graph);
            if derived.leading(nodes.len()).values_eq(&relations)
                && derived.get(RelationChannel::Contain, p, nodes.len())
            {
                placed = Some((graph, derived));
                break;
            }
        }
        let Some((graph, derived)) = placed else {
            break;
        };
        nodes = graph.nodes().to_vec();
        relations = derived;
        report.push(Provenance::Inserted);
        inserted.push(nodes.len() as u32);
    }

    let note = (inserted.len() < k).then(|| {
        format!(
            "found free space for {} of {} requested nodes",
            inserted.len(),
            k
        )
    });
    let layout = LayoutGraph::new(canvas, nodes).expect("nodes stay valid");
    let relations_out: RelationMatrix = relations;
    GenerationResult {
        layout,
        relations_out,
        backend_report: report,
        backend: result.backend.clone(),
        insertion: Some(InsertionReport {
            requested: k,
            inserted,
            note,
        }),
    }
}

fn random_box(parent: &BBox, r: &mut impl Rng) -> Option<BBox> {
    let inner = interior(parent);
    let (w_max, h_max) = (
        (inner.right - inner.left) * 0.5,
        (inner.bottom - inner.top) * 0.5,
    );
    if w_max < MIN_SIZE || h_max < MIN_SIZE {
        return None;
    }
    let w = r.random_range(MIN_SIZE..=w_max);
    let h = r.random_range(MIN_SIZE..=h_max);
    let x = r.random_range(inner.left + w / 2.0..=inner.right - w / 2.0);
    let y = r.random_range(inner.top + h / 2.0..=inner.bottom - h / 2.0);
    BBox::new(x, y, w, h).ok()
}
