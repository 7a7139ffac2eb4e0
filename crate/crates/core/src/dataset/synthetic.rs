use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, weighted::WeightedIndex};

use super::{rng, sub_seed, DatasetError};
use crate::model::{BBox, Canvas, Category, ComponentNode, LayoutGraph};
use crate::synth::bands::{layout_rows, Member};

pub const MAX_NODES: usize = 64;
const MAX_DEPTH: usize = 3;
const MAX_CHILDREN: usize = 8;
const MAX_ROW: usize = 3;
const MAX_ATTEMPTS: usize = 32;

/// Category frequencies used for leaves of generated layouts.
pub const LEAF_PRIOR: [(Category, f64); 5] = [
    (Category::Image, 0.25),
    (Category::Text, 0.35),
    (Category::SlidingBar, 0.05),
    (Category::Icon, 0.2),
    (Category::Input, 0.15),
];

/// Random layout with `n` nodes: a full-canvas BACKGROUND root and a
/// containment tree whose children are packed into rows of columns.
///
/// Internal nodes are BACKGROUND and leaves draw from [`LEAF_PRIOR`]. Node
/// ids are shuffled so the root is not always node 1.
pub fn synthesize_random_layout(n: usize, seed: u64) -> Result<LayoutGraph, DatasetError> {
    if n == 0 || n > MAX_NODES {
        return Err(DatasetError::NodeCountOutOfRange(n));
    }
    let mut r = rng(seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(g) = attempt(n, &mut r) {
            return Ok(g);
        }
    }
    Err(DatasetError::GenerationFailed(n))
}

fn attempt(n: usize, r: &mut impl Rng) -> Option<LayoutGraph> {
    let mut depth = vec![0usize];
    let mut kids: Vec<Vec<usize>> = vec![Vec::new()];
    for k in 1..n {
        let open: Vec<usize> = (0..k)
            .filter(|&p| depth[p] < MAX_DEPTH && kids[p].len() < MAX_CHILDREN)
            .collect();
        let p = *open.choose(r)?;
        depth.push(depth[p] + 1);
        kids.push(Vec::new());
        kids[p].push(k);
    }

    let mut leaves = vec![0usize; n];
    for k in (0..n).rev() {
        leaves[k] = if kids[k].is_empty() {
            1
        } else {
            kids[k].iter().map(|&c| leaves[c]).sum()
        };
    }

    let mut boxes = vec![BBox::FULL; n];
    for k in 0..n {
        if kids[k].is_empty() {
            continue;
        }
        let mut order = kids[k].clone();
        order.shuffle(r);
        let mut rows: Vec<Vec<Member>> = Vec::new();
        let mut rest = order.as_slice();
        while !rest.is_empty() {
            let take = r.random_range(1..=MAX_ROW).min(rest.len());
            rows.push(
                rest[..take]
                    .iter()
                    .map(|&c| Member {
                        node: c,
                        weight: leaves[c] as f64,
                        fixed: None,
                    })
                    .collect(),
            );
            rest = &rest[take..];
        }
        for (c, b) in layout_rows(&boxes[k], &rows).ok()? {
            boxes[c] = b;
        }
    }

    let weights = WeightedIndex::new(LEAF_PRIOR.iter().map(|(_, w)| *w)).expect("positive weights");
    let mut ids: Vec<u32> = (1..=n as u32).collect();
    ids.shuffle(r);
    let nodes = (0..n)
        .map(|k| {
            let category = if kids[k].is_empty() && k != 0 {
                LEAF_PRIOR[weights.sample(r)].0
            } else {
                Category::Background
            };
            let payload = format!("{:016x}", r.random::<u64>());
            ComponentNode::new(ids[k], category, boxes[k]).with_payload(payload)
        })
        .collect();
    LayoutGraph::new(Canvas::RICO, nodes).ok()
}

/// `count` random layouts with node counts drawn uniformly from `sizes`.
pub fn synthetic_corpus(
    count: usize,
    sizes: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<Vec<LayoutGraph>, DatasetError> {
    let mut r = rng(seed);
    (0..count)
        .map(|k| {
            let n = r.random_range(sizes.clone());
            synthesize_random_layout(n, sub_seed(seed, k as u64))
        })
        .collect()
}
