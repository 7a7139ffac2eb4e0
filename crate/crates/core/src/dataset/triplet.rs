use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{mask_graph, rng, sample_negative, sub_seed, DatasetError, MaskedGraph, MAX_MASK_RATIO, MIN_MASK_RATIO};
use crate::model::LayoutGraph;
use crate::relations::RelationMatrix;

/// Ground truth, its masked positive and an unrelated negative. `gt` and
/// `neg` index the corpus the triplet was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub gt: usize,
    pub pos: MaskedGraph,
    pub neg: usize,
}

/// Compact on-disk form of a triplet, keyed by corpus entry ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub gt: String,
    pub neg: String,
    pub masked: Vec<u32>,
    pub ratio: f64,
}

impl Triplet {
    pub fn record(&self, ids: &[String]) -> TripletRecord {
        TripletRecord {
            gt: ids[self.gt].clone(),
            neg: ids[self.neg].clone(),
            masked: self.pos.masked.iter().copied().collect(),
            ratio: self.pos.ratio,
        }
    }
}

/// One triplet per member of `members` that has enough nodes to mask. Mask
/// ratios are uniform in `[0.05, 0.25]`; negatives come from `members`.
pub fn build_triplets(
    graphs: &[LayoutGraph],
    relations: &[RelationMatrix],
    members: &[usize],
    seed: u64,
) -> Result<Vec<Triplet>, DatasetError> {
    if members.len() < 2 {
        return Err(DatasetError::PoolTooSmall(members.len()));
    }
    let histograms: Vec<[usize; 6]> = members.iter().map(|&i| graphs[i].category_histogram()).collect();
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(members.len());
    for (k, &gt) in members.iter().enumerate() {
        let ratio = r.random_range(MIN_MASK_RATIO..=MAX_MASK_RATIO);
        let pos = match mask_graph(&graphs[gt], &relations[gt], ratio, sub_seed(seed, 2 * k as u64)) {
            Ok(p) => p,
            Err(DatasetError::NothingToMask { .. }) => continue,
            Err(e) => return Err(e),
        };
        let neg = members[sample_negative(k, &histograms, sub_seed(seed, 2 * k as u64 + 1))?];
        out.push(Triplet { gt, pos, neg });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthetic_corpus;
    use crate::relations::derive_relations;

    #[test]
    fn triplet_invariants() {
        let graphs = synthetic_corpus(30, 3..=20, 5).unwrap();
        let rels: Vec<_> = graphs.iter().map(derive_relations).collect();
        let members: Vec<usize> = (0..30).collect();
        let ts = build_triplets(&graphs, &rels, &members, 9).unwrap();
        assert_eq!(ts.len(), 30);
        for t in &ts {
            assert_ne!(t.gt, t.neg);
            assert!((MIN_MASK_RATIO..=MAX_MASK_RATIO).contains(&t.pos.ratio));
            assert!(!t.pos.masked.is_empty());
            assert!(t.pos.masked.iter().all(|&id| (id as usize) <= graphs[t.gt].len()));
        }
        assert_eq!(ts, build_triplets(&graphs, &rels, &members, 9).unwrap());
    }
}
