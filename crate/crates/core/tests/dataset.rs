use layout_workbench::dataset::{
    build_triplets, mask_graph, split, synthetic_corpus, DatasetError, NodeSlot, MAX_MASK_RATIO, MIN_MASK_RATIO,
};
use layout_workbench::relations::{derive_relations, validate};

#[test]
fn split_follows_seven_two_one() {
    let ids: Vec<String> = (0..500).map(|k| format!("screen-{k}")).collect();
    let s = split(&ids, 3).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (350, 100, 50));
    let mut all: Vec<&String> = s.train.iter().chain(&s.val).chain(&s.test).collect();
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 500);
    assert_eq!(split(&ids, 3).unwrap(), s);
    assert!(matches!(split(&ids[..9], 3), Err(DatasetError::TooFewEntries(9))));
}

#[test]
fn masks_stay_in_band_and_keep_the_root() {
    let graphs = synthetic_corpus(60, 4..=24, 9).unwrap();
    for (k, g) in graphs.iter().enumerate() {
        let m = derive_relations(g);
        assert!(validate(&m).is_empty());
        let masked = mask_graph(g, &m, 0.15, k as u64).unwrap();
        assert!(!masked.masked.is_empty());
        let root = g.root().unwrap() as u32 + 1;
        assert!(!masked.masked.contains(&root));
        for slot in &masked.nodes {
            if let NodeSlot::Masked { node_id } = slot {
                assert!(masked.masked.contains(node_id));
            }
        }
    }
    let g = &graphs[0];
    let m = derive_relations(g);
    for bad in [MIN_MASK_RATIO - 0.01, MAX_MASK_RATIO + 0.01] {
        assert!(matches!(mask_graph(g, &m, bad, 0), Err(DatasetError::RatioOutOfRange(_))));
    }
}

#[test]
fn triplets_pair_each_member_with_another_layout() {
    let graphs = synthetic_corpus(30, 4..=12, 2).unwrap();
    let rels: Vec<_> = graphs.iter().map(derive_relations).collect();
    let members: Vec<usize> = (0..20).collect();
    let ts = build_triplets(&graphs, &rels, &members, 4).unwrap();
    assert_eq!(ts.len(), members.len());
    for t in &ts {
        assert_ne!(t.gt, t.neg);
        assert!(members.contains(&t.neg));
        assert_eq!(t.pos.len(), graphs[t.gt].len());
    }
    let again = build_triplets(&graphs, &rels, &members, 4).unwrap();
    assert!(ts.iter().zip(&again).all(|(a, b)| a.gt == b.gt && a.neg == b.neg && a.pos.masked == b.pos.masked));
}
