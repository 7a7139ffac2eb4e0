use layout_workbench::dataset::synthesize_random_layout;
use layout_workbench::relations::{
    apply_edit, contain_forest, derive_relations, validate, ConflictKind, Edit, EditError, Origin, RelationChannel,
    RelationMatrix,
};
use proptest::prelude::*;

#[test]
fn derived_matrices_are_conflict_free() {
    for seed in 0..300 {
        let g = synthesize_random_layout(1 + seed as usize % 32, seed).unwrap();
        let m = derive_relations(&g);
        assert!(validate(&m).is_empty());
        let forest = contain_forest(&m).unwrap();
        let b = g.bboxes();
        for j in 0..m.len() {
            if let Some(p) = forest.parent(j) {
                assert!(b[p].area() > b[j].area());
            }
        }
    }
}

#[test]
fn positional_order_is_total_away_from_ties() {
    let g = synthesize_random_layout(20, 8).unwrap();
    let m = derive_relations(&g);
    let forest = contain_forest(&m).unwrap();
    let b = g.bboxes();
    for i in 0..m.len() {
        for j in 0..m.len() {
            if i == j || forest.related(i, j) {
                continue;
            }
            if (b[i].y - b[j].y).abs() > 1e-6 {
                assert!(m.get(RelationChannel::Top, i, j) ^ m.get(RelationChannel::Top, j, i));
            }
            if (b[i].x - b[j].x).abs() > 1e-6 {
                assert!(m.get(RelationChannel::Left, i, j) ^ m.get(RelationChannel::Left, j, i));
            }
        }
    }
}

#[test]
fn human_cycle_is_applied_and_reported() {
    let m = RelationMatrix::zeros(3);
    let a = apply_edit(&m, &Edit::set(RelationChannel::Contain, 1, 2, Origin::Human)).unwrap();
    let b = apply_edit(&a.matrix, &Edit::set(RelationChannel::Contain, 2, 1, Origin::Human)).unwrap();
    assert!(b.matrix.get(RelationChannel::Contain, 1, 0));
    let c = apply_edit(&b.matrix, &Edit::set(RelationChannel::Top, 1, 2, Origin::Human)).unwrap();
    let d = apply_edit(&c.matrix, &Edit::set(RelationChannel::Top, 2, 3, Origin::Human)).unwrap();
    let e = apply_edit(&d.matrix, &Edit::set(RelationChannel::Top, 3, 1, Origin::Human)).unwrap();
    assert!(e.conflicts.iter().any(|c| c.kind == ConflictKind::PositionalCycle));
    assert!(e.cleared.is_empty());
}

#[test]
fn parallel_edits_are_symmetric() {
    let m = RelationMatrix::zeros(4);
    let out = apply_edit(&m, &Edit::set(RelationChannel::Parallel, 2, 3, Origin::Human)).unwrap();
    assert!(out.matrix.get(RelationChannel::Parallel, 1, 2) && out.matrix.get(RelationChannel::Parallel, 2, 1));
    let back = apply_edit(&out.matrix, &Edit::clear(RelationChannel::Parallel, 3, 2, Origin::Human)).unwrap();
    assert!(back.matrix.values_eq(&m));
}

#[test]
fn unknown_ids_are_rejected() {
    let m = RelationMatrix::zeros(3);
    let edit = |i, j| apply_edit(&m, &Edit::set(RelationChannel::Top, i, j, Origin::Human));
    assert_eq!(edit(0, 1).unwrap_err(), EditError::UnknownNode { node: 0, n: 3 });
    assert_eq!(edit(1, 4).unwrap_err(), EditError::UnknownNode { node: 4, n: 3 });
    assert_eq!(edit(2, 2).unwrap_err(), EditError::SelfPair(2));
}

proptest! {
    #[test]
    fn edits_are_idempotent(seed in 0u64..200, pick in 0usize..1000, ch in 0usize..4, set in any::<bool>(), human in any::<bool>()) {
        let g = synthesize_random_layout(2 + seed as usize % 12, seed).unwrap();
        let m = derive_relations(&g);
        let n = m.len() as u32;
        let (i, j) = (1 + pick as u32 % n, 1 + (pick as u32 / n) % n);
        prop_assume!(i != j);
        let origin = if human { Origin::Human } else { Origin::Machine };
        let c = RelationChannel::ALL[ch];
        let e = if set { Edit::set(c, i, j, origin) } else { Edit::clear(c, i, j, origin) };
        let once = apply_edit(&m, &e).unwrap();
        let twice = apply_edit(&once.matrix, &e).unwrap();
        prop_assert!(twice.matrix.values_eq(&once.matrix));
        prop_assert!(twice.cleared.is_empty());
    }
}
