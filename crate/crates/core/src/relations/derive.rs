use crate::model::{BBox, LayoutGraph};

use super::{ContainForest, RelationChannel, RelationMatrix};

/// Fraction of a child's area that must fall inside its container.
pub const CONTAIN_RATIO: f64 = 0.95;
/// Center differences at or below this are ties and produce no relation.
pub const POSITION_EPS: f64 = 1e-6;

/// Derives all four relation channels from geometry.
pub fn derive_relations(graph: &LayoutGraph) -> RelationMatrix {
    derive_from_boxes(&graph.bboxes())
}

/// Smallest container of each box, ties broken by lower index.
pub fn direct_parents(boxes: &[BBox]) -> Vec<Option<usize>> {
    let n = boxes.len();
    (0..n)
        .map(|j| {
            let child = &boxes[j];
            let area = child.area();
            let mut best: Option<usize> = None;
            for i in 0..n {
                if i == j {
                    continue;
                }
                let cand = &boxes[i];
                if cand.area() <= area || cand.intersection_area(child) < CONTAIN_RATIO * area {
                    continue;
                }
                if best.map_or(true, |b| cand.area() < boxes[b].area()) {
                    best = Some(i);
                }
            }
            best
        })
        .collect()
}

pub fn derive_from_boxes(boxes: &[BBox]) -> RelationMatrix {
    let n = boxes.len();
    let forest = ContainForest::from_parents(direct_parents(boxes));
    let mut m = RelationMatrix::zeros(n);
    for j in 0..n {
        if let Some(p) = forest.parent(j) {
            m.set(RelationChannel::Contain, p, j, true, false);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if forest.parent(i).is_some() && forest.parent(i) == forest.parent(j) {
                m.set(RelationChannel::Parallel, i, j, true, false);
            }
            if forest.related(i, j) {
                continue;
            }
            if boxes[i].y < boxes[j].y - POSITION_EPS {
                m.set(RelationChannel::Top, i, j, true, false);
            }
            if boxes[i].x < boxes[j].x - POSITION_EPS {
                m.set(RelationChannel::Left, i, j, true, false);
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn full_containment_excludes_positional() {
        let m = derive_from_boxes(&[b(0.5, 0.5, 1.0, 1.0), b(0.3, 0.3, 0.2, 0.2)]);
        assert!(m.get(RelationChannel::Contain, 0, 1));
        for c in [RelationChannel::Top, RelationChannel::Left] {
            assert!(!m.get(c, 0, 1) && !m.get(c, 1, 0));
        }
    }

    #[test]
    fn siblings_are_parallel_and_ordered() {
        let m = derive_from_boxes(&[
            b(0.5, 0.5, 1.0, 1.0),
            b(0.3, 0.3, 0.2, 0.2),
            b(0.7, 0.7, 0.2, 0.2),
        ]);
        assert!(m.get(RelationChannel::Parallel, 1, 2) && m.get(RelationChannel::Parallel, 2, 1));
        assert!(m.get(RelationChannel::Top, 1, 2));
        assert!(m.get(RelationChannel::Left, 1, 2));
        assert!(!m.get(RelationChannel::Top, 2, 1));
    }

    #[test]
    fn nested_chain_gives_direct_parent_only() {
        let m = derive_from_boxes(&[
            b(0.5, 0.5, 1.0, 1.0),
            b(0.5, 0.5, 0.5, 0.5),
            b(0.5, 0.5, 0.1, 0.1),
        ]);
        assert!(m.get(RelationChannel::Contain, 0, 1));
        assert!(m.get(RelationChannel::Contain, 1, 2));
        assert!(!m.get(RelationChannel::Contain, 0, 2));
        assert_eq!(m.count(RelationChannel::Top), 0);
    }

    #[test]
    fn equal_area_boxes_do_not_contain() {
        let m = derive_from_boxes(&[b(0.5, 0.5, 0.4, 0.4), b(0.5, 0.5, 0.4, 0.4)]);
        assert_eq!(m.count(RelationChannel::Contain), 0);
        assert_eq!(m.count(RelationChannel::Parallel), 0);
    }
}
