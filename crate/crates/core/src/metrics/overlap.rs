use crate::model::LayoutGraph;
use crate::relations::{contain_forest, derive_relations};

/// Percent of the canvas covered by pairwise intersections of boxes that are
/// not nested in one another. Containment comes from the derived relations.
pub fn overlap(layout: &LayoutGraph) -> f64 {
    let boxes = layout.bboxes();
    let forest = contain_forest(&derive_relations(layout)).expect("derived CONTAIN is a forest");
    let mut total = 0.0;
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if !forest.related(i, j) {
                total += boxes[i].intersection_area(&boxes[j]);
            }
        }
    }
    100.0 * total
}
