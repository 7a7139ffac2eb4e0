//! The layout JSON wire format: one record per node with its category,
//! center-based pixel coordinate and relation lists.
//!
//! ```text
//! [
//! {"Node_id": "1", "Category": "SLIDING BAR", "Coordinate": [1, 33, 172, 208], "Top": [3, 5], "Left": [2], "Parallel": [7], "Contain": []},
//! ...
//! ]
//! ```
//!
//! "Top" lists the nodes this node is above, "Left" the nodes it is left of,
//! "Contain" its direct children.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::rico::json_error;
use super::{BBox, Canvas, Category, ComponentNode, LayoutGraph, ModelError, Result};
use crate::relations::{RelationChannel, RelationMatrix};

/// One node record as it appears on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListingRecord {
    #[serde(rename = "Node_id")]
    pub node_id: String,
    #[serde(rename = "Category")]
    pub category: String,
    #[serde(rename = "Coordinate")]
    pub coordinate: [i64; 4],
    #[serde(rename = "Top", default)]
    pub top: Vec<u32>,
    #[serde(rename = "Left", default)]
    pub left: Vec<u32>,
    #[serde(rename = "Parallel", default)]
    pub parallel: Vec<u32>,
    #[serde(rename = "Contain", default)]
    pub contain: Vec<u32>,
}

impl ListingRecord {
    /// Canonical single-line rendering.
    pub fn to_line(&self) -> String {
        let list = |v: &[u32]| {
            v.iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        };
        let [x, y, w, h] = self.coordinate;
        format!(
            "{{\"Node_id\": {}, \"Category\": {}, \"Coordinate\": [{x}, {y}, {w}, {h}], \"Top\": [{}], \"Left\": [{}], \"Parallel\": [{}], \"Contain\": [{}]}}",
            serde_json::to_string(&self.node_id).expect("string serializes"),
            serde_json::to_string(&self.category).expect("string serializes"),
            list(&self.top),
            list(&self.left),
            list(&self.parallel),
            list(&self.contain),
        )
    }

    fn field(&self, channel: RelationChannel) -> &[u32] {
        match channel {
            RelationChannel::Top => &self.top,
            RelationChannel::Left => &self.left,
            RelationChannel::Parallel => &self.parallel,
            RelationChannel::Contain => &self.contain,
        }
    }
}

fn field_name(channel: RelationChannel) -> &'static str {
    match channel {
        RelationChannel::Top => "Top",
        RelationChannel::Left => "Left",
        RelationChannel::Parallel => "Parallel",
        RelationChannel::Contain => "Contain",
    }
}

/// Wire records for a graph and its relations, in node order.
pub fn to_records(graph: &LayoutGraph, relations: &RelationMatrix) -> Result<Vec<ListingRecord>> {
    if relations.len() != graph.len() {
        return Err(ModelError::DimensionMismatch {
            expected: graph.len(),
            found: relations.len(),
        });
    }
    let ids = |c: RelationChannel, i: usize| -> Vec<u32> {
        relations.row(c, i).into_iter().map(|j| j as u32 + 1).collect()
    };
    Ok(graph
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, node)| ListingRecord {
            node_id: node.node_id.to_string(),
            category: node.category.as_str().to_string(),
            coordinate: node.bbox.to_pixels(graph.canvas()),
            top: ids(RelationChannel::Top, i),
            left: ids(RelationChannel::Left, i),
            parallel: ids(RelationChannel::Parallel, i),
            contain: ids(RelationChannel::Contain, i),
        })
        .collect())
}

/// Renders a graph and its relations as a JSON array, one record per line.
pub fn serialize_layout(graph: &LayoutGraph, relations: &RelationMatrix) -> Result<String> {
    let records = to_records(graph, relations)?;
    let mut out = String::from("[\n");
    for (k, rec) in records.iter().enumerate() {
        out.push_str(&rec.to_line());
        out.push_str(if k + 1 < records.len() { ",\n" } else { "\n" });
    }
    out.push_str("]\n");
    Ok(out)
}

/// Parses layout JSON back into a graph and relation matrix.
///
/// The format carries no canvas size, so the caller supplies it. Both a JSON
/// array of records and bare concatenated records are accepted. Node ids are
/// relabeled to `1..=n` in ascending order.
pub fn parse_layout(text: &str, canvas: Canvas) -> Result<(LayoutGraph, RelationMatrix)> {
    from_records(read_records(text)?, canvas)
}

fn read_records(text: &str) -> Result<Vec<ListingRecord>> {
    let bytes = text.as_bytes();
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| json_error(bytes, e));
    }
    let mut out = Vec::new();
    for item in serde_json::Deserializer::from_str(text).into_iter::<ListingRecord>() {
        out.push(item.map_err(|e| json_error(bytes, e))?);
    }
    Ok(out)
}

/// Builds a graph and matrix from wire records, checking relation consistency.
pub fn from_records(records: Vec<ListingRecord>, canvas: Canvas) -> Result<(LayoutGraph, RelationMatrix)> {
    let canvas = Canvas::new(canvas.width, canvas.height)?;
    if records.is_empty() {
        return Err(ModelError::EmptyDocument);
    }
    let mut index: BTreeMap<u32, usize> = BTreeMap::new();
    for rec in &records {
        let id: u32 = rec
            .node_id
            .trim()
            .parse()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| ModelError::InvalidNodeId(rec.node_id.clone()))?;
        if index.insert(id, 0).is_some() {
            return Err(ModelError::DuplicateNodeId(id));
        }
    }
    for (k, slot) in index.values_mut().enumerate() {
        *slot = k;
    }
    let mut ordered: Vec<(u32, &ListingRecord)> = records
        .iter()
        .map(|r| (r.node_id.trim().parse::<u32>().expect("checked above"), r))
        .collect();
    ordered.sort_by_key(|(id, _)| *id);

    let n = ordered.len();
    let mut nodes = Vec::with_capacity(n);
    let mut sets: Vec<[BTreeSet<u32>; 4]> = Vec::with_capacity(n);
    for (k, (id, rec)) in ordered.iter().enumerate() {
        let category: Category = rec.category.parse().map_err(|value| ModelError::UnknownCategory {
            node: *id,
            value,
        })?;
        let bbox = BBox::from_pixels(rec.coordinate, canvas)
            .map_err(|reason| ModelError::InvalidBox { node: *id, reason })?;
        nodes.push(ComponentNode::new(k as u32 + 1, category, bbox));
        let mut per_channel: [BTreeSet<u32>; 4] = Default::default();
        for c in RelationChannel::ALL {
            for &other in rec.field(c) {
                if other == *id {
                    return Err(ModelError::SelfReference {
                        node: *id,
                        field: field_name(c),
                    });
                }
                if !index.contains_key(&other) {
                    return Err(ModelError::UnknownReference {
                        node: *id,
                        referenced: other,
                    });
                }
                per_channel[c.index()].insert(other);
            }
        }
        sets.push(per_channel);
    }

    let mut m = RelationMatrix::zeros(n);
    for (k, (id, _)) in ordered.iter().enumerate() {
        for c in RelationChannel::ALL {
            for &other in &sets[k][c.index()] {
                let o = index[&other];
                let reverse = sets[o][c.index()].contains(id);
                if c.is_symmetric() {
                    if !reverse {
                        return Err(ModelError::AsymmetricParallel { a: *id, b: other });
                    }
                } else if reverse {
                    return Err(ModelError::Antisymmetry {
                        a: (*id).min(other),
                        b: (*id).max(other),
                        field: field_name(c),
                    });
                }
                m.set(c, k, o, true, false);
            }
        }
    }
    Ok((LayoutGraph::new(canvas, nodes)?, m))
}
