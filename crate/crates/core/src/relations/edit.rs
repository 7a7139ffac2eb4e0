use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate, Conflict, RelationChannel, RelationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Set,
    Clear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Human,
    Machine,
}

/// A single change to one relation entry. `i` and `j` are 1-based node ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edit {
    pub op: EditOp,
    pub channel: RelationChannel,
    pub i: u32,
    pub j: u32,
    #[serde(default)]
    pub origin: Origin,
}

impl Edit {
    pub fn set(channel: RelationChannel, i: u32, j: u32, origin: Origin) -> Self {
        Edit {
            op: EditOp::Set,
            channel,
            i,
            j,
            origin,
        }
    }

    pub fn clear(channel: RelationChannel, i: u32, j: u32, origin: Origin) -> Self {
        Edit {
            op: EditOp::Clear,
            channel,
            i,
            j,
            origin,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EditError {
    #[error("node {node} does not exist (graph has {n} nodes)")]
    UnknownNode { node: u32, n: usize },
    #[error("edit pairs node {0} with itself")]
    SelfPair(u32),
}

/// An entry removed as a side effect of an edit. Ids are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClearedEntry {
    pub channel: RelationChannel,
    pub i: u32,
    pub j: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub matrix: RelationMatrix,
    /// Machine entries cleared because the edit contradicted them.
    pub cleared: Vec<ClearedEntry>,
    /// Conflicts remaining after the edit.
    pub conflicts: Vec<Conflict>,
    /// Set when a machine edit was refused because it contradicts a human entry.
    pub rejected: bool,
}

type Entry = (RelationChannel, usize, usize);

/// Applies one edit with human-priority conflict resolution.
///
/// PARALLEL edits are mirrored. Setting an entry removes the entries it
/// contradicts: the reverse entry for TOP, LEFT and CONTAIN; for CONTAIN also
/// any other parent of the child, a PARALLEL link on the same pair, positional
/// entries between the pair, and PARALLEL links from the child to nodes that
/// are not its new siblings. Contradicted entries of lower or equal priority
/// are cleared and reported; human entries survive a human edit, leaving the
/// conflict for the caller. Machine edits never override human entries.
pub fn apply_edit(m: &RelationMatrix, e: &Edit) -> Result<EditOutcome, EditError> {
    let n = m.len();
    for node in [e.i, e.j] {
        if node == 0 || node as usize > n {
            return Err(EditError::UnknownNode { node, n });
        }
    }
    if e.i == e.j {
        return Err(EditError::SelfPair(e.i));
    }
    let (i, j) = (e.i as usize - 1, e.j as usize - 1);
    let human = e.origin == Origin::Human;
    let mut targets: Vec<Entry> = vec![(e.channel, i, j)];
    if e.channel.is_symmetric() {
        targets.push((e.channel, j, i));
    }

    let mut out = m.clone();
    let unchanged = |m: &RelationMatrix| EditOutcome {
        matrix: m.clone(),
        cleared: Vec::new(),
        conflicts: validate(m),
        rejected: true,
    };

    match e.op {
        EditOp::Clear => {
            if !human && targets.iter().any(|&(c, a, b)| m.is_human(c, a, b)) {
                return Ok(unchanged(m));
            }
            for (c, a, b) in targets {
                out.set(c, a, b, false, false);
            }
            Ok(EditOutcome {
                conflicts: validate(&out),
                matrix: out,
                cleared: Vec::new(),
                rejected: false,
            })
        }
        EditOp::Set => {
            let contradicted: Vec<Entry> = contradictions(m, e.channel, i, j)
                .into_iter()
                .filter(|&(c, a, b)| m.get(c, a, b))
                .collect();
            if !human && contradicted.iter().any(|&(c, a, b)| m.is_human(c, a, b)) {
                return Ok(unchanged(m));
            }
            let mut cleared = Vec::new();
            for (c, a, b) in contradicted {
                if m.is_human(c, a, b) {
                    continue;
                }
                out.set(c, a, b, false, false);
                cleared.push(ClearedEntry {
                    channel: c,
                    i: a as u32 + 1,
                    j: b as u32 + 1,
                });
            }
            for (c, a, b) in targets {
                let keep_human = m.is_human(c, a, b);
                out.set(c, a, b, true, human || keep_human);
            }
            cleared.sort();
            cleared.dedup();
            Ok(EditOutcome {
                conflicts: validate(&out),
                matrix: out,
                cleared,
                rejected: false,
            })
        }
    }
}

fn contradictions(m: &RelationMatrix, channel: RelationChannel, i: usize, j: usize) -> Vec<Entry> {
    use RelationChannel::*;
    let n = m.len();
    match channel {
        Top | Left => vec![(channel, j, i)],
        Parallel => vec![(Contain, i, j), (Contain, j, i)],
        Contain => {
            let mut out = vec![
                (Contain, j, i),
                (Parallel, i, j),
                (Parallel, j, i),
                (Top, i, j),
                (Top, j, i),
                (Left, i, j),
                (Left, j, i),
            ];
            for k in 0..n {
                if k != i && k != j {
                    out.push((Contain, k, j));
                    if !m.get(Contain, i, k) {
                        out.push((Parallel, j, k));
                        out.push((Parallel, k, j));
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_is_mirrored() {
        let out = apply_edit(
            &RelationMatrix::zeros(3),
            &Edit::set(RelationChannel::Parallel, 2, 3, Origin::Human),
        )
        .unwrap();
        assert!(out.matrix.get(RelationChannel::Parallel, 1, 2));
        assert!(out.matrix.get(RelationChannel::Parallel, 2, 1));
    }

    #[test]
    fn human_edit_clears_machine_reverse() {
        let mut m = RelationMatrix::zeros(2);
        m.set(RelationChannel::Top, 0, 1, true, false);
        let out = apply_edit(&m, &Edit::set(RelationChannel::Top, 2, 1, Origin::Human)).unwrap();
        assert!(out.matrix.get(RelationChannel::Top, 1, 0));
        assert!(!out.matrix.get(RelationChannel::Top, 0, 1));
        assert_eq!(
            out.cleared,
            vec![ClearedEntry {
                channel: RelationChannel::Top,
                i: 1,
                j: 2
            }]
        );
        assert!(out.conflicts.is_empty());
    }

    #[test]
    fn human_contradiction_stays_as_conflict() {
        let m = RelationMatrix::zeros(2);
        let first = apply_edit(&m, &Edit::set(RelationChannel::Contain, 1, 2, Origin::Human)).unwrap();
        let second = apply_edit(
            &first.matrix,
            &Edit::set(RelationChannel::Contain, 2, 1, Origin::Human),
        )
        .unwrap();
        assert!(second.matrix.get(RelationChannel::Contain, 0, 1));
        assert!(second.matrix.get(RelationChannel::Contain, 1, 0));
        assert!(second
            .conflicts
            .iter()
            .any(|c| c.kind == super::super::ConflictKind::ContainCycle));
    }

    #[test]
    fn machine_edit_cannot_override_human() {
        let mut m = RelationMatrix::zeros(2);
        m.set(RelationChannel::Left, 0, 1, true, true);
        let out = apply_edit(&m, &Edit::set(RelationChannel::Left, 2, 1, Origin::Machine)).unwrap();
        assert!(out.rejected);
        assert_eq!(out.matrix, m);
    }

    #[test]
    fn repeated_edit_is_idempotent() {
        let mut m = RelationMatrix::zeros(3);
        m.set(RelationChannel::Top, 1, 0, true, false);
        let e = Edit::set(RelationChannel::Top, 1, 2, Origin::Human);
        let once = apply_edit(&m, &e).unwrap().matrix;
        let twice = apply_edit(&once, &e).unwrap().matrix;
        assert_eq!(once, twice);
    }

    #[test]
    fn unknown_node_rejected() {
        let e = Edit::set(RelationChannel::Top, 1, 4, Origin::Human);
        assert_eq!(
            apply_edit(&RelationMatrix::zeros(3), &e),
            Err(EditError::UnknownNode { node: 4, n: 3 })
        );
    }
}
