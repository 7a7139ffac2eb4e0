use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::rng;
use crate::model::LayoutGraph;
use crate::relations::{apply_edit, contain_forest, validate, ClearedEntry, Conflict, Edit, EditError, Origin, RelationChannel, RelationMatrix};
use crate::synth::GenerationResult;

/// Toggles tried per requested toggle before `randomize` gives up.
const TOGGLE_ATTEMPTS: usize = 64;

/// One user's editing state. `edit_log` replayed from `initial` gives
/// `relations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub graph: LayoutGraph,
    pub relations: RelationMatrix,
    pub initial: RelationMatrix,
    pub edit_log: Vec<Edit>,
    #[serde(default)]
    pub generated: Option<GenerationResult>,
}

/// What a batch of edits did to a session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EditReport {
    pub cleared: Vec<ClearedEntry>,
    /// Positions in the batch of machine edits refused by human entries.
    pub rejected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizeReport {
    pub requested: usize,
    pub applied: Vec<Edit>,
}

/// Applies `log` to `initial` in order.
pub fn replay(initial: &RelationMatrix, log: &[Edit]) -> Result<RelationMatrix, EditError> {
    let mut m = initial.clone();
    for e in log {
        m = apply_edit(&m, e)?.matrix;
    }
    Ok(m)
}

impl Session {
    pub fn new(session_id: impl Into<String>, graph: LayoutGraph, relations: RelationMatrix) -> Self {
        Session {
            session_id: session_id.into(),
            graph,
            initial: relations.clone(),
            relations,
            edit_log: Vec::new(),
            generated: None,
        }
    }

    pub fn conflicts(&self) -> Vec<Conflict> {
        validate(&self.relations)
    }

    /// Applies a batch atomically: if any edit names a bad node, nothing
    /// changes. A changed matrix makes the last generation stale.
    pub fn apply(&mut self, edits: &[Edit]) -> Result<EditReport, EditError> {
        let mut m = self.relations.clone();
        let mut report = EditReport::default();
        for (k, e) in edits.iter().enumerate() {
            let out = apply_edit(&m, e)?;
            if out.rejected {
                report.rejected.push(k);
            }
            report.cleared.extend(out.cleared);
            m = out.matrix;
        }
        self.edit_log.extend_from_slice(edits);
        if m != self.relations {
            self.generated = None;
        }
        self.relations = m;
        Ok(report)
    }

    /// Toggles up to `count` random entries with machine edits, keeping
    /// only toggles after which the matrix is conflict-free. Starting from a
    /// conflicted matrix applies nothing.
    pub fn randomize(&mut self, count: usize, seed: u64) -> RandomizeReport {
        let applied = random_toggles(&self.relations, count, seed);
        self.apply(&applied).expect("toggles stay inside the graph");
        RandomizeReport {
            requested: count,
            applied,
        }
    }

    pub fn replay_matches(&self) -> bool {
        replay(&self.initial, &self.edit_log).is_ok_and(|m| m == self.relations)
    }
}

/// No TOP or LEFT entry links a node to its own ancestor or descendant; no
/// box lies wholly above or beside a box it is nested in.
fn positions_off_lineage(m: &RelationMatrix) -> bool {
    let Ok(forest) = contain_forest(m) else { return false };
    [RelationChannel::Top, RelationChannel::Left]
        .into_iter()
        .all(|c| m.entries(c).all(|(i, j)| !forest.related(i, j)))
}

/// Machine edits toggling up to `count` entries of `m`, each leaving the
/// running matrix changed, conflict-free and free of positional entries
/// along a containment chain.
pub fn random_toggles(m: &RelationMatrix, count: usize, seed: u64) -> Vec<Edit> {
    let n = m.len();
    let mut out = Vec::new();
    if n < 2 || !validate(m).is_empty() {
        return out;
    }
    let mut r = rng(seed);
    let mut cur = m.clone();
    for _ in 0..count * TOGGLE_ATTEMPTS {
        if out.len() == count {
            break;
        }
        let channel = RelationChannel::ALL[r.random_range(0..4)];
        let i = r.random_range(0..n);
        let j = r.random_range(0..n - 1);
        let j = if j >= i { j + 1 } else { j };
        let (i, j) = (i as u32 + 1, j as u32 + 1);
        let edit = if cur.get(channel, i as usize - 1, j as usize - 1) {
            Edit::clear(channel, i, j, Origin::Machine)
        } else {
            Edit::set(channel, i, j, Origin::Machine)
        };
        let Ok(res) = apply_edit(&cur, &edit) else { continue };
        if res.rejected || !res.conflicts.is_empty() || res.matrix == cur || !positions_off_lineage(&res.matrix) {
            continue;
        }
        cur = res.matrix;
        out.push(edit);
    }
    out
}
