use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::{RelationChannel, RelationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    SelfRelation,
    PositionalCycle,
    ContainCycle,
    ContainParallelClash,
    SymmetryViolation,
    OrphanParallel,
    MultipleParents,
}

impl ConflictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConflictKind::SelfRelation => "self_relation",
            ConflictKind::PositionalCycle => "positional_cycle",
            ConflictKind::ContainCycle => "contain_cycle",
            ConflictKind::ContainParallelClash => "contain_parallel_clash",
            ConflictKind::SymmetryViolation => "symmetry_violation",
            ConflictKind::OrphanParallel => "orphan_parallel",
            ConflictKind::MultipleParents => "multiple_parents",
        }
    }
}

impl fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One inconsistency in a relation matrix. `nodes` are 1-based node ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub nodes: Vec<u32>,
    pub channel: RelationChannel,
}

impl Conflict {
    fn new(kind: ConflictKind, channel: RelationChannel, nodes: impl IntoIterator<Item = usize>) -> Self {
        Conflict {
            kind,
            nodes: nodes.into_iter().map(|i| i as u32 + 1).collect(),
            channel,
        }
    }

    pub fn involves(&self, node_id: u32) -> bool {
        self.nodes.contains(&node_id)
    }
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} on {} between {:?}", self.kind, self.channel, self.nodes)
    }
}

/// Lists every invariant violation in `m`. Empty iff the matrix is consistent.
pub fn validate(m: &RelationMatrix) -> Vec<Conflict> {
    let n = m.len();
    let mut out = Vec::new();

    for c in RelationChannel::ALL {
        for i in 0..n {
            if m.get(c, i, i) {
                out.push(Conflict::new(ConflictKind::SelfRelation, c, [i]));
            }
        }
    }

    for (c, kind) in [
        (RelationChannel::Top, ConflictKind::PositionalCycle),
        (RelationChannel::Left, ConflictKind::PositionalCycle),
        (RelationChannel::Contain, ConflictKind::ContainCycle),
    ] {
        for mut comp in cycles(m, c) {
            comp.sort_unstable();
            out.push(Conflict::new(kind, c, comp));
        }
    }

    let par = RelationChannel::Parallel;
    let con = RelationChannel::Contain;
    for i in 0..n {
        for j in 0..n {
            if i < j && m.get(par, i, j) != m.get(par, j, i) {
                out.push(Conflict::new(ConflictKind::SymmetryViolation, par, [i, j]));
            }
            if i != j && m.get(con, i, j) && (m.get(par, i, j) || m.get(par, j, i)) {
                out.push(Conflict::new(ConflictKind::ContainParallelClash, con, [i, j]));
            }
        }
    }

    let parents: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&i| i != j && m.get(con, i, j)).collect())
        .collect();
    for (j, ps) in parents.iter().enumerate() {
        if ps.len() > 1 {
            out.push(Conflict::new(
                ConflictKind::MultipleParents,
                con,
                std::iter::once(j).chain(ps.iter().copied()),
            ));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if !(m.get(par, i, j) || m.get(par, j, i)) {
                continue;
            }
            if parents[i].is_empty() || parents[i] != parents[j] {
                out.push(Conflict::new(ConflictKind::OrphanParallel, par, [i, j]));
            }
        }
    }

    out.sort();
    out
}

/// Strongly connected components of size at least two in one channel.
fn cycles(m: &RelationMatrix, channel: RelationChannel) -> Vec<Vec<usize>> {
    let n = m.len();
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let idx: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (i, j) in m.entries(channel) {
        if i != j {
            g.add_edge(idx[i], idx[j], ());
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .filter(|comp| comp.len() > 1)
        .map(|comp| comp.into_iter().map(|v| v.index()).collect())
        .collect()
}
