//! Layout synthesis from relation matrices.
//!
//! A [`GenerationRequest`] carries the target relations plus any nodes whose
//! geometry is already known. Backends turn it into a [`GenerationResult`];
//! the built-in `solver` backend places nodes deterministically with the band
//! allocator in [`bands`] and checks its own output before returning it.

pub mod bands;
mod backend;
mod insert;
mod solver;

pub use backend::{check_contract, BackendRegistry, GenerationBackend, SolverBackend, SOLVER_ID};
pub use insert::{insert_random_nodes, InsertionReport};
pub use solver::{complete, synthesize, synthesize_relaxed};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Canvas, Category, ComponentNode, LayoutGraph};
use crate::relations::{ChannelPair, Conflict, RelationChannel, RelationMatrix};

/// How the request matrix constrains the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// Every entry binds: the output's derived relations equal the request.
    #[default]
    Exact,
    /// Only set entries bind; the output may carry additional relations.
    Asserted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub relations: RelationMatrix,
    /// Nodes whose attributes are known and must be kept, keyed by node id.
    #[serde(default)]
    pub fixed_nodes: BTreeMap<u32, ComponentNode>,
    /// Node ids the backend has to place.
    #[serde(default)]
    pub free_nodes: BTreeSet<u32>,
    pub canvas: Canvas,
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: ConstraintMode,
    /// Categories for free nodes, when known.
    #[serde(default)]
    pub known_categories: BTreeMap<u32, Category>,
    /// Pooled graph embedding. Advisory; the solver ignores it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

fn default_backend() -> String {
    SOLVER_ID.to_string()
}

impl GenerationRequest {
    /// Request with every node free.
    pub fn new(relations: RelationMatrix, canvas: Canvas) -> Self {
        let free_nodes = (1..=relations.len() as u32).collect();
        GenerationRequest {
            relations,
            fixed_nodes: BTreeMap::new(),
            free_nodes,
            canvas,
            backend: default_backend(),
            seed: 0,
            mode: ConstraintMode::Exact,
            known_categories: BTreeMap::new(),
            embedding: None,
        }
    }

    pub fn with_mode(mut self, mode: ConstraintMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Fixed and free ids must partition `1..=n`.
    pub fn check_shape(&self) -> Result<(), SynthError> {
        let n = self.relations.len() as u32;
        if n == 0 {
            return Err(SynthError::InvalidRequest("relation matrix is empty".into()));
        }
        for (id, node) in &self.fixed_nodes {
            if node.node_id != *id {
                return Err(SynthError::InvalidRequest(format!(
                    "fixed node keyed {id} carries node_id {}",
                    node.node_id
                )));
            }
            if self.free_nodes.contains(id) {
                return Err(SynthError::InvalidRequest(format!("node {id} is both fixed and free")));
            }
        }
        for id in 1..=n {
            if !self.fixed_nodes.contains_key(&id) && !self.free_nodes.contains(&id) {
                return Err(SynthError::InvalidRequest(format!("node {id} is neither fixed nor free")));
            }
        }
        let stray = self
            .fixed_nodes
            .keys()
            .chain(&self.free_nodes)
            .chain(self.known_categories.keys())
            .find(|&&id| id == 0 || id > n);
        if let Some(id) = stray {
            return Err(SynthError::InvalidRequest(format!("node {id} is outside 1..={n}")));
        }
        Ok(())
    }
}

/// Packages decoded (or edited) relation channels and the pooled embedding
/// into a request with every node free.
pub fn build_generation_input(
    m_sem: &ChannelPair,
    m_pos: &ChannelPair,
    h_a: &[f64],
    canvas: Canvas,
) -> Result<GenerationRequest, SynthError> {
    let relations = RelationMatrix::from_split(m_sem, m_pos)
        .map_err(|e| SynthError::InvalidRequest(e.to_string()))?;
    let mut req = GenerationRequest::new(relations, canvas);
    req.embedding = Some(h_a.to_vec());
    Ok(req)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Fixed,
    Solved,
    Inserted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub layout: LayoutGraph,
    pub relations_out: RelationMatrix,
    /// Provenance per node, in node order.
    pub backend_report: Vec<Provenance>,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insertion: Option<InsertionReport>,
}

/// One relation entry, with 1-based node ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub channel: RelationChannel,
    pub i: u32,
    pub j: u32,
}

impl Violation {
    pub(crate) fn at(channel: RelationChannel, i: usize, j: usize) -> Self {
        Violation {
            channel,
            i: i as u32 + 1,
            j: j as u32 + 1,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.channel, self.i, self.j)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("relation matrix has {} conflicts", .0.len())]
    Conflicts(Vec<Conflict>),
    #[error("infeasible: {reason}")]
    Infeasible {
        reason: String,
        violations: Vec<Violation>,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error("backend {0:?} is already registered")]
    DuplicateBackend(String),
    #[error("backend {backend:?} broke the generation contract on {} entries", .mismatches.len())]
    ContractViolation {
        backend: String,
        mismatches: Vec<Violation>,
        altered_fixed: Vec<u32>,
    },
}

impl SynthError {
    pub(crate) fn infeasible(reason: impl Into<String>, violations: Vec<Violation>) -> Self {
        SynthError::Infeasible {
            reason: reason.into(),
            violations,
        }
    }
}

/// Entries where `derived` fails to honour `target` under `mode`.
pub fn relation_mismatches(target: &RelationMatrix, derived: &RelationMatrix, mode: ConstraintMode) -> Vec<Violation> {
    let n = target.len();
    let mut out = Vec::new();
    for c in RelationChannel::ALL {
        for i in 0..n {
            for j in 0..n {
                let (want, got) = (target.get(c, i, j), derived.get(c, i, j));
                let bad = match mode {
                    ConstraintMode::Exact => want != got,
                    ConstraintMode::Asserted => want && !got,
                };
                if bad {
                    out.push(Violation::at(c, i, j));
                }
            }
        }
    }
    out
}
