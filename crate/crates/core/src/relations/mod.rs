//! Semantic and positional relation matrices.
//!
//! A [`RelationMatrix`] holds four binary `n x n` channels. TOP and LEFT are
//! positional (`m[i][j] = 1` means node `i` is above / left of node `j`);
//! PARALLEL and CONTAIN are semantic (`CONTAIN[i][j] = 1` means `i` is the
//! direct parent of `j`). Every set entry also records whether a human put it
//! there, which drives conflict resolution in [`apply_edit`].

mod derive;
mod edit;
mod forest;
mod validate;

pub use derive::{derive_from_boxes, derive_relations, direct_parents, CONTAIN_RATIO, POSITION_EPS};
pub use edit::{apply_edit, ClearedEntry, Edit, EditError, EditOp, EditOutcome, Origin};
pub use forest::{contain_forest, ContainForest, ForestError};
pub use validate::{validate, Conflict, ConflictKind};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RelationChannel {
    Top,
    Left,
    Parallel,
    Contain,
}

impl RelationChannel {
    pub const ALL: [RelationChannel; 4] = [
        RelationChannel::Top,
        RelationChannel::Left,
        RelationChannel::Parallel,
        RelationChannel::Contain,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_positional(self) -> bool {
        matches!(self, RelationChannel::Top | RelationChannel::Left)
    }

    pub fn is_symmetric(self) -> bool {
        self == RelationChannel::Parallel
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationChannel::Top => "TOP",
            RelationChannel::Left => "LEFT",
            RelationChannel::Parallel => "PARALLEL",
            RelationChannel::Contain => "CONTAIN",
        }
    }
}

impl fmt::Display for RelationChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationChannel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationChannel::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown relation channel {s:?}"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("entry ({i}, {j}) is out of range for {n} nodes")]
    OutOfRange { i: u32, j: u32, n: usize },
}

/// Four binary relation channels over `n` nodes, with per-entry origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct RelationMatrix {
    n: usize,
    bits: [Vec<bool>; 4],
    human: [Vec<bool>; 4],
}

impl RelationMatrix {
    pub fn zeros(n: usize) -> Self {
        let blank = || vec![false; n * n];
        RelationMatrix {
            n,
            bits: [blank(), blank(), blank(), blank()],
            human: [blank(), blank(), blank(), blank()],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, channel: RelationChannel, i: usize, j: usize) -> bool {
        self.bits[channel.index()][i * self.n + j]
    }

    /// Whether the entry is set and was set by a human edit.
    #[inline]
    pub fn is_human(&self, channel: RelationChannel, i: usize, j: usize) -> bool {
        self.human[channel.index()][i * self.n + j]
    }

    /// Writes one entry without mirroring; `human` is ignored when clearing.
    pub fn set(&mut self, channel: RelationChannel, i: usize, j: usize, value: bool, human: bool) {
        let k = i * self.n + j;
        self.bits[channel.index()][k] = value;
        self.human[channel.index()][k] = value && human;
    }

    /// Marks every set entry as human-authored.
    pub fn mark_all_human(&mut self) {
        for c in 0..4 {
            self.human[c] = self.bits[c].clone();
        }
    }

    pub fn channel(&self, channel: RelationChannel) -> &[bool] {
        &self.bits[channel.index()]
    }

    /// Set entries `(i, j)` of one channel in row-major order.
    pub fn entries(&self, channel: RelationChannel) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.bits[channel.index()]
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(k, _)| (k / n, k % n))
    }

    /// Targets `j` with `m[i][j] = 1` in one channel, ascending.
    pub fn row(&self, channel: RelationChannel, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.get(channel, i, j)).collect()
    }

    pub fn count(&self, channel: RelationChannel) -> usize {
        self.bits[channel.index()].iter().filter(|b| **b).count()
    }

    /// Same relations, origin flags dropped.
    pub fn values_eq(&self, other: &RelationMatrix) -> bool {
        self.n == other.n && self.bits == other.bits
    }

    pub fn without_origin(&self) -> RelationMatrix {
        let mut m = self.clone();
        m.human = RelationMatrix::zeros(self.n).human;
        m
    }

    /// Relabels nodes: index `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> RelationMatrix {
        assert_eq!(perm.len(), self.n);
        let mut out = RelationMatrix::zeros(self.n);
        for c in RelationChannel::ALL {
            for i in 0..self.n {
                for j in 0..self.n {
                    if self.get(c, i, j) {
                        out.set(c, perm[i], perm[j], true, self.is_human(c, i, j));
                    }
                }
            }
        }
        out
    }

    /// Clears every entry touching one of `nodes`.
    pub fn isolate(&self, nodes: &[usize]) -> RelationMatrix {
        let mut out = self.clone();
        for c in RelationChannel::ALL {
            for &k in nodes {
                for other in 0..self.n {
                    out.set(c, k, other, false, false);
                    out.set(c, other, k, false, false);
                }
            }
        }
        out
    }

    /// Matrix over `n + extra` nodes with this one in the top-left block.
    pub fn grown(&self, extra: usize) -> RelationMatrix {
        let m = self.n + extra;
        let mut out = RelationMatrix::zeros(m);
        for c in RelationChannel::ALL {
            for (i, j) in self.entries(c) {
                out.set(c, i, j, true, self.is_human(c, i, j));
            }
        }
        out
    }

    /// The leading `k x k` block.
    pub fn leading(&self, k: usize) -> RelationMatrix {
        assert!(k <= self.n);
        let mut out = RelationMatrix::zeros(k);
        for c in RelationChannel::ALL {
            for (i, j) in self.entries(c) {
                if i < k && j < k {
                    out.set(c, i, j, true, self.is_human(c, i, j));
                }
            }
        }
        out
    }

    pub fn ensure_same_size(&self, other: &RelationMatrix) -> Result<(), MatrixError> {
        if self.n != other.n {
            return Err(MatrixError::DimensionMismatch(self.n, other.n));
        }
        Ok(())
    }

    /// Dense `0/1` rows for one channel.
    pub fn dense(&self, channel: RelationChannel) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(channel, i, j) as u8).collect())
            .collect()
    }

    /// Semantic (PARALLEL, CONTAIN) and positional (TOP, LEFT) halves.
    pub fn split(&self) -> (ChannelPair, ChannelPair) {
        (
            ChannelPair {
                first: self.dense(RelationChannel::Parallel),
                second: self.dense(RelationChannel::Contain),
            },
            ChannelPair {
                first: self.dense(RelationChannel::Top),
                second: self.dense(RelationChannel::Left),
            },
        )
    }

    /// Reassembles a matrix from its semantic and positional halves.
    pub fn from_split(semantic: &ChannelPair, positional: &ChannelPair) -> Result<Self, MatrixError> {
        let n = semantic.first.len();
        for m in [&semantic.first, &semantic.second, &positional.first, &positional.second] {
            if m.len() != n {
                return Err(MatrixError::DimensionMismatch(n, m.len()));
            }
            if let Some(row) = m.iter().find(|r| r.len() != n) {
                return Err(MatrixError::DimensionMismatch(n, row.len()));
            }
        }
        let mut out = RelationMatrix::zeros(n);
        let pairs = [
            (RelationChannel::Parallel, &semantic.first),
            (RelationChannel::Contain, &semantic.second),
            (RelationChannel::Top, &positional.first),
            (RelationChannel::Left, &positional.second),
        ];
        for (c, m) in pairs {
            for (i, row) in m.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    if *v != 0 {
                        out.set(c, i, j, true, false);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Two dense channels: `(PARALLEL, CONTAIN)` for the semantic half and
/// `(TOP, LEFT)` for the positional half.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelPair {
    pub first: Vec<Vec<u8>>,
    pub second: Vec<Vec<u8>>,
}

/// Wire form: 1-based node-id pairs per channel, plus human-authored entries.
#[derive(Serialize, Deserialize)]
struct RawMatrix {
    n: usize,
    #[serde(rename = "TOP")]
    top: Vec<[u32; 2]>,
    #[serde(rename = "LEFT")]
    left: Vec<[u32; 2]>,
    #[serde(rename = "PARALLEL")]
    parallel: Vec<[u32; 2]>,
    #[serde(rename = "CONTAIN")]
    contain: Vec<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    human: Vec<(RelationChannel, u32, u32)>,
}

impl TryFrom<RawMatrix> for RelationMatrix {
    type Error = MatrixError;

    fn try_from(raw: RawMatrix) -> Result<Self, MatrixError> {
        let n = raw.n;
        let mut m = RelationMatrix::zeros(n);
        let check = |i: u32, j: u32| -> Result<(usize, usize), MatrixError> {
            if i == 0 || j == 0 || i as usize > n || j as usize > n {
                Err(MatrixError::OutOfRange { i, j, n })
            } else {
                Ok((i as usize - 1, j as usize - 1))
            }
        };
        let lists = [
            (RelationChannel::Top, &raw.top),
            (RelationChannel::Left, &raw.left),
            (RelationChannel::Parallel, &raw.parallel),
            (RelationChannel::Contain, &raw.contain),
        ];
        for (c, list) in lists {
            for &[i, j] in list.iter() {
                let (a, b) = check(i, j)?;
                m.set(c, a, b, true, false);
            }
        }
        for &(c, i, j) in &raw.human {
            let (a, b) = check(i, j)?;
            if m.get(c, a, b) {
                m.set(c, a, b, true, true);
            }
        }
        Ok(m)
    }
}

impl From<RelationMatrix> for RawMatrix {
    fn from(m: RelationMatrix) -> Self {
        let pairs = |c: RelationChannel| -> Vec<[u32; 2]> {
            m.entries(c)
                .map(|(i, j)| [i as u32 + 1, j as u32 + 1])
                .collect()
        };
        let mut human = Vec::new();
        for c in RelationChannel::ALL {
            for (i, j) in m.entries(c) {
                if m.is_human(c, i, j) {
                    human.push((c, i as u32 + 1, j as u32 + 1));
                }
            }
        }
        RawMatrix {
            n: m.n,
            top: pairs(RelationChannel::Top),
            left: pairs(RelationChannel::Left),
            parallel: pairs(RelationChannel::Parallel),
            contain: pairs(RelationChannel::Contain),
            human,
        }
    }
}
