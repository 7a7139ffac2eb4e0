use thiserror::Error;

use super::{RelationChannel, RelationMatrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForestError {
    #[error("CONTAIN cycle through nodes {0:?}")]
    Cycle(Vec<u32>),
    #[error("node {child} has several parents {parents:?}")]
    MultipleParents { child: u32, parents: Vec<u32> },
}

/// Parent/child view of the CONTAIN channel. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainForest {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl ContainForest {
    /// Builds a forest from a parent table. Panics on a cycle; callers that
    /// accept untrusted input go through [`contain_forest`].
    pub fn from_parents(parent: Vec<Option<usize>>) -> Self {
        let n = parent.len();
        let mut children = vec![Vec::new(); n];
        for (j, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(j);
            }
        }
        let forest = ContainForest { parent, children };
        assert!(forest.find_cycle().is_none(), "parent table has a cycle");
        forest
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    /// Direct children in ascending index order.
    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parent[i].is_none()).collect()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    /// True when `a` is a strict ancestor of `b`.
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = self.parent[b];
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.parent[p];
        }
        false
    }

    pub fn related(&self, a: usize, b: usize) -> bool {
        self.is_ancestor(a, b) || self.is_ancestor(b, a)
    }

    pub fn depth(&self, node: usize) -> usize {
        let mut d = 0;
        let mut cur = self.parent[node];
        while let Some(p) = cur {
            d += 1;
            cur = self.parent[p];
        }
        d
    }

    /// Path from a root down to `node`, inclusive.
    pub fn path_from_root(&self, node: usize) -> Vec<usize> {
        let mut path = vec![node];
        let mut cur = self.parent[node];
        while let Some(p) = cur {
            path.push(p);
            cur = self.parent[p];
        }
        path.reverse();
        path
    }

    /// Number of leaves in each node's subtree (a leaf counts itself).
    pub fn leaf_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.len()];
        for node in self.post_order() {
            counts[node] = if self.is_leaf(node) {
                1
            } else {
                self.children[node].iter().map(|&c| counts[c]).sum()
            };
        }
        counts
    }

    /// Pre-order traversal over all trees, roots and children ascending.
    pub fn pre_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack: Vec<usize> = self.roots().into_iter().rev().collect();
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(self.children[node].iter().rev());
        }
        out
    }

    pub fn post_order(&self) -> Vec<usize> {
        let mut out = self.pre_order();
        out.reverse();
        out
    }

    fn find_cycle(&self) -> Option<Vec<usize>> {
        for start in 0..self.len() {
            let mut seen = vec![start];
            let mut cur = self.parent[start];
            while let Some(p) = cur {
                if let Some(pos) = seen.iter().position(|&s| s == p) {
                    let mut cycle = seen[pos..].to_vec();
                    cycle.sort_unstable();
                    return Some(cycle);
                }
                seen.push(p);
                cur = self.parent[p];
            }
        }
        None
    }
}

/// Reads the CONTAIN channel as a forest.
pub fn contain_forest(m: &RelationMatrix) -> Result<ContainForest, ForestError> {
    let n = m.len();
    let mut parent = vec![None; n];
    for (j, slot) in parent.iter_mut().enumerate() {
        let parents: Vec<usize> = (0..n)
            .filter(|&i| m.get(RelationChannel::Contain, i, j))
            .collect();
        match parents.as_slice() {
            [] => {}
            [p] if *p == j => return Err(ForestError::Cycle(vec![j as u32 + 1])),
            [p] => *slot = Some(*p),
            _ => {
                return Err(ForestError::MultipleParents {
                    child: j as u32 + 1,
                    parents: parents.iter().map(|&p| p as u32 + 1).collect(),
                })
            }
        }
    }
    let mut children = vec![Vec::new(); n];
    for (j, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(j);
        }
    }
    let forest = ContainForest { parent, children };
    if let Some(cycle) = forest.find_cycle() {
        return Err(ForestError::Cycle(cycle.into_iter().map(|i| i as u32 + 1).collect()));
    }
    Ok(forest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contain(n: usize, pairs: &[(usize, usize)]) -> RelationMatrix {
        let mut m = RelationMatrix::zeros(n);
        for &(i, j) in pairs {
            m.set(RelationChannel::Contain, i - 1, j - 1, true, false);
        }
        m
    }

    #[test]
    fn parents_and_roots() {
        let f = contain_forest(&contain(4, &[(1, 2), (1, 3), (3, 4)])).unwrap();
        assert_eq!(f.parent(1), Some(0));
        assert_eq!(f.parent(2), Some(0));
        assert_eq!(f.parent(3), Some(2));
        assert_eq!(f.roots(), vec![0]);
        assert_eq!(f.children(0), &[1, 2]);
        assert!(f.is_ancestor(0, 3));
        assert_eq!(f.leaf_counts(), vec![2, 1, 1, 1]);
    }

    #[test]
    fn empty_channel_gives_all_roots() {
        let f = contain_forest(&RelationMatrix::zeros(4)).unwrap();
        assert_eq!(f.roots(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_cycle_is_rejected() {
        assert_eq!(
            contain_forest(&contain(2, &[(1, 2), (2, 1)])),
            Err(ForestError::Cycle(vec![1, 2]))
        );
    }

    #[test]
    fn multiple_parents_rejected() {
        assert!(matches!(
            contain_forest(&contain(3, &[(1, 3), (2, 3)])),
            Err(ForestError::MultipleParents { child: 3, .. })
        ));
    }
}
