use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{rng, DatasetError};

/// Disjoint train/validation/test partition of entry ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Seeded shuffle followed by a 7:2:1 cut with sizes `floor(0.7n)`,
/// `floor(0.2n)` and the remainder.
pub fn split<S: AsRef<str>>(entries: &[S], seed: u64) -> Result<DatasetSplit, DatasetError> {
    let n = entries.len();
    if n < 10 {
        return Err(DatasetError::TooFewEntries(n));
    }
    let mut ids: Vec<String> = entries.iter().map(|s| s.as_ref().to_string()).collect();
    ids.shuffle(&mut rng(seed));
    let n_train = n * 7 / 10;
    let n_val = n * 2 / 10;
    let test = ids.split_off(n_train + n_val);
    let val = ids.split_off(n_train);
    Ok(DatasetSplit {
        train: ids,
        val,
        test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("e{i}")).collect()
    }

    #[test]
    fn hundred_entries() {
        let s = split(&ids(100), 7).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 20, 10));
    }

    #[test]
    fn corpus_scale_sizes() {
        let s = split(&ids(68_475), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (47_932, 13_695, 6_848));
    }

    #[test]
    fn deterministic_partition() {
        let a = split(&ids(57), 3).unwrap();
        assert_eq!(a, split(&ids(57), 3).unwrap());
        let mut all: Vec<_> = a.train.iter().chain(&a.val).chain(&a.test).cloned().collect();
        all.sort();
        let mut expected = ids(57);
        expected.sort();
        assert_eq!(all, expected);
    }

    #[test]
    fn too_few_entries() {
        assert!(matches!(split(&ids(9), 0), Err(DatasetError::TooFewEntries(9))));
    }
}
