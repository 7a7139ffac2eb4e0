use rand::Rng;

use super::{rng, DatasetError};

/// Extra draws allowed when the candidate has the same category multiset.
pub const MAX_RESAMPLES: usize = 16;

/// Picks a pool index other than `gt`, uniformly, preferring candidates whose
/// category histogram differs from the ground truth's.
pub fn sample_negative(gt: usize, histograms: &[[usize; 6]], seed: u64) -> Result<usize, DatasetError> {
    let n = histograms.len();
    if n < 2 {
        return Err(DatasetError::PoolTooSmall(n));
    }
    if gt >= n {
        return Err(DatasetError::NotInPool(gt));
    }
    let mut r = rng(seed);
    let mut pick = 0;
    for _ in 0..=MAX_RESAMPLES {
        let k = r.random_range(0..n - 1);
        pick = if k >= gt { k + 1 } else { k };
        if histograms[pick] != histograms[gt] {
            break;
        }
    }
    Ok(pick)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_entry_pool_is_forced() {
        let pool = [[1, 0, 0, 0, 0, 0], [1, 0, 0, 0, 0, 0]];
        for seed in 0..20 {
            assert_eq!(sample_negative(0, &pool, seed).unwrap(), 1);
            assert_eq!(sample_negative(1, &pool, seed).unwrap(), 0);
        }
    }

    #[test]
    fn prefers_different_multiset() {
        let mut pool = vec![[2, 1, 0, 0, 0, 0]; 10];
        pool[7] = [1, 0, 0, 0, 0, 0];
        let hits = (0..200)
            .filter(|&s| sample_negative(0, &pool, s).unwrap() == 7)
            .count();
        assert!(hits > 150, "{hits}");
    }

    #[test]
    fn pool_size_errors() {
        assert!(matches!(sample_negative(0, &[[0; 6]], 0), Err(DatasetError::PoolTooSmall(1))));
        assert!(matches!(sample_negative(5, &[[0; 6]; 3], 0), Err(DatasetError::NotInPool(5))));
    }
}
