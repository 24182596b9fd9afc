use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint folds covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Indices outside fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }

    /// Indices of fold `f`, ascending.
    pub fn dev_indices(&self, f: usize) -> Vec<usize> {
        let mut idx = self.folds[f].clone();
        idx.sort_unstable();
        idx
    }
}

/// Shuffles `0..n` with a seeded permutation and deals the indices
/// round-robin into `k` folds.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 || k > n {
        return Err(Error::config(format!("k-fold needs 2 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (i, idx) in order.into_iter().enumerate() {
        folds[i % k].push(idx);
    }
    Ok(FoldSplit { folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let s = kfold_split(10, 10, 3).unwrap();
        assert!(s.folds.iter().all(|f| f.len() == 1));
        let mut sizes: Vec<usize> = kfold_split(10, 3, 3).unwrap().folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert!(kfold_split(3, 4, 0).is_err());
        assert!(kfold_split(3, 1, 0).is_err());
        assert_eq!(kfold_split(20, 4, 9).unwrap(), kfold_split(20, 4, 9).unwrap());
    }

    #[test]
    fn train_and_dev_partition() {
        let s = kfold_split(11, 3, 1).unwrap();
        for f in 0..3 {
            let mut all = s.train_indices(f);
            all.extend(s.dev_indices(f));
            all.sort_unstable();
            assert_eq!(all, (0..11).collect::<Vec<_>>());
        }
    }
}
