use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::EncodedDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Shuffled partition of `0..n` into `k` folds whose sizes differ by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::Argument(format!("need 2 <= k <= n, got k={k}, n={n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignments[row] = pos % k;
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

/// Draws `group_sizes[g]` rows uniformly without replacement from each listed
/// group; groups not listed are kept whole. Row order is preserved.
pub fn balanced_subsample(
    ds: &EncodedDataset,
    group_sizes: &BTreeMap<u8, usize>,
    seed: u64,
) -> Result<EncodedDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(ds.n_rows());
    for group in 0..=1u8 {
        let rows = ds.group_rows(group);
        match group_sizes.get(&group) {
            Some(&want) if want > rows.len() => {
                return Err(Error::Argument(format!(
                    "requested {want} rows from group s={group}, which has {}",
                    rows.len()
                )))
            }
            Some(&want) => {
                keep.extend(index::sample(&mut rng, rows.len(), want).into_iter().map(|i| rows[i]))
            }
            None => keep.extend(rows),
        }
    }
    if let Some(bad) = group_sizes.keys().find(|&&g| g > 1) {
        return Err(Error::Argument(format!("unknown group s={bad}")));
    }
    keep.sort_unstable();
    Ok(ds.subset(&keep))
}

/// Caps the majority group (`s = 1`) at the size of the minority group.
pub fn balance_groups(ds: &EncodedDataset, seed: u64) -> Result<EncodedDataset> {
    let n0 = ds.group_rows(0).len();
    let n1 = ds.group_rows(1).len();
    balanced_subsample(ds, &BTreeMap::from([(1u8, n0.min(n1))]), seed)
}
