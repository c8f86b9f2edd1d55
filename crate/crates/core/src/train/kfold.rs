use rand::seq::SliceRandom;

use crate::rng::rng_for;
use crate::{Error, Result};

/// Assignment of item indices to test folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    assignments: Vec<usize>,
    folds: usize,
}

/// Shuffles `0..n` with the seed and deals the result round-robin into
/// `folds` folds, so fold sizes differ by at most one.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::invalid(format!("folds must be ≥ 2, got {folds}")));
    }
    if n < folds {
        return Err(Error::invalid(format!("{n} items cannot fill {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, "folds", 0));
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % folds;
    }
    Ok(FoldPlan { assignments, folds })
}

impl FoldPlan {
    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Fold id per item.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}
