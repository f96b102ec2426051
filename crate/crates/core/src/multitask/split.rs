use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;

/// Fraction of the real rows held out for testing.
pub const TEST_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Sorted.
    pub train_rows: Vec<usize>,
    /// Sorted.
    pub test_rows: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    /// Hold out `round(fraction * n_real)` (at least one) of the first
    /// `n_real` rows; rows from `n_real` to `n_total` are synthetic and
    /// always train.
    pub fn new(n_real: usize, n_total: usize, fraction: f64, seed: u64) -> Result<Self> {
        if n_real < 2 || n_total < n_real {
            return Err(invalid(format!("cannot split {n_real} real rows of {n_total}")));
        }
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(invalid(format!("test fraction {fraction} must lie in (0, 1)")));
        }
        let n_test = ((fraction * n_real as f64).round() as usize).clamp(1, n_real - 1);
        let mut perm: Vec<usize> = (0..n_real).collect();
        perm.shuffle(&mut rng::seeded(seed));
        let mut test_rows = perm[..n_test].to_vec();
        let mut train_rows: Vec<usize> = perm[n_test..].iter().copied().chain(n_real..n_total).collect();
        test_rows.sort_unstable();
        train_rows.sort_unstable();
        Ok(Self {
            train_rows,
            test_rows,
            seed,
        })
    }
}

/// Fold label (0-based) for each of `n` rows; depends only on `(seed, n, folds)`.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(invalid(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(invalid(format!("{n} rows cannot fill {folds} folds")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let mut labels = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        labels[row] = pos % folds;
    }
    Ok(labels)
}
