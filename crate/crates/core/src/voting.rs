//! Two-stage voting: per-run feature votes across tasks, then Borda
//! aggregation of the per-run rankings, then matching the single run that
//! best agrees with the aggregate.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default membership threshold on |weight|.
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTable {
    pub counts: Vec<usize>,
    pub n_polls: usize,
}

impl VoteTable {
    pub fn empty(d: usize) -> Self {
        Self {
            counts: vec![0; d],
            n_polls: 0,
        }
    }

    pub fn merge(&mut self, other: &VoteTable) -> Result<()> {
        if other.counts.len() != self.counts.len() {
            return Err(invalid("vote tables cover different feature sets"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_polls += other.n_polls;
        Ok(())
    }
}

/// Stage-one result for one trained weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskVote {
    /// One poll per task.
    pub table: VoteTable,
    /// Features by count, then by summed |weight|, then by index.
    pub ranking: Vec<usize>,
    pub magnitude: Vec<f64>,
}

impl TaskVote {
    /// Whether the feature is active in any task of this run.
    pub fn experiment_votes(&self) -> VoteTable {
        VoteTable {
            counts: self.table.counts.iter().map(|&c| usize::from(c > 0)).collect(),
            n_polls: 1,
        }
    }
}

/// Feature `i` gets a vote from task `t` when `|W[i, t]| > eps`.
pub fn task_vote(w: ArrayView2<f64>, eps: f64) -> Result<TaskVote> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid(format!("vote threshold must be positive, got {eps}")));
    }
    let counts: Vec<usize> = w
        .rows()
        .into_iter()
        .map(|r| r.iter().filter(|v| v.abs() > eps).count())
        .collect();
    let magnitude: Vec<f64> = w.rows().into_iter().map(|r| r.iter().map(|v| v.abs()).sum()).collect();
    let mut ranking: Vec<usize> = (0..counts.len()).collect();
    ranking.sort_by(|&a, &b| {
        counts[b]
            .cmp(&counts[a])
            .then(magnitude[b].total_cmp(&magnitude[a]))
            .then(a.cmp(&b))
    });
    Ok(TaskVote {
        table: VoteTable {
            counts,
            n_polls: w.ncols(),
        },
        ranking,
        magnitude,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRanking {
    /// Feature indices, best first.
    pub features: Vec<usize>,
    /// Borda score of each entry of `features`.
    pub scores: Vec<u64>,
    /// One note per block of tied scores.
    pub tie_notes: Vec<String>,
}

impl StabilityRanking {
    pub fn top(&self, p: usize) -> &[usize] {
        &self.features[..p.min(self.features.len())]
    }

    /// 1-based position of each feature.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.features.len()];
        for (r, &f) in self.features.iter().enumerate() {
            pos[f] = r + 1;
        }
        pos
    }
}

fn check_permutation(r: &[usize], d: usize) -> bool {
    let mut seen = vec![false; d];
    r.len() == d && r.iter().all(|&f| f < d && !std::mem::replace(&mut seen[f], true))
}

/// Borda count: a feature at 1-based position `p` earns `d - p` points per run.
pub fn aggregate_ranking(rankings: &[Vec<usize>]) -> Result<StabilityRanking> {
    let d = rankings
        .first()
        .ok_or_else(|| invalid("no rankings to aggregate"))?
        .len();
    if rankings.iter().any(|r| !check_permutation(r, d)) {
        return Err(invalid("rankings are not permutations of one feature set"));
    }
    let mut score = vec![0u64; d];
    for r in rankings {
        for (pos, &f) in r.iter().enumerate() {
            score[f] += (d - 1 - pos) as u64;
        }
    }
    let mut features: Vec<usize> = (0..d).collect();
    features.sort_by(|&a, &b| score[b].cmp(&score[a]).then(a.cmp(&b)));
    let scores: Vec<u64> = features.iter().map(|&f| score[f]).collect();
    let mut tie_notes = Vec::new();
    let mut start = 0;
    while start < d {
        let end = (start..d).find(|&i| scores[i] != scores[start]).unwrap_or(d);
        if end - start > 1 {
            tie_notes.push(format!(
                "positions {}-{} tie at score {}; ordered by feature index",
                start + 1,
                end,
                scores[start]
            ));
        }
        start = end;
    }
    Ok(StabilityRanking {
        features,
        scores,
        tie_notes,
    })
}

/// Index of the run whose top-`p` features overlap the stable top-`p` most,
/// lowest test RMSE among equals, then lowest index.
pub fn select_best_model(
    stable: &StabilityRanking,
    run_rankings: &[Vec<usize>],
    run_rmse: &[f64],
    p: usize,
) -> Result<usize> {
    if run_rankings.is_empty() || run_rankings.len() != run_rmse.len() {
        return Err(invalid("need one RMSE per ranked run, and at least one run"));
    }
    let d = stable.features.len();
    if p == 0 || p > d {
        return Err(invalid(format!("match size {p} must lie in 1..={d}")));
    }
    let target = stable.top(p);
    let overlap = |r: &[usize]| r.iter().take(p).filter(|f| target.contains(f)).count();
    let best = (0..run_rankings.len())
        .min_by(|&a, &b| {
            overlap(&run_rankings[b])
                .cmp(&overlap(&run_rankings[a]))
                .then(run_rmse[a].total_cmp(&run_rmse[b]))
                .then(a.cmp(&b))
        })
        .expect("non-empty");
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn zero_matrix_has_no_votes() {
        let v = task_vote(Array2::zeros((4, 42)).view(), DEFAULT_EPS).unwrap();
        assert_eq!(v.table.counts, vec![0; 4]);
        assert_eq!(v.table.n_polls, 42);
    }

    #[test]
    fn constructed_ranking() {
        let w = Array2::from_shape_fn((3, 42), |(i, t)| match i {
            0 => 0.1,
            1 if t < 20 => 5.0,
            _ => 0.0,
        });
        let v = task_vote(w.view(), DEFAULT_EPS).unwrap();
        assert_eq!(v.table.counts, vec![42, 20, 0]);
        assert_eq!(v.ranking, vec![0, 1, 2]);
        assert_eq!(v.experiment_votes().counts, vec![1, 1, 0]);
    }

    #[test]
    fn bad_eps() {
        assert!(task_vote(Array2::zeros((1, 1)).view(), 0.0).is_err());
    }

    #[test]
    fn hand_borda_tie() {
        let s = aggregate_ranking(&[vec![0, 1, 2], vec![1, 0, 2]]).unwrap();
        assert_eq!(s.features, vec![0, 1, 2]);
        assert_eq!(s.scores, vec![3, 3, 0]);
        assert_eq!(s.tie_notes.len(), 1);
    }

    #[test]
    fn unanimity_and_identity() {
        let r = vec![3, 1, 0, 2];
        assert_eq!(aggregate_ranking(std::slice::from_ref(&r)).unwrap().features, r);
        assert_eq!(aggregate_ranking(&vec![r.clone(); 100]).unwrap().features, r);
    }

    #[test]
    fn inconsistent_universe() {
        assert!(aggregate_ranking(&[vec![0, 1], vec![0, 1, 2]]).is_err());
        assert!(aggregate_ranking(&[vec![0, 0, 1]]).is_err());
        assert!(aggregate_ranking(&[]).is_err());
    }

    #[test]
    fn best_model_rules() {
        let stable = aggregate_ranking(&[vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(select_best_model(&stable, &[vec![3, 2, 1, 0]], &[9.0], 2).unwrap(), 0);
        // full match beats better rmse with partial match
        let runs = vec![vec![0, 2, 1, 3], vec![1, 0, 2, 3]];
        assert_eq!(select_best_model(&stable, &runs, &[0.1, 0.9], 2).unwrap(), 1);
        // equal overlap: lower rmse wins
        let runs = vec![vec![0, 1, 2, 3], vec![1, 0, 3, 2]];
        assert_eq!(select_best_model(&stable, &runs, &[0.5, 0.4], 2).unwrap(), 1);
        assert!(select_best_model(&stable, &runs, &[0.5], 2).is_err());
    }

    fn perm(d: usize) -> impl Strategy<Value = Vec<usize>> {
        Just((0..d).collect::<Vec<_>>()).prop_shuffle()
    }

    proptest! {
        #[test]
        fn aggregation_is_permutation_invariant(
            runs in prop::collection::vec(perm(6), 1..8),
            rot in 0usize..8,
        ) {
            let a = aggregate_ranking(&runs).unwrap();
            let mut shuffled = runs.clone();
            shuffled.rotate_left(rot % runs.len());
            shuffled.reverse();
            prop_assert_eq!(a.clone(), aggregate_ranking(&shuffled).unwrap());
            prop_assert!(a.scores.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(check_permutation(&a.features, 6));
        }

        #[test]
        fn counts_grow_and_ignore_scale(
            vals in prop::collection::vec(-1.0..1.0f64, 12),
            c in 1.0..100.0f64,
        ) {
            let w = Array2::from_shape_vec((3, 4), vals).unwrap();
            let v = task_vote(w.view(), 1e-3).unwrap();
            let scaled = task_vote((&w * c).view(), 1e-3).unwrap();
            for (a, b) in v.table.counts.iter().zip(&scaled.table.counts) {
                prop_assert!(b >= a);
            }
            let mut acc = VoteTable::empty(3);
            let before = acc.clone();
            acc.merge(&v.table).unwrap();
            prop_assert!(acc.counts.iter().zip(&before.counts).all(|(a, b)| a >= b));
            let mut other = VoteTable::empty(3);
            other.merge(&scaled.table).unwrap();
            other.merge(&v.table).unwrap();
            acc.merge(&scaled.table).unwrap();
            prop_assert_eq!(acc, other);
        }
    }
}
