//! Bagged CART regression trees, used only for their impurity-decrease
//! feature importances.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Method, SelectionResult};
use crate::error::{invalid, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap_ratio: f64,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 4,
            bootstrap_ratio: 1.0,
            min_leaf: 2,
            max_features: None,
            seed: 0,
        }
    }
}

struct Split {
    feature: usize,
    /// Rows going left are those with `x <= threshold`.
    threshold: f64,
    decrease: f64,
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    cfg: &'a ForestConfig,
    max_features: usize,
    importance: Vec<f64>,
}

fn sse(rows: &[usize], y: ArrayView1<f64>) -> f64 {
    let n = rows.len() as f64;
    let (s, s2) = rows.iter().fold((0.0, 0.0), |(s, s2), &r| (s + y[r], s2 + y[r] * y[r]));
    (s2 - s * s / n).max(0.0)
}

impl TreeBuilder<'_> {
    fn grow<R: Rng>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) {
        if depth >= self.cfg.max_depth || rows.len() < 2 * self.cfg.min_leaf {
            return;
        }
        let parent = sse(rows, self.y);
        if parent <= 1e-14 * rows.len() as f64 {
            return;
        }
        let Some(split) = self.best_split(rows, parent, rng) else {
            return;
        };
        self.importance[split.feature] += split.decrease;
        let (f, thr) = (split.feature, split.threshold);
        let x = self.x;
        rows.sort_by(|&a, &b| (x[[a, f]] > thr).cmp(&(x[[b, f]] > thr)).then(a.cmp(&b)));
        let n_left = rows.iter().filter(|&&r| x[[r, f]] <= thr).count();
        let (left, right) = rows.split_at_mut(n_left);
        self.grow(left, depth + 1, rng);
        self.grow(right, depth + 1, rng);
    }

    fn best_split<R: Rng>(&self, rows: &[usize], parent: f64, rng: &mut R) -> Option<Split> {
        let d = self.x.ncols();
        let candidates = sample(rng, d, self.max_features.min(d));
        let min_leaf = self.cfg.min_leaf.max(1);
        let n = rows.len();
        let mut best: Option<Split> = None;
        let mut sorted = rows.to_vec();
        for f in candidates.iter() {
            let col = self.x.column(f);
            sorted.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let total: f64 = sorted.iter().map(|&r| self.y[r]).sum();
            let total2: f64 = sorted.iter().map(|&r| self.y[r] * self.y[r]).sum();
            let (mut s, mut s2) = (0.0, 0.0);
            for p in 1..n {
                let yv = self.y[sorted[p - 1]];
                s += yv;
                s2 += yv * yv;
                if p < min_leaf || n - p < min_leaf {
                    continue;
                }
                let (lo, hi) = (col[sorted[p - 1]], col[sorted[p]]);
                if lo >= hi {
                    continue;
                }
                let (nl, nr) = (p as f64, (n - p) as f64);
                let left = s2 - s * s / nl;
                let right = (total2 - s2) - (total - s) * (total - s) / nr;
                let decrease = parent - left.max(0.0) - right.max(0.0);
                if decrease > best.as_ref().map_or(1e-12 * parent, |b| b.decrease) {
                    best = Some(Split {
                        feature: f,
                        threshold: 0.5 * (lo + hi),
                        decrease,
                    });
                }
            }
        }
        best
    }
}

/// Total impurity (SSE) decrease per feature over a bagged forest, normalized
/// to sum to one; `selected` holds the top `m` features.
pub fn forest_importance<'a>(
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    cfg: &'a ForestConfig,
    m: usize,
) -> Result<SelectionResult> {
    let (n, d) = x.dim();
    if n < 5 {
        return Err(invalid(format!("forest importance needs at least 5 samples, got {n}")));
    }
    if y.len() != n {
        return Err(invalid("target length does not match rows"));
    }
    if d == 0 || m == 0 || m > d {
        return Err(invalid(format!("selection size {m} must lie in 1..={d}")));
    }
    if cfg.n_trees == 0 || cfg.bootstrap_ratio.is_nan() || cfg.bootstrap_ratio <= 0.0 {
        return Err(invalid("forest needs at least one tree and a positive bootstrap ratio"));
    }
    let max_features = cfg
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let n_boot = ((cfg.bootstrap_ratio * n as f64).round() as usize).max(2);

    let mut importance = vec![0.0; d];
    // one independent stream per tree: schedule-independent if parallelized
    for tree in 0..cfg.n_trees {
        let mut rng = rng::stream(cfg.seed, tree as u64);
        let mut rows: Vec<usize> = (0..n_boot).map(|_| rng.random_range(0..n)).collect();
        let mut builder = TreeBuilder {
            x,
            y,
            cfg,
            max_features,
            importance: vec![0.0; d],
        };
        builder.grow(&mut rows, 0, &mut rng);
        for (acc, v) in importance.iter_mut().zip(builder.importance) {
            *acc += v;
        }
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|v| *v /= total);
    } else {
        importance.fill(1.0 / d as f64);
    }
    Ok(SelectionResult::top_m(Method::Forest, importance, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};
    use rand_distr::StandardNormal;

    fn noise_matrix(seed: u64, n: usize, d: usize) -> Array2<f64> {
        let mut r = rng::seeded(seed);
        Array2::from_shape_simple_fn((n, d), || r.sample(StandardNormal))
    }

    #[test]
    fn step_target_concentrates_on_driver() {
        let mut wins = 0;
        for seed in 0..50 {
            let x = noise_matrix(seed, 100, 3);
            let y = Array1::from_iter(x.column(0).iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }));
            let cfg = ForestConfig {
                seed,
                n_trees: 50,
                ..Default::default()
            };
            let res = forest_importance(x.view(), y.view(), &cfg, 2).unwrap();
            if res.scores[0] > 0.9 {
                wins += 1;
            }
        }
        assert!(wins > 25, "x1 dominated in only {wins}/50 seeds");
    }

    #[test]
    fn pure_noise_spreads_importance() {
        let d = 10;
        let mut spread = 0;
        for seed in 0..50 {
            let x = noise_matrix(seed, 60, d);
            let y = noise_matrix(seed + 1000, 60, 1).column(0).to_owned();
            let cfg = ForestConfig {
                seed,
                n_trees: 50,
                ..Default::default()
            };
            let res = forest_importance(x.view(), y.view(), &cfg, 3).unwrap();
            if res.scores.iter().all(|&s| s <= 3.0 / d as f64) {
                spread += 1;
            }
        }
        assert!(spread >= 45, "only {spread}/50 seeds stayed below 3x uniform");
    }

    #[test]
    fn importances_form_probability_vector() {
        let x = noise_matrix(1, 40, 6);
        let y = x.column(2).mapv(|v| v * v);
        let res = forest_importance(x.view(), y.view(), &ForestConfig::default(), 3).unwrap();
        assert!(res.scores.iter().all(|&s| s >= 0.0));
        assert!((res.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(res.selected.len(), 3);
    }

    #[test]
    fn constant_target_gives_uniform() {
        let x = noise_matrix(2, 10, 4);
        let y = Array1::from_elem(10, 3.0);
        let res = forest_importance(x.view(), y.view(), &ForestConfig::default(), 2).unwrap();
        assert!(res.scores.iter().all(|&s| (s - 0.25).abs() < 1e-15));
    }

    #[test]
    fn rejects_tiny_samples() {
        let x = noise_matrix(3, 4, 2);
        let y = Array1::zeros(4);
        assert!(forest_importance(x.view(), y.view(), &ForestConfig::default(), 1).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let x = noise_matrix(4, 30, 5);
        let y = x.column(1).to_owned();
        let cfg = ForestConfig {
            seed: 9,
            ..Default::default()
        };
        let a = forest_importance(x.view(), y.view(), &cfg, 2).unwrap();
        let b = forest_importance(x.view(), y.view(), &cfg, 2).unwrap();
        assert_eq!(a, b);
    }
}
