use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::metrics::rmse_full;
use super::split::{fold_assignment, SplitPlan, TEST_FRACTION};
use super::TaskSpec;
use crate::error::{invalid, Result};
use crate::featureprep::standard_scale;
use crate::rng::derive_seed;
use crate::solvers::{GramProblem, Model, PenaltyConfig, SolverOptions, WeightMatrix};

/// Candidate values per penalty weight. FSGL searches the full product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub lambda3: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        let v = vec![1e-3, 1e-2, 1e-1, 1.0, 10.0];
        Self {
            lambda1: v.clone(),
            lambda2: v.clone(),
            lambda3: v,
        }
    }
}

fn descending(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v
}

impl GridSpec {
    pub fn single(cfg: PenaltyConfig) -> Self {
        Self {
            lambda1: vec![cfg.lambda1],
            lambda2: vec![cfg.lambda2],
            lambda3: vec![cfg.lambda3],
        }
    }

    /// Grid points, largest penalties first so each fit can warm-start the next.
    pub fn points(&self, model: Model) -> Result<Vec<PenaltyConfig>> {
        let l1 = descending(&self.lambda1);
        if l1.is_empty() {
            return Err(invalid("lambda grid is empty"));
        }
        let pts: Vec<PenaltyConfig> = match model {
            Model::Ridge => l1.iter().map(|&l| PenaltyConfig::ridge(l)).collect(),
            Model::Lasso => l1.iter().map(|&l| PenaltyConfig::lasso(l)).collect(),
            Model::Fsgl => {
                let (l2, l3) = (descending(&self.lambda2), descending(&self.lambda3));
                if l2.is_empty() || l3.is_empty() {
                    return Err(invalid("lambda grid is empty"));
                }
                let mut pts = Vec::with_capacity(l1.len() * l2.len() * l3.len());
                for &a in &l1 {
                    for &b in &l2 {
                        for &c in &l3 {
                            pts.push(PenaltyConfig::fsgl(a, b, c));
                        }
                    }
                }
                pts
            }
        };
        for p in &pts {
            p.validate()?;
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub folds: usize,
    pub test_fraction: f64,
    pub solver: SolverOptions,
    /// Standardize features on the training rows of each split.
    pub scale_features: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            folds: 5,
            test_fraction: TEST_FRACTION,
            solver: SolverOptions::default(),
            scale_features: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best: PenaltyConfig,
    /// Mean validation RMSE per grid point, in grid order.
    pub scores: Vec<f64>,
}

fn column_means(y: ArrayView2<f64>) -> Array1<f64> {
    y.mean_axis(Axis(0)).expect("non-empty rows")
}

fn predict(x: ArrayView2<f64>, w: &Array2<f64>, offset: &Array1<f64>) -> Array2<f64> {
    x.dot(w) + offset
}

/// Choose the grid point with the lowest mean validation RMSE over `folds`
/// folds; near-ties (within 1e-12 relative) go to the larger total penalty.
/// Targets are centered on each fold's training rows.
pub fn cross_validate(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    points: &[PenaltyConfig],
    folds: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<CvOutcome> {
    if points.is_empty() {
        return Err(invalid("cross-validation needs at least one grid point"));
    }
    let labels = fold_assignment(x.nrows(), folds, seed)?;
    let mut totals = vec![0.0; points.len()];
    for fold in 0..folds {
        let train: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] != fold).collect();
        let val: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == fold).collect();
        let (xt, yt) = (x.select(Axis(0), &train), y.select(Axis(0), &train));
        let (xv, yv) = (x.select(Axis(0), &val), y.select(Axis(0), &val));
        let mean = column_means(yt.view());
        let problem = GramProblem::new(xt.view(), (&yt - &mean).view());
        let mut warm: Option<Array2<f64>> = None;
        for (p, cfg) in points.iter().enumerate() {
            let (w, _) = problem.fit(cfg, warm.as_ref(), opts)?;
            totals[p] += rmse_full(yv.view(), predict(xv.view(), &w, &mean).view())?;
            warm = Some(w);
        }
    }
    let scores: Vec<f64> = totals.iter().map(|t| t / folds as f64).collect();
    let mut best = 0;
    for p in 1..points.len() {
        let (s, b) = (scores[p], scores[best]);
        let tie = (s - b).abs() <= 1e-12 * s.abs().max(b.abs());
        if (!tie && s < b) || (tie && points[p].total() > points[best].total()) {
            best = p;
        }
    }
    Ok(CvOutcome {
        best: points[best],
        scores,
    })
}

/// One train/test experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub model: Model,
    pub penalty: PenaltyConfig,
    pub cv_score: f64,
    pub test_rmse: f64,
    pub per_phase: [f64; 3],
    pub weights: WeightMatrix,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

/// Column ranges of the early, middle and late thirds of the tasks.
pub fn phase_ranges(k: usize) -> [Range<usize>; 3] {
    [0..k / 3, k / 3..2 * k / 3, 2 * k / 3..k]
}

/// Seed of run `run` under `base_seed`.
pub fn run_seed(base_seed: u64, run: usize) -> u64 {
    derive_seed(base_seed, run as u64)
}

/// Split by `seed`, cross-validate on the training rows, refit there and
/// score on the held-out rows. Non-convergence is recorded, not raised.
pub fn run_experiment(task: &TaskSpec, model: Model, cfg: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    let n = task.n_samples();
    let split = SplitPlan::new(task.n_real(), n, cfg.test_fraction, derive_seed(seed, 0))?;
    let x = if cfg.scale_features {
        standard_scale(task.x.view(), &split.train_rows)?.values
    } else {
        task.x.clone()
    };
    let (xt, yt) = (
        x.select(Axis(0), &split.train_rows),
        task.y.select(Axis(0), &split.train_rows),
    );
    let (xs, ys) = (
        x.select(Axis(0), &split.test_rows),
        task.y.select(Axis(0), &split.test_rows),
    );

    let points = cfg.grid.points(model)?;
    let cv = cross_validate(
        xt.view(),
        yt.view(),
        &points,
        cfg.folds,
        derive_seed(seed, 1),
        &cfg.solver,
    )?;
    let mean = column_means(yt.view());
    let problem = GramProblem::new(xt.view(), (&yt - &mean).view());
    let (weights, report) = problem.fit(&cv.best, None, &cfg.solver)?;
    if !report.converged {
        log::warn!(
            "{model} fit did not converge for seed {seed} (kkt residual {:.3e})",
            report.kkt_residual
        );
    }
    let pred = predict(xs.view(), &weights, &mean);
    let test_rmse = rmse_full(ys.view(), pred.view())?;
    let mut per_phase = [0.0; 3];
    for (p, r) in phase_ranges(task.n_tasks()).into_iter().enumerate() {
        per_phase[p] = if r.is_empty() {
            0.0
        } else {
            rmse_full(ys.slice(ndarray::s![.., r.clone()]), pred.slice(ndarray::s![.., r]))?
        };
    }
    let cv_score = cv.scores[points.iter().position(|p| *p == cv.best).expect("best is a grid point")];
    Ok(RunResult {
        run: 0,
        seed,
        model,
        penalty: cv.best,
        cv_score,
        test_rmse,
        per_phase,
        weights,
        train_rows: split.train_rows,
        test_rows: split.test_rows,
        converged: report.converged,
        iterations: report.iterations,
    })
}

/// Aggregate over repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: Model,
    pub n_runs: usize,
    pub rmse_mean: f64,
    /// Population standard deviation.
    pub rmse_std: f64,
    pub per_phase: [f64; 3],
    /// Run with the lowest test RMSE (first on ties).
    pub representative_run: usize,
    pub weights: WeightMatrix,
    pub n_unconverged: usize,
}

/// Reduce runs in their given order.
pub fn summarize(runs: &[RunResult]) -> Result<EvalReport> {
    let first = runs.first().ok_or_else(|| invalid("no runs to summarize"))?;
    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.test_rmse).sum::<f64>() / n;
    let var = runs.iter().map(|r| (r.test_rmse - mean).powi(2)).sum::<f64>() / n;
    let mut per_phase = [0.0; 3];
    for r in runs {
        for (acc, v) in per_phase.iter_mut().zip(r.per_phase) {
            *acc += v / n;
        }
    }
    let rep = (0..runs.len())
        .min_by(|&a, &b| runs[a].test_rmse.total_cmp(&runs[b].test_rmse).then(a.cmp(&b)))
        .expect("non-empty");
    Ok(EvalReport {
        model: first.model,
        n_runs: runs.len(),
        rmse_mean: mean,
        rmse_std: var.sqrt(),
        per_phase,
        representative_run: rep,
        weights: runs[rep].weights.clone(),
        n_unconverged: runs.iter().filter(|r| !r.converged).count(),
    })
}

/// `n_runs` experiments with seeds `run_seed(base_seed, r)`, run serially.
pub fn repeat_experiments(
    task: &TaskSpec,
    model: Model,
    cfg: &ExperimentConfig,
    n_runs: usize,
    base_seed: u64,
) -> Result<(EvalReport, Vec<RunResult>)> {
    if n_runs == 0 {
        return Err(invalid("n_runs must be at least 1"));
    }
    let runs = (0..n_runs)
        .map(|r| {
            let mut res = run_experiment(task, model, cfg, run_seed(base_seed, r))?;
            res.run = r;
            Ok(res)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((summarize(&runs)?, runs))
}
