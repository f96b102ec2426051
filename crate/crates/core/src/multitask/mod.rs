//! Temporal task structure, train/test experiments with cross-validated
//! penalties, and the length-weighted multi-task RMSE.

mod experiment;
mod metrics;
mod split;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{invalid, Error, Result};

pub use experiment::{
    cross_validate, phase_ranges, repeat_experiments, run_experiment, run_seed, summarize, CvOutcome, EvalReport,
    ExperimentConfig, GridSpec, RunResult,
};
pub use metrics::{rmse_full, rmse_multitask, rmse_tasks};
pub use split::{fold_assignment, SplitPlan, TEST_FRACTION};

pub const DEFAULT_GROUP_SIZE: usize = 7;

/// Shared design matrix plus one target column per task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub group_size: usize,
    /// Trailing rows that are synthetic and must never be tested on.
    pub n_synthetic: usize,
}

impl TaskSpec {
    /// Validate shapes only; see [`build_tasks`] for the coupled targets.
    pub fn new(x: Array2<f64>, y: Array2<f64>, group_size: usize) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::Shape(format!("X has {} rows, Y has {}", x.nrows(), y.nrows())));
        }
        if group_size == 0 || y.ncols() == 0 || !y.ncols().is_multiple_of(group_size) {
            return Err(invalid(format!(
                "{} task columns cannot be split into groups of {group_size}",
                y.ncols()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("task data contains non-finite values"));
        }
        Ok(Self {
            x,
            y,
            group_size,
            n_synthetic: 0,
        })
    }

    pub fn with_synthetic(mut self, n_synthetic: usize) -> Result<Self> {
        if n_synthetic >= self.n_samples() {
            return Err(invalid("every row would be synthetic"));
        }
        self.n_synthetic = n_synthetic;
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_real(&self) -> usize {
        self.n_samples() - self.n_synthetic
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_tasks(&self) -> usize {
        self.y.ncols()
    }

    pub fn n_groups(&self) -> usize {
        self.n_tasks() / self.group_size
    }

    /// True when every group's columns are identical.
    pub fn is_coupled(&self) -> bool {
        self.y.axis_chunks_iter(Axis(1), self.group_size).all(|g| {
            let first = g.column(0);
            g.columns().into_iter().all(|c| c == first)
        })
    }

    pub fn select_features(&self, cols: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(1), cols),
            ..self.clone()
        }
    }
}

/// Coupled targets: every column of group `g` holds the CFR of the group's
/// last day, `(g + 1) * group_size`.
pub fn build_tasks(x: ArrayView2<f64>, y_daily: ArrayView2<f64>, group_size: usize) -> Result<TaskSpec> {
    let window = y_daily.ncols();
    if group_size == 0 || window == 0 || !window.is_multiple_of(group_size) {
        return Err(invalid(format!(
            "window {window} is not divisible by group size {group_size}"
        )));
    }
    let mut y = Array2::zeros(y_daily.dim());
    for (g, mut block) in y.axis_chunks_iter_mut(Axis(1), group_size).enumerate() {
        let last = y_daily.column((g + 1) * group_size - 1);
        for mut col in block.columns_mut() {
            col.assign(&last);
        }
    }
    TaskSpec::new(x.to_owned(), y, group_size)
}
