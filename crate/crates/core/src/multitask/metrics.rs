use ndarray::ArrayView2;

use crate::error::{invalid, Error, Result};

/// Task-length-weighted mean of per-task RMSEs over `(truth, prediction)`
/// pairs: `sum_t n_t * rmse_t / sum_t n_t`.
pub fn rmse_tasks(tasks: &[(&[f64], &[f64])]) -> Result<f64> {
    if tasks.is_empty() {
        return Err(invalid("rmse needs at least one task"));
    }
    let mut weighted = 0.0;
    let mut total = 0usize;
    for (t, (truth, pred)) in tasks.iter().enumerate() {
        if truth.is_empty() {
            return Err(invalid(format!("task {t} has no samples")));
        }
        if truth.len() != pred.len() {
            return Err(Error::Shape(format!(
                "task {t}: {} targets but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let n = truth.len() as f64;
        let sse: f64 = truth.iter().zip(pred.iter()).map(|(a, b)| (b - a) * (b - a)).sum();
        weighted += n * (sse / n).sqrt();
        total += truth.len();
    }
    Ok(weighted / total as f64)
}

/// Matrix form: column `t` is task `t`, and only its first `task_lengths[t]`
/// rows count.
pub fn rmse_multitask(y_true: ArrayView2<f64>, y_pred: ArrayView2<f64>, task_lengths: &[usize]) -> Result<f64> {
    if y_true.dim() != y_pred.dim() {
        return Err(Error::Shape(format!(
            "truth is {:?}, prediction is {:?}",
            y_true.dim(),
            y_pred.dim()
        )));
    }
    if task_lengths.len() != y_true.ncols() {
        return Err(Error::Shape(format!(
            "{} task lengths for {} task columns",
            task_lengths.len(),
            y_true.ncols()
        )));
    }
    if let Some(t) = task_lengths.iter().position(|&n| n > y_true.nrows()) {
        return Err(Error::Shape(format!("task {t} is longer than the matrix")));
    }
    let cols: Vec<(Vec<f64>, Vec<f64>)> = task_lengths
        .iter()
        .enumerate()
        .map(|(t, &n)| {
            (
                y_true.column(t).iter().take(n).copied().collect(),
                y_pred.column(t).iter().take(n).copied().collect(),
            )
        })
        .collect();
    let pairs: Vec<(&[f64], &[f64])> = cols.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
    rmse_tasks(&pairs)
}

/// All tasks observed on every row.
pub fn rmse_full(y_true: ArrayView2<f64>, y_pred: ArrayView2<f64>) -> Result<f64> {
    rmse_multitask(y_true, y_pred, &vec![y_true.nrows(); y_true.ncols()])
}
