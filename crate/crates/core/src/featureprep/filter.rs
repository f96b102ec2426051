use ndarray::{ArrayView1, ArrayView2};

use crate::error::{invalid, Result};

/// Stand-in for an infinite F statistic (`|r| = 1`): finite, ranks first.
pub const F_SENTINEL: f64 = f64::MAX;

/// Univariate filter statistics for every feature against one target.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterScores {
    pub pearson_r: Vec<f64>,
    pub f_stat: Vec<f64>,
    /// Feature (or target) had zero variance; its r is reported as 0.
    pub constant: Vec<bool>,
}

fn pearson(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.sum() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let tiny = 1e-24 * n;
    if sxx <= tiny * (1.0 + mx * mx) || syy <= tiny * (1.0 + my * my) {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `(n - 2) r^2 / (1 - r^2)`, the univariate regression F test.
pub fn f_from_r(r: f64, n: usize) -> f64 {
    let r2 = r * r;
    if r2 >= 1.0 - 1e-15 {
        F_SENTINEL
    } else {
        (n as f64 - 2.0) * r2 / (1.0 - r2)
    }
}

/// Pearson correlation of each column with `y`.
pub fn pearson_scores(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<FilterScores> {
    let n = x.nrows();
    if n < 3 {
        return Err(invalid(format!("correlation filters need at least 3 samples, got {n}")));
    }
    if y.len() != n {
        return Err(invalid(format!("target has {} entries for {n} rows", y.len())));
    }
    let mut pearson_r = Vec::with_capacity(x.ncols());
    let mut constant = Vec::with_capacity(x.ncols());
    for col in x.columns() {
        match pearson(col, y) {
            Some(r) => {
                pearson_r.push(r);
                constant.push(false);
            }
            None => {
                pearson_r.push(0.0);
                constant.push(true);
            }
        }
    }
    let f_stat = pearson_r.iter().map(|&r| f_from_r(r, n)).collect();
    Ok(FilterScores {
        pearson_r,
        f_stat,
        constant,
    })
}

/// Same statistics as [`pearson_scores`]; kept separate because the two
/// filters are reported as distinct selection methods.
pub fn f_scores(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<FilterScores> {
    pearson_scores(x, y)
}
