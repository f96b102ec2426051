use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{invalid, Result};

/// Column-standardized matrix plus the statistics that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMatrix {
    pub values: Array2<f64>,
    pub means: Array1<f64>,
    /// Population standard deviations; `1.0` for constant columns.
    pub stds: Array1<f64>,
    pub constant: Vec<bool>,
}

impl ScaledMatrix {
    /// Apply the stored statistics to other rows with the same columns.
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            if self.constant[j] {
                col.fill(0.0);
            } else {
                let (m, s) = (self.means[j], self.stds[j]);
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        out
    }

    pub fn n_constant(&self) -> usize {
        self.constant.iter().filter(|&&c| c).count()
    }
}

/// Z-score every column using mean and population std of `fit_rows` only, then
/// transform all rows. Constant columns (on the fit rows) become zeros and are
/// flagged.
pub fn standard_scale(x: ArrayView2<f64>, fit_rows: &[usize]) -> Result<ScaledMatrix> {
    if fit_rows.is_empty() {
        return Err(invalid("standard_scale needs at least one fit row"));
    }
    if let Some(&bad) = fit_rows.iter().find(|&&r| r >= x.nrows()) {
        return Err(invalid(format!("fit row {bad} out of range for {} rows", x.nrows())));
    }
    let d = x.ncols();
    let nf = fit_rows.len() as f64;
    let mut means = Array1::zeros(d);
    let mut stds = Array1::ones(d);
    let mut constant = vec![false; d];
    for j in 0..d {
        let col = x.column(j);
        let mean = fit_rows.iter().map(|&r| col[r]).sum::<f64>() / nf;
        let var = fit_rows.iter().map(|&r| (col[r] - mean).powi(2)).sum::<f64>() / nf;
        let std = var.sqrt();
        means[j] = mean;
        if std <= 1e-12 * (1.0 + mean.abs()) {
            constant[j] = true;
        } else {
            stds[j] = std;
        }
    }
    let mut scaled = ScaledMatrix {
        values: Array2::zeros((0, 0)),
        means,
        stds,
        constant,
    };
    scaled.values = scaled.transform(x);
    Ok(scaled)
}
