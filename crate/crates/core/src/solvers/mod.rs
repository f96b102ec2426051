//! Ridge, lasso and fused sparse group lasso (FSGL) multi-task regression.
//!
//! All models share the squared Frobenius loss `|Y - XW|_F^2` with no `1/2`
//! factor, so the smooth gradient is `2 X^T (XW - Y)`. `W` is `d × k`: one row
//! per feature, one column per task. The FSGL penalty is
//!
//! ```text
//! lambda1 |W|_1 + lambda2 sum_i sum_t |W[i,t+1] - W[i,t]| + lambda3 sum_i |W[i,:]|_2
//! ```
//!
//! where the middle term is the fused penalty `|R W^T|_1` with `R` the
//! `(k-1) × k` forward-difference operator.

mod fista;
pub mod linalg;
pub mod prox;

use std::fmt;
use std::io::Write;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use fista::GramProblem;

/// Learned `d × k` coefficients.
pub type WeightMatrix = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ridge,
    Lasso,
    Fsgl,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Ridge, Model::Lasso, Model::Fsgl];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Ridge => "ridge",
            Model::Lasso => "lasso",
            Model::Fsgl => "fsgl",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ridge" => Ok(Model::Ridge),
            "lasso" => Ok(Model::Lasso),
            "fsgl" => Ok(Model::Fsgl),
            other => Err(invalid(format!("unknown model `{other}`"))),
        }
    }
}

/// Penalty weights. Ridge and lasso read `lambda1` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub model: Model,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl PenaltyConfig {
    pub fn ridge(lambda: f64) -> Self {
        Self {
            model: Model::Ridge,
            lambda1: lambda,
            lambda2: 0.0,
            lambda3: 0.0,
        }
    }

    pub fn lasso(lambda1: f64) -> Self {
        Self {
            model: Model::Lasso,
            lambda1,
            lambda2: 0.0,
            lambda3: 0.0,
        }
    }

    pub fn fsgl(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        Self {
            model: Model::Fsgl,
            lambda1,
            lambda2,
            lambda3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.lambda1) && ok(self.lambda2) && ok(self.lambda3)) {
            return Err(invalid(format!("penalties must be finite and non-negative: {self:?}")));
        }
        if self.model == Model::Ridge && self.lambda1 <= 0.0 {
            return Err(invalid("ridge requires lambda > 0"));
        }
        Ok(())
    }

    /// Sum of the penalty weights the model actually uses.
    pub fn total(&self) -> f64 {
        match self.model {
            Model::Ridge | Model::Lasso => self.lambda1,
            Model::Fsgl => self.lambda1 + self.lambda2 + self.lambda3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Relative objective change that ends the iteration.
    pub tol: f64,
    /// Gradient-mapping norm, relative to the gradient at zero, that must
    /// also be reached before the iteration ends.
    pub stationarity_tol: f64,
    pub max_iter: usize,
    pub power_iters: usize,
    pub power_tol: f64,
    /// Subgradient optimality residual the lasso refines down to.
    pub kkt_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            stationarity_tol: 1e-5,
            max_iter: 10_000,
            power_iters: 50,
            power_tol: 1e-6,
            kkt_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverReport {
    /// Objective at the accepted iterate, one entry per iteration (monotone).
    pub objective_trace: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

impl SolverReport {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }

    /// CSV dump: `iteration,objective,step_size`.
    pub fn write_trace<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["iteration", "objective", "step_size"])?;
        for (i, obj) in self.objective_trace.iter().enumerate() {
            let step = self.step_sizes.get(i).copied().unwrap_or(0.0);
            wtr.write_record([i.to_string(), format!("{obj:.17e}"), format!("{step:.17e}")])?;
        }
        wtr.flush()
    }
}

fn check_shapes(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!("X has {} rows, Y has {}", x.nrows(), y.nrows())));
    }
    Ok(())
}

/// `sum_i sum_t |W[i,t+1] - W[i,t]|`, i.e. `|R W^T|_1`.
pub fn fused_penalty(w: ArrayView2<f64>) -> f64 {
    w.rows()
        .into_iter()
        .map(|row| row.windows(2).into_iter().map(|p| (p[1] - p[0]).abs()).sum::<f64>())
        .sum()
}

/// `sum_i |W[i,:]|_2`.
pub fn l21_norm(w: ArrayView2<f64>) -> f64 {
    w.rows().into_iter().map(|r| r.dot(&r).sqrt()).sum()
}

/// Penalty term of the configured model.
pub fn penalty_value(w: ArrayView2<f64>, cfg: &PenaltyConfig) -> f64 {
    match cfg.model {
        Model::Ridge => cfg.lambda1 * w.iter().map(|v| v * v).sum::<f64>(),
        Model::Lasso => cfg.lambda1 * w.iter().map(|v| v.abs()).sum::<f64>(),
        Model::Fsgl => {
            let mut total = 0.0;
            if cfg.lambda1 != 0.0 {
                total += cfg.lambda1 * w.iter().map(|v| v.abs()).sum::<f64>();
            }
            if cfg.lambda2 != 0.0 {
                total += cfg.lambda2 * fused_penalty(w);
            }
            if cfg.lambda3 != 0.0 {
                total += cfg.lambda3 * l21_norm(w);
            }
            total
        }
    }
}

/// `|Y - XW|_F^2 + penalty(W)`, evaluated from the residual directly.
pub fn fsgl_objective(x: ArrayView2<f64>, y: ArrayView2<f64>, w: ArrayView2<f64>, cfg: &PenaltyConfig) -> Result<f64> {
    check_shapes(x, y)?;
    if x.ncols() != w.nrows() || y.ncols() != w.ncols() {
        return Err(Error::Shape(format!(
            "X is {:?}, Y is {:?}, W is {:?}",
            x.dim(),
            y.dim(),
            w.dim()
        )));
    }
    let resid = &y - &x.dot(&w);
    Ok(resid.iter().map(|r| r * r).sum::<f64>() + penalty_value(w, cfg))
}

/// Closed-form ridge: `(X^T X + lambda I) W = X^T Y`.
pub fn fit_ridge(x: ArrayView2<f64>, y: ArrayView2<f64>, lambda: f64) -> Result<(WeightMatrix, SolverReport)> {
    check_shapes(x, y)?;
    GramProblem::new(x, y).ridge(lambda)
}

/// Lasso by FISTA with soft thresholding, refined to the KKT tolerance.
pub fn fit_lasso(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    lambda1: f64,
    opts: &SolverOptions,
) -> Result<(WeightMatrix, SolverReport)> {
    check_shapes(x, y)?;
    GramProblem::new(x, y).lasso(lambda1, None, opts)
}

/// FSGL by monotone FISTA with the row-wise composite prox.
pub fn fit_fsgl(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    cfg: &PenaltyConfig,
    opts: &SolverOptions,
) -> Result<(WeightMatrix, SolverReport)> {
    check_shapes(x, y)?;
    cfg.validate()?;
    GramProblem::new(x, y).fsgl(cfg.lambda1, cfg.lambda2, cfg.lambda3, None, opts)
}

/// Dispatch on `cfg.model`.
pub fn fit(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    cfg: &PenaltyConfig,
    opts: &SolverOptions,
) -> Result<(WeightMatrix, SolverReport)> {
    check_shapes(x, y)?;
    GramProblem::new(x, y).fit(cfg, None, opts)
}
