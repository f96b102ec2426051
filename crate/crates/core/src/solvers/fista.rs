use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis};

use super::linalg::{cholesky, cholesky_solve_in_place, largest_eigenvalue};
use super::prox::prox_fsgl_row_in_place;
use super::{Model, PenaltyConfig, SolverOptions, SolverReport, WeightMatrix};
use crate::error::{invalid, Error, Result};

/// Least-squares data in Gram form: `G = X^T X`, `B = X^T Y`, `|Y|_F^2`.
///
/// Building one per training set lets a whole penalty grid reuse the products
/// and the Lipschitz estimate.
#[derive(Debug, Clone)]
pub struct GramProblem {
    gram: Array2<f64>,
    xty: Array2<f64>,
    yty: f64,
    /// Largest eigenvalue of `G`, computed lazily.
    top_eig: std::cell::OnceCell<f64>,
}

#[inline]
fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

impl GramProblem {
    pub fn new(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Self {
        assert_eq!(x.nrows(), y.nrows(), "X and Y row counts differ");
        let gram = x.t().dot(&x);
        let xty = x.t().dot(&y);
        let yty = y.iter().map(|v| v * v).sum();
        Self {
            gram,
            xty,
            yty,
            top_eig: std::cell::OnceCell::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.gram.nrows()
    }

    pub fn n_tasks(&self) -> usize {
        self.xty.ncols()
    }

    fn top_eigenvalue(&self, opts: &SolverOptions) -> f64 {
        *self
            .top_eig
            .get_or_init(|| largest_eigenvalue(self.gram.view(), opts.power_iters, opts.power_tol))
    }

    /// `|Y - XW|_F^2` from `W` and `GW`.
    #[inline]
    fn smooth(&self, w: &Array2<f64>, gw: &Array2<f64>) -> f64 {
        let mut s = self.yty;
        for ((a, g), b) in w.iter().zip(gw.iter()).zip(self.xty.iter()) {
            s += a * (g - 2.0 * b);
        }
        s
    }

    fn check_init(&self, init: Option<&Array2<f64>>) -> Result<Array2<f64>> {
        let shape = (self.n_features(), self.n_tasks());
        match init {
            None => Ok(Array2::zeros(shape)),
            Some(w) if w.dim() == shape => Ok(w.as_standard_layout().into_owned()),
            Some(w) => Err(Error::Shape(format!("warm start is {:?}, expected {shape:?}", w.dim()))),
        }
    }

    pub fn fit(
        &self,
        cfg: &PenaltyConfig,
        init: Option<&Array2<f64>>,
        opts: &SolverOptions,
    ) -> Result<(WeightMatrix, SolverReport)> {
        cfg.validate()?;
        match cfg.model {
            Model::Ridge => self.ridge(cfg.lambda1),
            Model::Lasso => self.lasso(cfg.lambda1, init, opts),
            Model::Fsgl => self.fsgl(cfg.lambda1, cfg.lambda2, cfg.lambda3, init, opts),
        }
    }

    pub fn ridge(&self, lambda: f64) -> Result<(WeightMatrix, SolverReport)> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("ridge requires a finite lambda > 0"));
        }
        let mut a = self.gram.clone();
        a.diag_mut().iter_mut().for_each(|v| *v += lambda);
        let l = cholesky(a.view()).ok_or_else(|| invalid("ridge system is not positive definite"))?;
        let mut w = self.xty.clone();
        cholesky_solve_in_place(&l, &mut w);
        let gw = self.gram.dot(&w);
        let objective = self.smooth(&w, &gw) + lambda * dot(&w, &w);
        let kkt = gw
            .iter()
            .zip(self.xty.iter())
            .zip(w.iter())
            .map(|((g, b), wi)| (2.0 * (g - b) + 2.0 * lambda * wi).abs())
            .fold(0.0, f64::max);
        Ok((
            w,
            SolverReport {
                objective_trace: vec![objective],
                step_sizes: vec![0.0],
                iterations: 0,
                converged: true,
                kkt_residual: kkt,
            },
        ))
    }

    pub fn fsgl(
        &self,
        lambda1: f64,
        lambda2: f64,
        lambda3: f64,
        init: Option<&Array2<f64>>,
        opts: &SolverOptions,
    ) -> Result<(WeightMatrix, SolverReport)> {
        PenaltyConfig::fsgl(lambda1, lambda2, lambda3).validate()?;
        let w0 = self.check_init(init)?;
        Ok(self.run_fista(lambda1, lambda2, lambda3, w0, opts.tol, opts.max_iter, opts))
    }

    /// FISTA on the soft-threshold prox, then per-column support solves
    /// (and further tighter-tolerance FISTA passes) until the subgradient
    /// optimality residual reaches `opts.kkt_tol`.
    pub fn lasso(
        &self,
        lambda1: f64,
        init: Option<&Array2<f64>>,
        opts: &SolverOptions,
    ) -> Result<(WeightMatrix, SolverReport)> {
        PenaltyConfig::lasso(lambda1).validate()?;
        let w0 = self.check_init(init)?;
        let (mut w, mut report) = self.run_fista(lambda1, 0.0, 0.0, w0, opts.tol, opts.max_iter, opts);
        let mut tol = opts.tol;
        loop {
            self.polish_lasso(&mut w, lambda1);
            let kkt = self.lasso_kkt(&w, lambda1);
            report.kkt_residual = kkt;
            if kkt <= opts.kkt_tol {
                report.converged = true;
                break;
            }
            if report.iterations >= opts.max_iter {
                report.converged = false;
                break;
            }
            tol = (tol * 1e-2).max(1e-300);
            let (w_next, more) = self.run_fista(lambda1, 0.0, 0.0, w, tol, opts.max_iter - report.iterations, opts);
            w = w_next;
            report.iterations += more.iterations;
            report.objective_trace.extend(more.objective_trace.into_iter().skip(1));
            report.step_sizes.extend(more.step_sizes.into_iter().skip(1));
        }
        let gw = self.gram.dot(&w);
        let final_obj = self.smooth(&w, &gw) + lambda1 * w.iter().map(|v| v.abs()).sum::<f64>();
        if report.objective_trace.last().is_none_or(|&last| final_obj <= last) {
            report.objective_trace.push(final_obj);
            report.step_sizes.push(0.0);
        }
        Ok((w, report))
    }

    /// Largest violation of the lasso subgradient conditions.
    pub fn lasso_kkt(&self, w: &Array2<f64>, lambda1: f64) -> f64 {
        let gw = self.gram.dot(w);
        let mut worst: f64 = 0.0;
        for ((g, b), wi) in gw.iter().zip(self.xty.iter()).zip(w.iter()) {
            let grad = 2.0 * (g - b);
            let r = if *wi == 0.0 {
                (grad.abs() - lambda1).max(0.0)
            } else {
                (grad + lambda1 * wi.signum()).abs()
            };
            worst = worst.max(r);
        }
        worst
    }

    /// For each column, solve the stationarity equations on the current
    /// support with the current signs; keep the solution when it is sign
    /// consistent and lowers that column's KKT residual.
    fn polish_lasso(&self, w: &mut Array2<f64>, lambda1: f64) {
        let d = self.n_features();
        for c in 0..self.n_tasks() {
            let support: Vec<usize> = (0..d).filter(|&i| w[[i, c]] != 0.0).collect();
            if support.is_empty() {
                continue;
            }
            let gss = self.gram.select(Axis(0), &support).select(Axis(1), &support);
            let Some(l) = cholesky(gss.view()) else { continue };
            let mut rhs = Array2::zeros((support.len(), 1));
            for (p, &i) in support.iter().enumerate() {
                rhs[[p, 0]] = self.xty[[i, c]] - 0.5 * lambda1 * w[[i, c]].signum();
            }
            cholesky_solve_in_place(&l, &mut rhs);
            let consistent = support
                .iter()
                .enumerate()
                .all(|(p, &i)| rhs[[p, 0]] != 0.0 && rhs[[p, 0]].signum() == w[[i, c]].signum());
            if !consistent {
                continue;
            }
            let mut candidate = w.column(c).to_owned();
            for (p, &i) in support.iter().enumerate() {
                candidate[i] = rhs[[p, 0]];
            }
            if self.column_kkt(candidate.view(), c, lambda1) < self.column_kkt(w.column(c), c, lambda1) {
                w.column_mut(c).assign(&candidate);
            }
        }
    }

    fn column_kkt(&self, wc: ndarray::ArrayView1<f64>, c: usize, lambda1: f64) -> f64 {
        let gw = self.gram.dot(&wc);
        gw.iter()
            .zip(self.xty.column(c))
            .zip(wc.iter())
            .map(|((g, b), wi)| {
                let grad = 2.0 * (g - b);
                if *wi == 0.0 {
                    (grad.abs() - lambda1).max(0.0)
                } else {
                    (grad + lambda1 * wi.signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    fn penalty(w: &Array2<f64>, l1: f64, l2: f64, l3: f64) -> f64 {
        let mut total = 0.0;
        for row in w.rows() {
            let row = row.as_slice().expect("standard layout");
            if l1 != 0.0 {
                total += l1 * row.iter().map(|v| v.abs()).sum::<f64>();
            }
            if l2 != 0.0 {
                total += l2 * super::prox::total_variation(row);
            }
            if l3 != 0.0 {
                total += l3 * row.iter().map(|v| v * v).sum::<f64>().sqrt();
            }
        }
        total
    }

    /// Monotone FISTA with function-value restart: when the extrapolated step
    /// would raise the objective, momentum resets and the iterate stays put,
    /// so the recorded objective never increases. Step size `1/L` with
    /// `L = 2 * lambda_max(G)`, doubled on sufficient-decrease failure.
    /// Stops when the objective change falls below `tol` relative to the
    /// objective and the gradient mapping falls below the stationarity
    /// tolerance relative to the gradient at zero.
    #[allow(clippy::too_many_arguments)]
    fn run_fista(
        &self,
        l1: f64,
        l2: f64,
        l3: f64,
        w0: Array2<f64>,
        tol: f64,
        max_iter: usize,
        opts: &SolverOptions,
    ) -> (WeightMatrix, SolverReport) {
        let shape = w0.dim();
        let mut lip = 2.0 * self.top_eigenvalue(opts);
        if lip.is_nan() || lip <= 0.0 {
            lip = 1.0;
        }
        let mut x = w0;
        let mut gx = Array2::zeros(shape);
        general_mat_mul(1.0, &self.gram, &x, 0.0, &mut gx);
        let mut fx = self.smooth(&x, &gx) + Self::penalty(&x, l1, l2, l3);
        let floor = 1e-14 * self.yty.max(f64::MIN_POSITIVE);
        // gradient norm at W = 0, the scale for the stationarity test
        let grad_scale = 2.0 * self.xty.iter().map(|b| b * b).sum::<f64>().sqrt();
        // tightened in step with `tol` on refinement passes
        let stationarity = opts.stationarity_tol * tol / opts.tol.max(f64::MIN_POSITIVE);

        let mut y = x.clone();
        let mut gy = gx.clone();
        let mut z = Array2::zeros(shape);
        let mut gz = Array2::zeros(shape);
        let mut grad = Array2::zeros(shape);
        let mut scratch = vec![0.0; shape.1];
        let mut t = 1.0f64;
        let mut y_is_x = true;

        let mut report = SolverReport {
            objective_trace: vec![fx],
            step_sizes: vec![1.0 / lip],
            ..Default::default()
        };

        let mut converged = false;
        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            let fy = self.smooth(&y, &gy);
            ndarray::Zip::from(&mut grad)
                .and(&gy)
                .and(&self.xty)
                .for_each(|g, &a, &b| *g = 2.0 * (a - b));
            let mut fz_smooth;
            let mut mapping;
            loop {
                let step = 1.0 / lip;
                ndarray::Zip::from(&mut z)
                    .and(&y)
                    .and(&grad)
                    .for_each(|z, &y, &g| *z = y - step * g);
                for mut row in z.rows_mut() {
                    let row = row.as_slice_mut().expect("standard layout");
                    prox_fsgl_row_in_place(row, &mut scratch, l1 * step, l2 * step, l3 * step);
                }
                general_mat_mul(1.0, &self.gram, &z, 0.0, &mut gz);
                fz_smooth = self.smooth(&z, &gz);
                let mut lin = 0.0;
                let mut sq = 0.0;
                for ((zi, yi), gi) in z.iter().zip(y.iter()).zip(grad.iter()) {
                    let dlt = zi - yi;
                    lin += gi * dlt;
                    sq += dlt * dlt;
                }
                mapping = lip * sq.sqrt();
                let model = fy + lin + 0.5 * lip * sq;
                if fz_smooth <= model + 1e-12 * (model.abs() + self.yty) || !lip.is_finite() {
                    break;
                }
                lip *= 2.0;
            }
            let fz = fz_smooth + Self::penalty(&z, l1, l2, l3);

            if fz <= fx {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                ndarray::Zip::from(&mut y)
                    .and(&z)
                    .and(&x)
                    .for_each(|y, &z, &x| *y = z + beta * (z - x));
                ndarray::Zip::from(&mut gy)
                    .and(&gz)
                    .and(&gx)
                    .for_each(|y, &z, &x| *y = z + beta * (z - x));
                let change = fx - fz;
                std::mem::swap(&mut x, &mut z);
                std::mem::swap(&mut gx, &mut gz);
                fx = fz;
                t = t_next;
                y_is_x = false;
                report.objective_trace.push(fx);
                report.step_sizes.push(1.0 / lip);
                if change <= tol * fx.abs().max(floor) && mapping <= stationarity * grad_scale {
                    converged = true;
                    break;
                }
            } else {
                report.objective_trace.push(fx);
                report.step_sizes.push(1.0 / lip);
                if y_is_x {
                    // a plain prox-gradient step from x cannot improve: stationary to rounding
                    converged = true;
                    break;
                }
                t = 1.0;
                y.assign(&x);
                gy.assign(&gx);
                y_is_x = true;
            }
        }

        // prox-gradient fixed-point residual at x
        ndarray::Zip::from(&mut grad)
            .and(&gx)
            .and(&self.xty)
            .for_each(|g, &a, &b| *g = 2.0 * (a - b));
        let step = 1.0 / lip;
        ndarray::Zip::from(&mut z)
            .and(&x)
            .and(&grad)
            .for_each(|z, &x, &g| *z = x - step * g);
        for mut row in z.rows_mut() {
            let row = row.as_slice_mut().expect("standard layout");
            prox_fsgl_row_in_place(row, &mut scratch, l1 * step, l2 * step, l3 * step);
        }
        report.kkt_residual = x.iter().zip(z.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) * lip;
        report.iterations = iterations;
        report.converged = converged;
        (x, report)
    }
}
