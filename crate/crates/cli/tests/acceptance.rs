//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use mtfl_core::featureprep::{run_hybrid, HybridConfig};
use mtfl_core::multitask::{repeat_experiments, rmse_multitask, ExperimentConfig, TaskSpec};
use mtfl_core::rng::stream;
use mtfl_core::seir::{simulate_seir, SeirParams};
use mtfl_core::solvers::prox::{prox_flsa, prox_fsgl_row, prox_group_l2, prox_l1};
use mtfl_core::solvers::{fit_fsgl, fit_lasso, fsgl_objective, PenaltyConfig, SolverOptions};
use mtfl_core::voting::{aggregate_ranking, task_vote, DEFAULT_EPS};
use mtfl_core::Model;

const PROX_SLACK: f64 = 1e-5;
const PROX_INSTANCES: usize = 1000;
const SUBGRADIENT_ITERS: usize = 100_000;
const KKT_TOL: f64 = 1e-6;
const REDUCTION_REL_TOL: f64 = 1e-5;
const RMSE_TOL: f64 = 1e-12;
const SEIR_CONSERVATION_TOL: f64 = 1e-9;
const SEIR_REFINEMENT_TOL: f64 = 1e-4;
const SEIR_CFR_REL_TOL: f64 = 1e-3;
const ORDERING_MIN_WINS: usize = 80;
const RECOVERY_MIN_REPS: usize = 95;
const RECOVERY_RUNS_PER_REP: usize = 10;
const SELECTION_MIN_SEEDS: usize = 90;
const SELECTION_MAX_FEATURES: usize = 10;
const SELECTION_M: usize = 5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, m), || rng.sample(StandardNormal))
}

fn gaussian_vec(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> Vec<f64> {
    (0..k).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

// ---------------------------------------------------------------- criterion 1

#[derive(Clone, Copy)]
struct RowPenalty {
    l1: f64,
    tv: f64,
    group: f64,
}

impl RowPenalty {
    fn objective(&self, u: &[f64], v: &[f64]) -> f64 {
        let fit: f64 = u.iter().zip(v).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
        let l1: f64 = u.iter().map(|a| a.abs()).sum();
        let tv: f64 = u.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
        let l2 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        fit + self.l1 * l1 + self.tv * tv + self.group * l2
    }

    fn subgradient(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let k = u.len();
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        (0..k)
            .map(|i| {
                let mut g = u[i] - v[i] + self.l1 * sign(u[i]);
                if i > 0 {
                    g += self.tv * sign(u[i] - u[i - 1]);
                }
                if i + 1 < k {
                    g -= self.tv * sign(u[i + 1] - u[i]);
                }
                if norm > 0.0 {
                    g += self.group * u[i] / norm;
                }
                g
            })
            .collect()
    }
}

fn sign(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Every minimizer lies in the box spanned by 0 and the entries of `v`.
fn search_box(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(0.0, f64::min);
    let hi = v.iter().copied().fold(0.0, f64::max);
    (lo, hi)
}

/// Zooming grid search; each level scans a 31-point grid per coordinate
/// around the incumbent and then halves the half-width.
fn grid_oracle(pen: RowPenalty, v: &[f64]) -> f64 {
    let k = v.len();
    let (lo, hi) = search_box(v);
    let mut center = vec![0.5 * (lo + hi); k];
    let mut half = 0.5 * (hi - lo) + 1e-12;
    let mut best = pen.objective(&center, v);
    let steps = 31usize;
    let mut idx = vec![0usize; k];
    let mut u = vec![0.0; k];
    for _ in 0..30 {
        let mut best_u = center.clone();
        let total = steps.pow(k as u32);
        for flat in 0..total {
            let mut rest = flat;
            for i in 0..k {
                idx[i] = rest % steps;
                rest /= steps;
                u[i] = center[i] - half + 2.0 * half * idx[i] as f64 / (steps - 1) as f64;
            }
            let f = pen.objective(&u, v);
            if f < best {
                best = f;
                best_u.copy_from_slice(&u);
            }
        }
        center = best_u;
        half *= 0.5;
    }
    best
}

/// Projected subgradient on the search box with steps 1/(t+1), which suits
/// the unit strong convexity of the prox objective.
fn subgradient_oracle(pen: RowPenalty, v: &[f64]) -> f64 {
    let (lo, hi) = search_box(v);
    let mut u: Vec<f64> = v.to_vec();
    let mut best = pen.objective(&u, v).min(pen.objective(&vec![0.0; v.len()], v));
    for t in 0..SUBGRADIENT_ITERS {
        let g = pen.subgradient(&u, v);
        let step = 1.0 / (t as f64 + 1.0);
        for (ui, gi) in u.iter_mut().zip(&g) {
            *ui = (*ui - step * gi).clamp(lo, hi);
        }
        best = best.min(pen.objective(&u, v));
    }
    best
}

fn oracle(pen: RowPenalty, v: &[f64]) -> f64 {
    if v.len() <= 3 {
        grid_oracle(pen, v)
    } else {
        subgradient_oracle(pen, v)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(1, 0);
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (name, op) in [("l1", 0usize), ("flsa", 1), ("group_l2", 2), ("fsgl_row", 3)] {
        let mut op_failures = 0;
        for _ in 0..PROX_INSTANCES {
            let k = rng.random_range(1..=8);
            let scale = rng.random_range(0.1..3.0);
            let v = gaussian_vec(&mut rng, k, scale);
            let mut tau = || rng.random_range(0.0..2.0);
            let (pen, u) = match op {
                0 => {
                    let t = tau();
                    (
                        RowPenalty {
                            l1: t,
                            tv: 0.0,
                            group: 0.0,
                        },
                        prox_l1(&v, t),
                    )
                }
                1 => {
                    let t = tau();
                    (
                        RowPenalty {
                            l1: 0.0,
                            tv: t,
                            group: 0.0,
                        },
                        prox_flsa(&v, t),
                    )
                }
                2 => {
                    let t = tau();
                    (
                        RowPenalty {
                            l1: 0.0,
                            tv: 0.0,
                            group: t,
                        },
                        prox_group_l2(&v, t),
                    )
                }
                _ => {
                    let (a, b, c) = (tau(), tau(), tau());
                    (RowPenalty { l1: a, tv: b, group: c }, prox_fsgl_row(&v, a, b, c))
                }
            };
            let gap = pen.objective(&u, &v) - oracle(pen, &v);
            worst = worst.max(gap);
            if gap > PROX_SLACK {
                op_failures += 1;
            }
        }
        if op_failures > 0 {
            failures.push(format!("{name}: {op_failures}"));
        }
    }
    let elapsed = start.elapsed();
    check(
        failures.is_empty() && within(elapsed, 60.0),
        format!(
            "prox objective minus oracle <= {PROX_SLACK:e} on 4x{PROX_INSTANCES} instances; worst gap {worst:.3e}; \
             failures [{}]; {:.1}s (limit 60s)",
            failures.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

fn lasso_residual(x: &Array2<f64>, y: &Array2<f64>, w: &Array2<f64>, lambda: f64) -> f64 {
    let grad = 2.0 * x.t().dot(&(x.dot(w) - y));
    grad.iter()
        .zip(w.iter())
        .map(|(g, wi)| {
            if *wi == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g + lambda * wi.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(2, 0);
    let opts = SolverOptions::default();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=20);
        let d = rng.random_range(1..=20);
        let k = rng.random_range(1..=20);
        let lambda = 10f64.powf(rng.random_range(-2.0..1.0));
        let x = gaussian(&mut rng, n, d);
        let y = gaussian(&mut rng, n, k);
        match fit_lasso(x.view(), y.view(), lambda, &opts) {
            Ok((w, _)) => {
                let r = lasso_residual(&x, &y, &w, lambda);
                worst = worst.max(r);
                failures += usize::from(r > KKT_TOL);
            }
            Err(_) => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    check(
        failures == 0 && within(elapsed, 60.0),
        format!(
            "lasso subgradient residual <= {KKT_TOL:e} on 100 instances; worst {worst:.3e}; {failures} failures; \
             {:.1}s (limit 60s)",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 3

fn least_squares_objective(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let xm = DMatrix::from_row_slice(x.nrows(), x.ncols(), x.as_slice().unwrap());
    let ym = DMatrix::from_row_slice(y.nrows(), y.ncols(), y.as_slice().unwrap());
    let w = xm.clone().svd(true, true).solve(&ym, 1e-12).unwrap();
    (ym - xm * w).norm_squared()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn criterion_3() -> Outcome {
    let mut rng = stream(3, 0);
    let opts = SolverOptions::default();
    let (mut worst_ls, mut worst_lasso) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for _ in 0..50 {
        let d = rng.random_range(1..=15);
        let n = rng.random_range(d + 2..=25);
        let k = rng.random_range(1..=15);
        let x = gaussian(&mut rng, n, d);
        let y = x.dot(&gaussian(&mut rng, d, k)) + gaussian(&mut rng, n, k);
        let lambda = 10f64.powf(rng.random_range(-2.0..1.0));

        let zero = PenaltyConfig::fsgl(0.0, 0.0, 0.0);
        let ls = fit_fsgl(x.view(), y.view(), &zero, &opts)
            .and_then(|(w, _)| fsgl_objective(x.view(), y.view(), w.view(), &zero))
            .map(|f| rel(f, least_squares_objective(&x, &y)));

        let l1_only = PenaltyConfig::fsgl(lambda, 0.0, 0.0);
        let lasso_cfg = PenaltyConfig::lasso(lambda);
        let lasso = fit_fsgl(x.view(), y.view(), &l1_only, &opts)
            .and_then(|(w, _)| fsgl_objective(x.view(), y.view(), w.view(), &l1_only))
            .and_then(|f| {
                let (wl, _) = fit_lasso(x.view(), y.view(), lambda, &opts)?;
                Ok(rel(f, fsgl_objective(x.view(), y.view(), wl.view(), &lasso_cfg)?))
            });
        match (ls, lasso) {
            (Ok(a), Ok(b)) => {
                worst_ls = worst_ls.max(a);
                worst_lasso = worst_lasso.max(b);
                failures += usize::from(a > REDUCTION_REL_TOL || b > REDUCTION_REL_TOL);
            }
            _ => failures += 1,
        }
    }
    check(
        failures == 0,
        format!(
            "relative objective gap <= {REDUCTION_REL_TOL:e} on 50 instances; worst least-squares {worst_ls:.3e}, \
             worst lasso {worst_lasso:.3e}; {failures} failures"
        ),
    )
}

// ------------------------------------------------------------ criteria 4 and 5

const GEN_N: usize = 60;
const GEN_D: usize = 27;
const GEN_K: usize = 42;
const GEN_ACTIVE: usize = 5;
const GEN_GROUPS: usize = 6;

/// Planted smooth row-sparse weights plus noise at a tenth of the signal std.
fn planted_task(seed: u64) -> (TaskSpec, Vec<usize>) {
    let mut rng = stream(seed, 0);
    let x = gaussian(&mut rng, GEN_N, GEN_D);
    let mut active: Vec<usize> = (0..GEN_D).collect();
    for i in 0..GEN_ACTIVE {
        let j = rng.random_range(i..GEN_D);
        active.swap(i, j);
    }
    active.truncate(GEN_ACTIVE);
    active.sort_unstable();
    let mut w = Array2::zeros((GEN_D, GEN_K));
    let width = GEN_K / GEN_GROUPS;
    for &row in &active {
        for g in 0..GEN_GROUPS {
            let level = rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            for t in g * width..(g + 1) * width {
                w[[row, t]] = level;
            }
        }
    }
    let signal = x.dot(&w);
    let sd = signal.std(0.0);
    let y = &signal + &(gaussian(&mut rng, GEN_N, GEN_K) * (0.1 * sd));
    (
        TaskSpec::new(x, y, GEN_K / GEN_GROUPS).expect("valid generator shapes"),
        active,
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let (task, _) = planted_task(4);
    let cfg = ExperimentConfig::default();
    let mut reports = Vec::new();
    for model in [Model::Ridge, Model::Lasso, Model::Fsgl] {
        match repeat_experiments(&task, model, &cfg, 100, 4) {
            Ok(r) => reports.push(r),
            Err(e) => return check(false, format!("experiment failed for {model}: {e}")),
        }
    }
    let mean = |i: usize| reports[i].0.rmse_mean;
    let wins = reports[2]
        .1
        .iter()
        .zip(&reports[1].1)
        .filter(|(f, l)| f.test_rmse < l.test_rmse)
        .count();
    let elapsed = start.elapsed();
    check(
        mean(2) < mean(1) && mean(1) < mean(0) && wins >= ORDERING_MIN_WINS && within(elapsed, 600.0),
        format!(
            "mean test rmse fsgl {:.4} < lasso {:.4} < ridge {:.4}; fsgl beats lasso in {wins}/100 runs \
             (need >= {ORDERING_MIN_WINS}); {:.1}s (limit 600s)",
            mean(2),
            mean(1),
            mean(0),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let mut recovered = 0;
    let mut hist = [0usize; GEN_ACTIVE + 1];
    for rep in 0..100u64 {
        let (task, active) = planted_task(1000 + rep);
        let runs = match repeat_experiments(&task, Model::Fsgl, &cfg, RECOVERY_RUNS_PER_REP, rep) {
            Ok((_, runs)) => runs,
            Err(e) => return check(false, format!("repetition {rep} failed: {e}")),
        };
        let rankings: Vec<Vec<usize>> = runs
            .iter()
            .map(|r| task_vote(r.weights.view(), DEFAULT_EPS).expect("valid eps").ranking)
            .collect();
        let stable = aggregate_ranking(&rankings).expect("rankings are permutations");
        let hits = stable.top(GEN_ACTIVE).iter().filter(|f| active.contains(f)).count();
        hist[hits] += 1;
        recovered += usize::from(hits >= GEN_ACTIVE - 1);
    }
    check(
        recovered >= RECOVERY_MIN_REPS,
        format!(
            ">= 4 of 5 planted features in the stable top-5 in {recovered}/100 repetitions \
             (need >= {RECOVERY_MIN_REPS}); hits histogram {hist:?}; {RECOVERY_RUNS_PER_REP} runs each; {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

/// Truth, prediction, task lengths and an optional hand-computed value.
type RmseCase = (Array2<f64>, Array2<f64>, Vec<usize>, Option<f64>);

fn rmse_oracle(truth: &Array2<f64>, pred: &Array2<f64>, lengths: &[usize]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, &n) in lengths.iter().enumerate() {
        let mut sse = 0.0;
        for i in 0..n {
            let e = truth[[i, t]] - pred[[i, t]];
            sse += e * e;
        }
        num += (n as f64 * sse).sqrt();
        den += n as f64;
    }
    num / den
}

fn criterion_6() -> Outcome {
    let mut cases: Vec<RmseCase> = Vec::new();
    // Residuals 1,1,1,1 and 2 over lengths 4 and 1: (4*1 + 1*2) / 5.
    let truth = Array2::zeros((4, 2));
    let pred = Array2::from_shape_vec((4, 2), vec![1.0, 2.0, -1.0, 9.0, 1.0, 9.0, -1.0, 9.0]).unwrap();
    cases.push((truth, pred, vec![4, 1], Some(1.2)));
    // Residuals 2,2,2 and 0 over lengths 3 and 1: (3*2 + 0) / 4.
    let truth = Array2::from_shape_vec((3, 2), vec![1.0, 5.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
    let pred = Array2::from_shape_vec((3, 2), vec![3.0, 5.0, -1.0, 7.0, 3.0, 7.0]).unwrap();
    cases.push((truth, pred, vec![3, 1], Some(1.5)));
    // Residuals 3,4 over one task of length 2: sqrt(12.5).
    let truth = Array2::from_shape_vec((2, 1), vec![0.0, 0.0]).unwrap();
    let pred = Array2::from_shape_vec((2, 1), vec![3.0, -4.0]).unwrap();
    cases.push((truth, pred, vec![2], Some(12.5f64.sqrt())));

    let mut rng = stream(6, 0);
    while cases.len() < 20 {
        let n = rng.random_range(1..=12);
        let k = rng.random_range(1..=9);
        let truth = Array2::from_shape_simple_fn((n, k), || rng.random_range(-20i32..=20) as f64 / 4.0);
        let pred = Array2::from_shape_simple_fn((n, k), || rng.random_range(-20i32..=20) as f64 / 4.0);
        let lengths: Vec<usize> = (0..k)
            .map(|t| if t == 0 { n } else { rng.random_range(1..=n) })
            .collect();
        cases.push((truth, pred, lengths, None));
    }

    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut unequal = 0;
    for (truth, pred, lengths, literal) in &cases {
        unequal += usize::from(lengths.iter().any(|&n| n != lengths[0]));
        let expected = rmse_oracle(truth, pred, lengths);
        let Ok(got) = rmse_multitask(truth.view(), pred.view(), lengths) else {
            failures += 1;
            continue;
        };
        let mut gap = (got - expected).abs();
        if let Some(lit) = literal {
            gap = gap.max((got - lit).abs());
        }
        worst = worst.max(gap);
        failures += usize::from(gap > RMSE_TOL);
    }
    check(
        failures == 0 && cases.len() == 20,
        format!(
            "rmse matches the oracle within {RMSE_TOL:e} on {} cases ({unequal} with unequal task lengths); \
             worst {worst:.3e}",
            cases.len()
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7() -> Outcome {
    let mut rng = stream(7, 0);
    let mut worst_cons: f64 = 0.0;
    let mut worst_ref: f64 = 0.0;
    let mut errors = Vec::new();
    for _ in 0..20 {
        let p = SeirParams {
            beta: rng.random_range(0.1..1.0),
            sigma: rng.random_range(0.1..0.5),
            gamma: rng.random_range(0.05..0.3),
            mu: rng.random_range(0.005..0.1),
            n_pop: 10f64.powf(rng.random_range(4.0..7.0)),
            i0: rng.random_range(1.0..100.0),
            days: 120,
            ..SeirParams::default()
        };
        let fine = SeirParams { dt: p.dt / 10.0, ..p };
        match (simulate_seir(&p), simulate_seir(&fine)) {
            (Ok(a), Ok(b)) => {
                for t in 0..a.len() {
                    let total = a.s[t] + a.e[t] + a.i[t] + a.r[t];
                    worst_cons = worst_cons.max((total - p.n_pop).abs() / p.n_pop);
                    for (u, v) in [
                        (a.s[t], b.s[t]),
                        (a.e[t], b.e[t]),
                        (a.i[t], b.i[t]),
                        (a.r[t], b.r[t]),
                        (a.cumulative_cases[t], b.cumulative_cases[t]),
                        (a.cumulative_deaths[t], b.cumulative_deaths[t]),
                    ] {
                        // Entries far below one person are compared on that floor.
                        worst_ref = worst_ref.max((u - v).abs() / v.abs().max(1.0));
                    }
                }
            }
            (Err(e), _) | (_, Err(e)) => errors.push(e.to_string()),
        }
    }

    let base = SeirParams {
        days: 365,
        ..SeirParams::default()
    };
    let cfr_err = simulate_seir(&base).map(|t| {
        let cfr = t.cfr();
        [90, 180, 365].map(|d| (cfr[d] - base.mu).abs() / base.mu)
    });
    let (cfr_ok, cfr_text) = match &cfr_err {
        Ok([e90, e180, e365]) => (
            *e365 <= SEIR_CFR_REL_TOL && e365 <= e180 && e180 <= e90,
            format!(
                "|cfr - mu|/mu at days 90/180/365: {e90:.2e}/{e180:.2e}/{e365:.2e} (<= {SEIR_CFR_REL_TOL:e} at 365)"
            ),
        ),
        Err(e) => (false, format!("365-day run failed: {e}")),
    };
    check(
        errors.is_empty() && worst_cons <= SEIR_CONSERVATION_TOL && worst_ref <= SEIR_REFINEMENT_TOL && cfr_ok,
        format!(
            "conservation {worst_cons:.2e} (<= {SEIR_CONSERVATION_TOL:e}); dt/10 refinement {worst_ref:.2e} \
             (<= {SEIR_REFINEMENT_TOL:e}) over 20 parameter sets; {cfr_text}{}",
            if errors.is_empty() {
                String::new()
            } else {
                format!("; errors {errors:?}")
            }
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let (n, d) = (100, 27);
    let mut ok = 0;
    let mut sizes = Vec::new();
    for seed in 0..100u64 {
        let mut rng = stream(8, seed);
        let x = gaussian(&mut rng, n, d);
        let mut informative: Vec<usize> = (0..d).collect();
        for i in 0..3 {
            let j = rng.random_range(i..d);
            informative.swap(i, j);
        }
        informative.truncate(3);
        let coef = [1.0, 0.8, 0.6];
        let y: Array1<f64> = (0..n)
            .map(|r| {
                informative.iter().zip(coef).map(|(&j, c)| c * x[[r, j]]).sum::<f64>()
                    + 0.5 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let mut cfg = HybridConfig {
            m: SELECTION_M,
            ..HybridConfig::default()
        };
        cfg.forest.seed = seed;
        let rows: Vec<usize> = (0..n).collect();
        let Ok(out) = run_hybrid(x.view(), y.view(), &rows, &cfg) else {
            continue;
        };
        let sel = &out.selection.features;
        sizes.push(sel.len());
        if informative.iter().all(|j| sel.contains(j)) && sel.len() <= SELECTION_MAX_FEATURES {
            ok += 1;
        }
    }
    let mean_size = sizes.iter().sum::<usize>() as f64 / sizes.len().max(1) as f64;
    check(
        ok >= SELECTION_MIN_SEEDS,
        format!(
            "superset of the 3 informative features with <= {SELECTION_MAX_FEATURES} selected in {ok}/100 seeds \
             (need >= {SELECTION_MIN_SEEDS}); m = {SELECTION_M}; mean size {mean_size:.2}; {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 9

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_binary(out: &Path, threads: Option<&str>) -> Result<Duration, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mtfl"));
    cmd.current_dir(workspace_root())
        .args(["run", "--out"])
        .arg(out)
        .env("RUST_LOG", "warn");
    match threads {
        Some(t) => cmd.env("MTFL_THREADS", t),
        None => cmd.env_remove("MTFL_THREADS"),
    };
    let start = Instant::now();
    let status = cmd.output().map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    Ok(start.elapsed())
}

fn list_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn differing(a: &Path, b: &Path) -> Vec<String> {
    let (fa, fb) = (list_files(a), list_files(b));
    if fa != fb {
        return vec![format!("file sets differ: {fa:?} vs {fb:?}")];
    }
    fa.iter()
        .filter(|f| std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok())
        .map(|f| f.display().to_string())
        .collect()
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dirs = ["first", "second", "threads1", "threads8"].map(|n| tmp.path().join(n));
    let threads = [None, None, Some("1"), Some("8")];
    let mut times = Vec::new();
    for (dir, t) in dirs.iter().zip(threads) {
        match run_binary(dir, t) {
            Ok(e) => times.push(e),
            Err(e) => return check(false, format!("run failed: {}", e.trim())),
        }
    }
    let repeat = differing(&dirs[0], &dirs[1]);
    let threads = differing(&dirs[2], &dirs[3]);
    let cross = differing(&dirs[0], &dirs[2]);
    let n_files = list_files(&dirs[0]).len();
    let slowest = times.iter().max().unwrap().as_secs_f64();
    check(
        repeat.is_empty() && threads.is_empty() && cross.is_empty() && n_files > 0 && slowest < 300.0,
        format!(
            "{n_files} artifacts byte-identical across repeat runs {repeat:?} and MTFL_THREADS=1 vs 8 {threads:?} \
             (cross {cross:?}); slowest full run {slowest:.1}s (limit 300s)"
        ),
    )
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("1 prox correctness", criterion_1),
        ("2 lasso optimality", criterion_2),
        ("3 penalty reductions", criterion_3),
        ("4 model ordering", criterion_4),
        ("5 voting recovery", criterion_5),
        ("6 rmse oracle", criterion_6),
        ("7 seir", criterion_7),
        ("8 hybrid selection", criterion_8),
        ("9 determinism", criterion_9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let o = f();
        failed += usize::from(!o.pass);
        println!(
            "criterion {name}: {} | {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
