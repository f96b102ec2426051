//! CSV, JSON and SVG artifact writers.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use mtfl_core::featureprep::SelectionReportRow;
use mtfl_core::ingest::Dataset;
use mtfl_core::seir::{ManifestEntry, SeirTrajectory};
use mtfl_core::{Model, SolverReport};

use crate::config::HeatmapScale;
use crate::error::{write_err, CliError, CliResult};
use crate::pipeline::{FeatureInfo, ModelVotes, RunsFile};

/// Plain decimal for ordinary magnitudes, exponent form otherwise.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(write_err(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(write_err(path))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Assembled matrix: one row per region, indicators then CFR days.
pub fn dataset(path: &Path, ds: &Dataset) -> CliResult<()> {
    let mut header = vec!["region_id".to_string()];
    header.extend(ds.features.iter().map(|f| f.name.clone()));
    header.extend((1..=ds.y.ncols()).map(|t| format!("cfr_day_{t:02}")));
    let rows: Vec<Vec<String>> = ds
        .regions
        .iter()
        .enumerate()
        .map(|(i, region)| {
            std::iter::once(region.to_string())
                .chain(ds.x.row(i).iter().chain(ds.y.row(i)).map(|v| num(*v)))
                .collect()
        })
        .collect();
    write_rows(path, &header, &rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(write_err(path))
}

/// One row per model: mean ± std test RMSE and the three phase RMSEs.
pub fn model_comparison(path: &Path, runs: &RunsFile) -> CliResult<()> {
    let header = strings(&[
        "model",
        "rmse_mean",
        "rmse_std",
        "rmse",
        "rmse_early",
        "rmse_middle",
        "rmse_late",
        "n_runs",
        "n_unconverged",
    ]);
    let rows: Vec<Vec<String>> = runs
        .models
        .iter()
        .map(|m| {
            vec![
                m.model.to_string(),
                num(m.rmse_mean),
                num(m.rmse_std),
                format!("{:.6} ± {:.6}", m.rmse_mean, m.rmse_std),
                num(m.per_phase[0]),
                num(m.per_phase[1]),
                num(m.per_phase[2]),
                m.runs.len().to_string(),
                m.n_unconverged.to_string(),
            ]
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// Stable ranking per model.
pub fn global_importance(path: &Path, features: &[FeatureInfo], votes: &[ModelVotes]) -> CliResult<()> {
    let header = strings(&[
        "model",
        "rank",
        "feature",
        "sector",
        "stage1_mean_count",
        "experiment_count",
        "borda_score",
    ]);
    let mut rows = Vec::new();
    for v in votes {
        for (rank, (&f, &score)) in v.stable.features.iter().zip(&v.stable.scores).enumerate() {
            rows.push(vec![
                v.model.to_string(),
                (rank + 1).to_string(),
                features[f].name.clone(),
                features[f].sector.to_string(),
                num(v.stage1_mean_count[f]),
                v.experiment_count[f].to_string(),
                score.to_string(),
            ]);
        }
    }
    write_rows(path, &header, &rows)
}

/// `d × k` weights with rows in stable-rank order.
pub fn ranked_weights(weights: ArrayView2<f64>, votes: &ModelVotes) -> Array2<f64> {
    weights.select(ndarray::Axis(0), &votes.stable.features)
}

fn task_header(k: usize) -> Vec<String> {
    let mut h = strings(&["feature", "sector"]);
    h.extend((1..=k).map(|t| format!("task_{t:02}")));
    h
}

/// Heatmap table of |W| (rows by global rank, tasks in time order).
pub fn local_importance_csv(
    path: &Path,
    features: &[FeatureInfo],
    ranked: ArrayView2<f64>,
    votes: &ModelVotes,
) -> CliResult<()> {
    let rows: Vec<Vec<String>> = votes
        .stable
        .features
        .iter()
        .zip(ranked.rows())
        .map(|(&f, row)| {
            let mut r = vec![features[f].name.clone(), features[f].sector.to_string()];
            r.extend(row.iter().map(|v| num(v.abs())));
            r
        })
        .collect();
    write_rows(path, &task_header(ranked.ncols()), &rows)
}

fn lerp(a: (f64, f64, f64), b: (f64, f64, f64), t: f64) -> String {
    let c = |x: f64, y: f64| (x + (y - x) * t).round().clamp(0.0, 255.0) as u8;
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}

fn cell_color(v: f64, max: f64, scale: HeatmapScale) -> String {
    const WHITE: (f64, f64, f64) = (255.0, 255.0, 255.0);
    const BLUE: (f64, f64, f64) = (33.0, 102.0, 172.0);
    const RED: (f64, f64, f64) = (178.0, 24.0, 43.0);
    const NAVY: (f64, f64, f64) = (8.0, 48.0, 107.0);
    let t = if max > 0.0 { (v / max).clamp(-1.0, 1.0) } else { 0.0 };
    match scale {
        HeatmapScale::Magnitude => lerp(WHITE, NAVY, t.abs()),
        HeatmapScale::Signed if t >= 0.0 => lerp(WHITE, RED, t),
        HeatmapScale::Signed => lerp(WHITE, BLUE, -t),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG heatmap of the ranked weights.
pub fn local_importance_svg(
    path: &Path,
    title: &str,
    features: &[FeatureInfo],
    ranked: ArrayView2<f64>,
    votes: &ModelVotes,
    scale: HeatmapScale,
) -> CliResult<()> {
    const CELL: usize = 14;
    const LEFT: usize = 260;
    const TOP: usize = 40;
    let (d, k) = ranked.dim();
    let max = ranked.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let width = LEFT + k * CELL + 20;
    let height = TOP + d * CELL + 40;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{LEFT}" y="20" font-size="13">{}</text>"#, escape(title));
    for (i, (&f, row)) in votes.stable.features.iter().zip(ranked.rows()).enumerate() {
        let y = TOP + i * CELL;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 6,
            y + CELL - 3,
            escape(&features[f].name)
        );
        for (t, v) in row.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"><title>{} task {}: {}</title></rect>"#,
                LEFT + t * CELL,
                cell_color(*v, max, scale),
                escape(&features[f].name),
                t + 1,
                num(*v)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="{}">tasks 1-{k} (time order); scale {} max {}</text>"#,
        TOP + d * CELL + 20,
        match scale {
            HeatmapScale::Magnitude => "|W|",
            HeatmapScale::Signed => "signed W",
        },
        num(max)
    );
    s.push_str("</svg>\n");
    std::fs::write(path, s).map_err(write_err(path))
}

pub fn selection_report(path: &Path, rows: &[SelectionReportRow]) -> CliResult<()> {
    let header = strings(&[
        "feature",
        "sector",
        "pearson_r",
        "f_stat",
        "rfe_rank",
        "forest_importance",
        "hybrid_selected",
    ]);
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.feature.clone(),
                r.sector.clone(),
                num(r.pearson_r),
                num(r.f_stat),
                r.rfe_rank.to_string(),
                num(r.forest_importance),
                r.hybrid_selected.to_string(),
            ]
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// One ablation configuration: label, features kept, per-model mean and std.
pub struct AblationRow {
    pub configuration: String,
    pub n_features: usize,
    pub scores: Vec<(Model, f64, f64)>,
}

pub fn ablation(path: &Path, models: &[Model], rows: &[AblationRow]) -> CliResult<()> {
    let mut header = strings(&["configuration", "n_features"]);
    for m in models {
        header.push(format!("{m}_rmse_mean"));
        header.push(format!("{m}_rmse_std"));
    }
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut out = vec![r.configuration.clone(), r.n_features.to_string()];
            for (_, mean, std) in &r.scores {
                out.push(num(*mean));
                out.push(num(*std));
            }
            out
        })
        .collect();
    write_rows(path, &header, &rows)
}

pub fn weights(path: &Path, features: &[FeatureInfo], w: ArrayView2<f64>) -> CliResult<()> {
    let rows: Vec<Vec<String>> = features
        .iter()
        .zip(w.rows())
        .map(|(f, row)| {
            let mut r = vec![f.name.clone(), f.sector.to_string()];
            r.extend(row.iter().map(|v| num(*v)));
            r
        })
        .collect();
    write_rows(path, &task_header(w.ncols()), &rows)
}

pub fn trace(path: &Path, report: &SolverReport) -> CliResult<()> {
    let f = File::create(path).map_err(write_err(path))?;
    let mut w = BufWriter::new(f);
    report.write_trace(&mut w).map_err(write_err(path))?;
    w.flush().map_err(write_err(path))
}

pub fn trajectory(path: &Path, t: &SeirTrajectory) -> CliResult<()> {
    let header = strings(&[
        "day",
        "susceptible",
        "exposed",
        "infected",
        "recovered",
        "cumulative_cases",
        "cumulative_deaths",
        "cfr",
    ]);
    let cfr = t.cfr();
    let rows: Vec<Vec<String>> = (0..t.len())
        .map(|d| {
            vec![
                d.to_string(),
                num(t.s[d]),
                num(t.e[d]),
                num(t.i[d]),
                num(t.r[d]),
                num(t.cumulative_cases[d]),
                num(t.cumulative_deaths[d]),
                num(cfr[d]),
            ]
        })
        .collect();
    write_rows(path, &header, &rows)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    run: usize,
    seed: u64,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    cv_score: f64,
    test_rmse: f64,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

#[derive(Serialize)]
struct ModelSummary<'a> {
    model: Model,
    rmse_mean: f64,
    rmse_std: f64,
    per_phase: [f64; 3],
    n_unconverged: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_run: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stable_ranking: Option<Vec<&'a str>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    tie_notes: Vec<String>,
    runs: Vec<RunSummary<'a>>,
}

#[derive(Serialize)]
struct ExperimentReport<'a> {
    features: Vec<&'a str>,
    n_tasks: usize,
    group_size: usize,
    models: Vec<ModelSummary<'a>>,
}

/// Per-model RMSE summary, chosen penalties per run and, when voting has
/// run, the best-run identifier and stable ranking.
pub fn experiment_report(path: &Path, runs: &RunsFile, votes: &[ModelVotes]) -> CliResult<()> {
    let report = ExperimentReport {
        features: runs.features.iter().map(|f| f.name.as_str()).collect(),
        n_tasks: runs.n_tasks,
        group_size: runs.group_size,
        models: runs
            .models
            .iter()
            .map(|m| {
                let v = votes.iter().find(|v| v.model == m.model);
                ModelSummary {
                    model: m.model,
                    rmse_mean: m.rmse_mean,
                    rmse_std: m.rmse_std,
                    per_phase: m.per_phase,
                    n_unconverged: m.n_unconverged,
                    best_run: v.map(|v| m.runs[v.best_run].run),
                    stable_ranking: v.map(|v| {
                        v.stable
                            .features
                            .iter()
                            .map(|&f| runs.features[f].name.as_str())
                            .collect()
                    }),
                    tie_notes: v.map(|v| v.stable.tie_notes.clone()).unwrap_or_default(),
                    runs: m
                        .runs
                        .iter()
                        .map(|r| RunSummary {
                            run: r.run,
                            seed: r.seed,
                            lambda1: r.penalty.lambda1,
                            lambda2: r.penalty.lambda2,
                            lambda3: r.penalty.lambda3,
                            cv_score: r.cv_score,
                            test_rmse: r.test_rmse,
                            converged: r.converged,
                            note: (!r.converged).then_some("did not converge"),
                        })
                        .collect(),
                }
            })
            .collect(),
    };
    write_json(path, &report)
}

pub fn manifest(path: &Path, entries: &[ManifestEntry]) -> CliResult<()> {
    write_json(path, &entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(1e-7), "1e-7");
        assert_eq!(num(f64::MAX), "1.7976931348623157e308");
    }

    #[test]
    fn colors() {
        assert_eq!(cell_color(0.0, 1.0, HeatmapScale::Magnitude), "#ffffff");
        assert_eq!(cell_color(-1.0, 1.0, HeatmapScale::Magnitude), "#08306b");
        assert_eq!(cell_color(1.0, 1.0, HeatmapScale::Signed), "#b2182b");
        assert_eq!(cell_color(-1.0, 1.0, HeatmapScale::Signed), "#2166ac");
        assert_eq!(cell_color(1.0, 0.0, HeatmapScale::Signed), "#ffffff");
    }
}
