//! Stage functions shared by the subcommands.

use ndarray::{concatenate, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mtfl_core::featureprep::{run_hybrid, HybridConfig, HybridOutcome};
use mtfl_core::ingest::{
    assemble_dataset, compute_cfr_series, flag_outliers, impute_missing, load_epidemic, load_factor_table,
    ColumnMapping, Dataset,
};
use mtfl_core::multitask::{build_tasks, run_experiment, run_seed, summarize, EvalReport, RunResult, TaskSpec};
use mtfl_core::seir::{param_variants, synthesize_samples, FactorTemplate, ManifestEntry, SynthOptions};
use mtfl_core::voting::{aggregate_ranking, select_best_model, task_vote, StabilityRanking, VoteTable};
use mtfl_core::{Indicator, Model, PenaltyConfig, Sector};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, StageExt};

/// Assembled rows, real regions first, synthetic regions appended.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub n_synthetic: usize,
    pub manifest: Vec<ManifestEntry>,
}

pub fn ingest(cfg: &PipelineConfig) -> CliResult<Prepared> {
    cfg.check_inputs()?;
    let mut table = load_factor_table(&cfg.factors, &ColumnMapping::default()).stage("ingest")?;
    if let Some(k) = cfg.outlier_k_iqr {
        let flagged = flag_outliers(&mut table, k);
        log::info!("flagged {flagged} outlier cells as missing");
    }
    let table = impute_missing(&table).stage("ingest")?;
    let series = load_epidemic(&cfg.epidemic).stage("ingest")?;
    let cfr = series
        .iter()
        .map(|s| compute_cfr_series(s, cfg.window))
        .collect::<mtfl_core::Result<Vec<_>>>()
        .stage("ingest")?;
    let mut dataset = assemble_dataset(&table, &cfr, &series, cfg.window, cfg.summary_days).stage("ingest")?;
    log::info!(
        "ingested {} regions × {} indicators, window {}",
        dataset.n_samples(),
        dataset.n_features(),
        cfg.window
    );

    let mut manifest = Vec::new();
    let n_synthetic = cfg.augment.count;
    if n_synthetic > 0 {
        let template = FactorTemplate::mean_of(&table).stage("augment")?;
        let variants = param_variants(
            &cfg.augment.base,
            n_synthetic,
            cfg.augment.param_spread,
            mtfl_core::rng::derive_seed(cfg.seed, 0xA0),
        )
        .stage("augment")?;
        let opts = SynthOptions {
            jitter: cfg.augment.jitter,
            seed: mtfl_core::rng::derive_seed(cfg.seed, 0xA1),
            window: cfg.window,
            summary_days: cfg.summary_days,
        };
        let synth = synthesize_samples(&template, &variants, n_synthetic, &opts).stage("augment")?;
        dataset.x = concatenate![Axis(0), dataset.x, synth.x];
        dataset.y = concatenate![Axis(0), dataset.y, synth.cfr];
        dataset.regions.extend(synth.regions);
        manifest = synth.manifest;
        log::info!("appended {n_synthetic} synthetic regions");
    }
    Ok(Prepared {
        dataset,
        n_synthetic,
        manifest,
    })
}

impl Prepared {
    /// Drop every indicator of the given sectors.
    pub fn without_sectors(&self, sectors: &[Sector]) -> Prepared {
        let keep: Vec<usize> = (0..self.dataset.n_features())
            .filter(|&j| !sectors.contains(&self.dataset.features[j].sector))
            .collect();
        let mut out = self.clone();
        out.dataset.x = self.dataset.x.select(Axis(1), &keep);
        out.dataset.features = keep.iter().map(|&j| self.dataset.features[j].clone()).collect();
        out
    }

    /// Coupled task targets over every indicator.
    pub fn tasks(&self, cfg: &PipelineConfig) -> CliResult<TaskSpec> {
        build_tasks(self.dataset.x.view(), self.dataset.y.view(), cfg.group_size)
            .and_then(|t| t.with_synthetic(self.n_synthetic))
            .stage("tasks")
    }
}

/// Hybrid selection result over the prepared indicators.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Sorted indices into the prepared indicators.
    pub features: Vec<usize>,
    pub outcome: Option<HybridOutcome>,
}

/// Select on the mean task target across all rows.
pub fn select(cfg: &PipelineConfig, full: &TaskSpec) -> CliResult<Selection> {
    let d = full.n_features();
    if d == 0 {
        return Err(CliError::Config("no indicators left to model".into()));
    }
    if !cfg.select_features {
        return Ok(Selection {
            features: (0..d).collect(),
            outcome: None,
        });
    }
    let hybrid = HybridConfig {
        m: cfg.selection.m.min(d),
        forest: mtfl_core::featureprep::ForestConfig {
            seed: mtfl_core::rng::derive_seed(cfg.seed, 0xF0),
            ..cfg.selection.forest
        },
        ..cfg.selection.clone()
    };
    let target = full.y.mean_axis(Axis(1)).expect("at least one task");
    let rows: Vec<usize> = (0..full.n_samples()).collect();
    let outcome = run_hybrid(full.x.view(), target.view(), &rows, &hybrid).stage("select")?;
    if outcome.selection.used_fallback {
        log::warn!("hybrid selection used the mean-rank fallback");
    }
    log::info!("selected {} of {d} indicators", outcome.selection.features.len());
    Ok(Selection {
        features: outcome.selection.features.clone(),
        outcome: Some(outcome),
    })
}

/// Runs of one model plus their summary.
#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub report: EvalReport,
    pub runs: Vec<RunResult>,
}

/// Repeated experiments for one model; runs execute on the current rayon
/// pool and are collected in run order.
pub fn experiments(cfg: &PipelineConfig, task: &TaskSpec, model: Model) -> CliResult<ModelOutcome> {
    let runs = (0..cfg.n_runs)
        .into_par_iter()
        .map(|r| {
            let mut res = run_experiment(task, model, &cfg.experiment, run_seed(cfg.seed, r))?;
            res.run = r;
            Ok(res)
        })
        .collect::<mtfl_core::Result<Vec<_>>>()
        .stage("experiment")?;
    let report = summarize(&runs).stage("experiment")?;
    log::info!(
        "{model}: test rmse {:.6} ± {:.6} over {} runs",
        report.rmse_mean,
        report.rmse_std,
        report.n_runs
    );
    Ok(ModelOutcome { report, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub sector: Sector,
}

impl From<&Indicator> for FeatureInfo {
    fn from(ind: &Indicator) -> Self {
        Self {
            name: ind.name.clone(),
            sector: ind.sector,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub penalty: PenaltyConfig,
    pub cv_score: f64,
    pub test_rmse: f64,
    pub per_phase: [f64; 3],
    pub converged: bool,
    pub iterations: usize,
    /// Row-major `features × tasks`.
    pub weights: Vec<Vec<f64>>,
}

impl RunRecord {
    pub fn weight_matrix(&self) -> CliResult<Array2<f64>> {
        let d = self.weights.len();
        let k = self.weights.first().map_or(0, Vec::len);
        let flat: Vec<f64> = self.weights.iter().flatten().copied().collect();
        Array2::from_shape_vec((d, k), flat)
            .map_err(|_| CliError::Config(format!("run {} has ragged weights", self.run)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRuns {
    pub model: Model,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub per_phase: [f64; 3],
    pub n_unconverged: usize,
    pub runs: Vec<RunRecord>,
}

/// Everything the `vote` and `report` stages need, as written by `experiment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunsFile {
    /// Modeled indicators, in weight-row order.
    pub features: Vec<FeatureInfo>,
    pub n_tasks: usize,
    pub group_size: usize,
    pub models: Vec<ModelRuns>,
}

impl RunsFile {
    pub fn new(features: &[Indicator], task: &TaskSpec, outcomes: &[ModelOutcome]) -> Self {
        Self {
            features: features.iter().map(FeatureInfo::from).collect(),
            n_tasks: task.n_tasks(),
            group_size: task.group_size,
            models: outcomes
                .iter()
                .map(|o| ModelRuns {
                    model: o.report.model,
                    rmse_mean: o.report.rmse_mean,
                    rmse_std: o.report.rmse_std,
                    per_phase: o.report.per_phase,
                    n_unconverged: o.report.n_unconverged,
                    runs: o
                        .runs
                        .iter()
                        .map(|r| RunRecord {
                            run: r.run,
                            seed: r.seed,
                            penalty: r.penalty,
                            cv_score: r.cv_score,
                            test_rmse: r.test_rmse,
                            per_phase: r.per_phase,
                            converged: r.converged,
                            iterations: r.iterations,
                            weights: r.weights.rows().into_iter().map(|row| row.to_vec()).collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read runs file {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid runs file {}: {e}", path.display())))
    }
}

/// Voting outcome for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVotes {
    pub model: Model,
    pub stable: StabilityRanking,
    /// Per feature: task votes per run.
    pub stage1_mean_count: Vec<f64>,
    /// Per feature: runs with any task vote.
    pub experiment_count: Vec<usize>,
    /// Index into the model's runs.
    pub best_run: usize,
}

pub fn vote(runs: &ModelRuns, eps: f64, top_p: usize) -> CliResult<ModelVotes> {
    let d = runs.runs.first().map_or(0, |r| r.weights.len());
    let mut task_table = VoteTable::empty(d);
    let mut run_table = VoteTable::empty(d);
    let mut rankings = Vec::with_capacity(runs.runs.len());
    for r in &runs.runs {
        let v = task_vote(r.weight_matrix()?.view(), eps).stage("vote")?;
        task_table.merge(&v.table).stage("vote")?;
        run_table.merge(&v.experiment_votes()).stage("vote")?;
        rankings.push(v.ranking);
    }
    let stable = aggregate_ranking(&rankings).stage("vote")?;
    let rmse: Vec<f64> = runs.runs.iter().map(|r| r.test_rmse).collect();
    let best_run = select_best_model(&stable, &rankings, &rmse, top_p.min(d)).stage("vote")?;
    let n = runs.runs.len() as f64;
    Ok(ModelVotes {
        model: runs.model,
        stable,
        stage1_mean_count: task_table.counts.iter().map(|&c| c as f64 / n).collect(),
        experiment_count: run_table.counts,
        best_run,
    })
}

/// The model whose heatmap is also written without a model suffix.
pub fn primary_model(models: &[Model]) -> Option<Model> {
    if models.contains(&Model::Fsgl) {
        Some(Model::Fsgl)
    } else {
        models.first().copied()
    }
}
