//! Command implementations behind the `mtfl` binary.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

use std::path::Path;

use ndarray::Axis;

use mtfl_core::featureprep::standard_scale;
use mtfl_core::multitask::{cross_validate, RunResult, TaskSpec};
use mtfl_core::seir::simulate_seir;
use mtfl_core::solvers::GramProblem;
use mtfl_core::{Indicator, Model, SolverReport};

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};

use error::{write_err, StageExt};
use pipeline::{FeatureInfo, ModelOutcome, ModelVotes, Prepared, RunsFile, Selection};

fn out_dir(cfg: &PipelineConfig) -> CliResult<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(write_err(&cfg.out))?;
    Ok(&cfg.out)
}

/// Ingest, then write the assembled matrix and any augmentation manifest.
pub fn cmd_ingest(cfg: &PipelineConfig) -> CliResult<()> {
    cfg.validate()?;
    let prepared = pipeline::ingest(cfg)?;
    let out = out_dir(cfg)?;
    report::dataset(&out.join("dataset.csv"), &prepared.dataset)?;
    if !prepared.manifest.is_empty() {
        report::manifest(&out.join("augmentation_manifest.json"), &prepared.manifest)?;
    }
    Ok(())
}

struct Modeled {
    prepared: Prepared,
    selection: Selection,
    task: TaskSpec,
    features: Vec<Indicator>,
}

fn model_inputs(cfg: &PipelineConfig, prepared: Prepared) -> CliResult<Modeled> {
    let full = prepared.tasks(cfg)?;
    let selection = pipeline::select(cfg, &full)?;
    let task = full.select_features(&selection.features);
    let features = selection
        .features
        .iter()
        .map(|&j| prepared.dataset.features[j].clone())
        .collect();
    Ok(Modeled {
        prepared,
        selection,
        task,
        features,
    })
}

fn write_selection(out: &Path, m: &Modeled) -> CliResult<()> {
    if let Some(outcome) = &m.selection.outcome {
        report::selection_report(
            &out.join("selection_report.csv"),
            &outcome.report_rows(&m.prepared.dataset.features),
        )?;
    }
    Ok(())
}

/// Hybrid selection only.
pub fn cmd_select(cfg: &PipelineConfig) -> CliResult<()> {
    cfg.validate()?;
    let m = model_inputs(cfg, pipeline::ingest(cfg)?)?;
    write_selection(out_dir(cfg)?, &m)
}

/// Cross-validate on every row and fit each configured model once.
pub fn cmd_fit(cfg: &PipelineConfig) -> CliResult<()> {
    cfg.validate()?;
    let m = model_inputs(cfg, pipeline::ingest(cfg)?)?;
    let out = out_dir(cfg)?;
    let rows: Vec<usize> = (0..m.task.n_samples()).collect();
    let x = standard_scale(m.task.x.view(), &rows).stage("fit")?.values;
    let mean = m.task.y.mean_axis(Axis(0)).expect("rows");
    let centered = &m.task.y - &mean;
    let problem = GramProblem::new(x.view(), centered.view());
    let infos: Vec<FeatureInfo> = m.features.iter().map(FeatureInfo::from).collect();
    let mut unconverged = 0;
    for &model in &cfg.models {
        let points = cfg.experiment.grid.points(model).stage("fit")?;
        let cv = cross_validate(
            x.view(),
            m.task.y.view(),
            &points,
            cfg.experiment.folds,
            mtfl_core::rng::derive_seed(cfg.seed, 1),
            &cfg.experiment.solver,
        )
        .stage("fit")?;
        let (w, rep) = problem.fit(&cv.best, None, &cfg.experiment.solver).stage("fit")?;
        log::info!("{model}: chose {:?}, objective {:.6e}", cv.best, rep.final_objective());
        unconverged += usize::from(!rep.converged);
        report::weights(&out.join(format!("weights_{model}.csv")), &infos, w.view())?;
        if cfg.trace {
            report::trace(&out.join(format!("trace_{model}.csv")), &rep)?;
        }
    }
    strict_check(cfg, unconverged)
}

fn strict_check(cfg: &PipelineConfig, unconverged: usize) -> CliResult<()> {
    if unconverged > 0 {
        log::warn!("{unconverged} fit(s) did not converge");
        if cfg.strict {
            return Err(CliError::NonConvergence(unconverged));
        }
    }
    Ok(())
}

fn run_models(cfg: &PipelineConfig, task: &TaskSpec) -> CliResult<Vec<ModelOutcome>> {
    cfg.models
        .iter()
        .map(|&model| pipeline::experiments(cfg, task, model))
        .collect()
}

fn write_experiment(cfg: &PipelineConfig, out: &Path, runs: &RunsFile, votes: &[ModelVotes]) -> CliResult<()> {
    report::write_json(&out.join("runs.json"), runs)?;
    report::model_comparison(&out.join("model_comparison.csv"), runs)?;
    report::experiment_report(&out.join("experiment_report.json"), runs, votes)?;
    if cfg.dump_weights {
        let dir = out.join("weights");
        std::fs::create_dir_all(&dir).map_err(write_err(&dir))?;
        for m in &runs.models {
            for r in &m.runs {
                let w = r.weight_matrix()?;
                report::weights(
                    &dir.join(format!("{}_run{:03}.csv", m.model, r.run)),
                    &runs.features,
                    w.view(),
                )?;
            }
        }
    }
    Ok(())
}

fn unconverged(runs: &RunsFile) -> usize {
    runs.models.iter().map(|m| m.n_unconverged).sum()
}

/// Repeated experiments per model; writes `runs.json` for `vote`/`report`.
pub fn cmd_experiment(cfg: &PipelineConfig) -> CliResult<RunsFile> {
    cfg.validate()?;
    let m = model_inputs(cfg, pipeline::ingest(cfg)?)?;
    let out = out_dir(cfg)?;
    let outcomes = run_models(cfg, &m.task)?;
    let runs = RunsFile::new(&m.features, &m.task, &outcomes);
    write_experiment(cfg, out, &runs, &[])?;
    strict_check(cfg, unconverged(&runs))?;
    Ok(runs)
}

fn votes_for(cfg: &PipelineConfig, runs: &RunsFile) -> CliResult<Vec<ModelVotes>> {
    runs.models
        .iter()
        .map(|m| pipeline::vote(m, cfg.vote.eps, cfg.vote.top_p))
        .collect()
}

fn write_importance(cfg: &PipelineConfig, out: &Path, runs: &RunsFile, votes: &[ModelVotes]) -> CliResult<()> {
    report::global_importance(&out.join("global_importance.csv"), &runs.features, votes)?;
    let models: Vec<Model> = votes.iter().map(|v| v.model).collect();
    let primary = pipeline::primary_model(&models);
    for (v, m) in votes.iter().zip(&runs.models) {
        let best = &m.runs[v.best_run];
        let ranked = report::ranked_weights(best.weight_matrix()?.view(), v);
        let title = format!("{} local importance, run {}", v.model, best.run);
        let mut names = vec![format!("local_importance_{}", v.model)];
        if Some(v.model) == primary {
            names.push("local_importance".to_string());
        }
        for name in names {
            report::local_importance_csv(&out.join(format!("{name}.csv")), &runs.features, ranked.view(), v)?;
            report::local_importance_svg(
                &out.join(format!("{name}.svg")),
                &title,
                &runs.features,
                ranked.view(),
                v,
                cfg.heatmap_scale,
            )?;
        }
    }
    Ok(())
}

/// Voting over a saved `runs.json`.
pub fn cmd_vote(cfg: &PipelineConfig, input: &Path) -> CliResult<Vec<ModelVotes>> {
    let runs = RunsFile::load(input)?;
    let votes = votes_for(cfg, &runs)?;
    write_importance(cfg, out_dir(cfg)?, &runs, &votes)?;
    Ok(votes)
}

/// All report artifacts from a saved `runs.json`.
pub fn cmd_report(cfg: &PipelineConfig, input: &Path) -> CliResult<()> {
    let runs = RunsFile::load(input)?;
    let votes = votes_for(cfg, &runs)?;
    let out = out_dir(cfg)?;
    report::model_comparison(&out.join("model_comparison.csv"), &runs)?;
    report::experiment_report(&out.join("experiment_report.json"), &runs, &votes)?;
    write_importance(cfg, out, &runs, &votes)
}

/// SEIR trajectory for the configured base parameters.
pub fn cmd_simulate(cfg: &PipelineConfig) -> CliResult<()> {
    let t = simulate_seir(&cfg.augment.base).map_err(|e| match e {
        mtfl_core::Error::InvalidArgument(m) => CliError::Config(m),
        other => CliError::Stage {
            stage: "simulate",
            source: other,
        },
    })?;
    report::trajectory(&out_dir(cfg)?.join("seir_trajectory.csv"), &t)
}

fn refit_report(cfg: &PipelineConfig, task: &TaskSpec, run: &RunResult) -> CliResult<SolverReport> {
    let x = if cfg.experiment.scale_features {
        standard_scale(task.x.view(), &run.train_rows).stage("report")?.values
    } else {
        task.x.clone()
    };
    let xt = x.select(Axis(0), &run.train_rows);
    let yt = task.y.select(Axis(0), &run.train_rows);
    let mean = yt.mean_axis(Axis(0)).expect("rows");
    let problem = GramProblem::new(xt.view(), (&yt - &mean).view());
    let (_, rep) = problem
        .fit(&run.penalty, None, &cfg.experiment.solver)
        .stage("report")?;
    Ok(rep)
}

/// Full pipeline: ingest, augment, select, experiment, vote, report, ablate.
pub fn run_pipeline(cfg: &PipelineConfig) -> CliResult<()> {
    cfg.validate()?;
    let prepared = pipeline::ingest(cfg)?;
    let out = out_dir(cfg)?;
    if !prepared.manifest.is_empty() {
        report::manifest(&out.join("augmentation_manifest.json"), &prepared.manifest)?;
    }
    let m = model_inputs(cfg, prepared)?;
    write_selection(out, &m)?;
    let outcomes = run_models(cfg, &m.task)?;
    let runs = RunsFile::new(&m.features, &m.task, &outcomes);
    let votes = votes_for(cfg, &runs)?;
    write_experiment(cfg, out, &runs, &votes)?;
    write_importance(cfg, out, &runs, &votes)?;

    if cfg.trace {
        for (o, v) in outcomes.iter().zip(&votes) {
            let rep = refit_report(cfg, &m.task, &o.runs[v.best_run])?;
            report::trace(&out.join(format!("trace_{}.csv", v.model)), &rep)?;
        }
    }

    if !cfg.ablate.is_empty() {
        let mut rows = vec![report::AblationRow {
            configuration: "all".into(),
            n_features: m.task.n_features(),
            scores: outcomes
                .iter()
                .map(|o| (o.report.model, o.report.rmse_mean, o.report.rmse_std))
                .collect(),
        }];
        for &sector in &cfg.ablate {
            let reduced = m.prepared.without_sectors(&[sector]);
            let sub = model_inputs(cfg, reduced)?;
            let scores = run_models(cfg, &sub.task)?
                .iter()
                .map(|o| (o.report.model, o.report.rmse_mean, o.report.rmse_std))
                .collect();
            rows.push(report::AblationRow {
                configuration: format!("without_{sector}"),
                n_features: sub.task.n_features(),
                scores,
            });
        }
        report::ablation(&out.join("ablation.csv"), &cfg.models, &rows)?;
    }
    strict_check(cfg, unconverged(&runs))
}
