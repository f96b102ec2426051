use std::path::{Path, PathBuf};

use mtfl_core::featureprep::HybridConfig;
use mtfl_core::multitask::ExperimentConfig;
use mtfl_core::seir::SeirParams;
use mtfl_core::{Model, Sector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Synthetic regions to add; 0 disables augmentation.
    pub count: usize,
    pub base: SeirParams,
    /// Relative spread of the SEIR rates across synthetic regions.
    pub param_spread: f64,
    /// Relative jitter on copied static factors.
    pub jitter: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            count: 0,
            base: SeirParams::default(),
            param_spread: 0.2,
            jitter: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoteConfig {
    pub eps: f64,
    /// Top-p overlap used to match the best single run.
    pub top_p: usize,
}

impl Default for VoteConfig {
    fn default() -> Self {
        Self {
            eps: mtfl_core::voting::DEFAULT_EPS,
            top_p: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum HeatmapScale {
    /// Sequential scale over |W|.
    #[default]
    Magnitude,
    /// Diverging scale over signed W.
    Signed,
}

/// Whole-pipeline configuration, read from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub factors: PathBuf,
    pub epidemic: PathBuf,
    pub out: PathBuf,
    pub window: usize,
    pub group_size: usize,
    pub summary_days: usize,
    /// Flag values further than this many IQRs from the median as missing
    /// before imputation.
    pub outlier_k_iqr: Option<f64>,
    pub models: Vec<Model>,
    pub n_runs: usize,
    pub seed: u64,
    pub experiment: ExperimentConfig,
    /// Skip hybrid selection and keep every indicator when false.
    pub select_features: bool,
    pub selection: HybridConfig,
    pub augment: AugmentConfig,
    /// Sectors to drop one at a time for the ablation table.
    pub ablate: Vec<Sector>,
    pub vote: VoteConfig,
    pub heatmap_scale: HeatmapScale,
    /// Dump the objective trace of each model's representative refit.
    pub trace: bool,
    /// Exit with an error when any fit fails to converge.
    pub strict: bool,
    /// Write every run's weight matrix.
    pub dump_weights: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            factors: PathBuf::from("data/sample/factors.csv"),
            epidemic: PathBuf::from("data/sample/epidemic.csv"),
            out: PathBuf::from("out"),
            window: mtfl_core::ingest::DEFAULT_WINDOW,
            group_size: mtfl_core::multitask::DEFAULT_GROUP_SIZE,
            summary_days: mtfl_core::ingest::DEFAULT_SUMMARY_DAYS,
            outlier_k_iqr: None,
            models: Model::ALL.to_vec(),
            n_runs: 100,
            seed: 0,
            experiment: ExperimentConfig::default(),
            select_features: true,
            selection: HybridConfig::default(),
            augment: AugmentConfig::default(),
            ablate: Vec::new(),
            vote: VoteConfig::default(),
            heatmap_scale: HeatmapScale::default(),
            trace: false,
            strict: false,
            dump_weights: false,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }

    /// Checks that need no file access.
    pub fn validate(&self) -> CliResult<()> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.group_size == 0 || self.window == 0 || !self.window.is_multiple_of(self.group_size) {
            return fail(format!(
                "window {} is not divisible by group size {}",
                self.window, self.group_size
            ));
        }
        if self.n_runs == 0 {
            return fail("n_runs must be at least 1".into());
        }
        if self.models.is_empty() {
            return fail("at least one model is required".into());
        }
        if self.summary_days == 0 || self.summary_days > self.window {
            return fail(format!("summary_days must lie in 1..={}", self.window));
        }
        if self.experiment.folds < 2 {
            return fail("experiment.folds must be at least 2".into());
        }
        for model in &self.models {
            let pts = self
                .experiment
                .grid
                .points(*model)
                .map_err(|e| CliError::Config(e.to_string()))?;
            if pts.is_empty() {
                return fail(format!("empty grid for {model}"));
            }
        }
        if self.selection.m == 0 || self.selection.rfe_lambda <= 0.0 || self.selection.n_forests == 0 {
            return fail("selection needs m >= 1, rfe_lambda > 0 and at least one forest".into());
        }
        if self.vote.eps <= 0.0 || self.vote.top_p == 0 {
            return fail("vote.eps must be positive and vote.top_p at least 1".into());
        }
        if self.augment.count > 0 {
            self.augment
                .base
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            if self.augment.base.days + 1 < self.window {
                return fail("augment.base.days must cover the observation window".into());
            }
        }
        Ok(())
    }

    /// Checks that the input files exist.
    pub fn check_inputs(&self) -> CliResult<()> {
        for (what, p) in [("factor table", &self.factors), ("epidemic series", &self.epidemic)] {
            if !p.is_file() {
                return Err(CliError::Config(format!("{what} not found: {}", p.display())));
            }
        }
        Ok(())
    }
}
