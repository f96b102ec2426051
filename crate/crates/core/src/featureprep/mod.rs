//! Preliminary feature selection: standard scaling, two univariate filters,
//! an RFE wrapper and forest importances, combined as
//! `(pearson ∩ fscore) ∪ (∩ wrappers)`.

mod filter;
mod forest;
mod rfe;
mod scale;

use std::collections::BTreeSet;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ingest::Indicator;

pub use filter::{f_from_r, f_scores, pearson_scores, FilterScores, F_SENTINEL};
pub use forest::{forest_importance, ForestConfig};
pub use rfe::rfe_select;
pub use scale::{standard_scale, ScaledMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pearson,
    FScore,
    Rfe,
    Forest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    /// Best first.
    pub selected: Vec<usize>,
    /// Higher is better.
    pub scores: Vec<f64>,
}

impl SelectionResult {
    /// Pick the `m` highest scores, ties going to the lower index.
    pub fn top_m(method: Method, scores: Vec<f64>, m: usize) -> Self {
        let selected = ranking(&scores).into_iter().take(m).collect();
        Self {
            method,
            selected,
            scores,
        }
    }

    pub fn set(&self) -> BTreeSet<usize> {
        self.selected.iter().copied().collect()
    }
}

fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridSelection {
    /// Sorted feature indices.
    pub features: Vec<usize>,
    pub used_fallback: bool,
}

/// `(filters[0] ∩ filters[1]) ∪ (∩ wrappers)`. An empty union falls back to
/// the features with the best mean rank across every input, keeping as many
/// as the smallest input selection.
pub fn hybrid_select(filters: &[SelectionResult; 2], wrappers: &[SelectionResult]) -> Result<HybridSelection> {
    if wrappers.len() < 2 {
        return Err(invalid(format!(
            "hybrid selection needs at least 2 wrappers, got {}",
            wrappers.len()
        )));
    }
    let all: Vec<&SelectionResult> = filters.iter().chain(wrappers).collect();
    let d = all[0].scores.len();
    for r in &all {
        if r.scores.len() != d || r.selected.iter().any(|&f| f >= d) {
            return Err(invalid("selection results cover different feature sets"));
        }
    }
    let filtered: BTreeSet<usize> = filters[0].set().intersection(&filters[1].set()).copied().collect();
    let mut wrapped = wrappers[0].set();
    for w in &wrappers[1..] {
        wrapped = wrapped.intersection(&w.set()).copied().collect();
    }
    let union: Vec<usize> = filtered.union(&wrapped).copied().collect();
    if !union.is_empty() {
        return Ok(HybridSelection {
            features: union,
            used_fallback: false,
        });
    }

    let keep = all.iter().map(|r| r.selected.len()).min().unwrap_or(1).max(1);
    let mut rank_sum = vec![0usize; d];
    for r in &all {
        for (rank, f) in ranking(&r.scores).into_iter().enumerate() {
            rank_sum[f] += rank;
        }
    }
    let mut features: Vec<usize> = (0..d).collect();
    features.sort_by_key(|&f| (rank_sum[f], f));
    features.truncate(keep);
    features.sort_unstable();
    log::warn!("hybrid selection sets were disjoint; falling back to the {keep} best mean-rank features");
    Ok(HybridSelection {
        features,
        used_fallback: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridConfig {
    /// Features kept by each individual method.
    pub m: usize,
    pub rfe_lambda: f64,
    pub forest: ForestConfig,
    /// Number of forests acting as tree wrappers, each with its own seed.
    pub n_forests: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            m: 15,
            rfe_lambda: 1.0,
            forest: ForestConfig::default(),
            n_forests: 2,
        }
    }
}

/// Everything produced by one hybrid-selection pass.
#[derive(Debug, Clone)]
pub struct HybridOutcome {
    pub scaled: ScaledMatrix,
    pub filter_scores: FilterScores,
    pub pearson: SelectionResult,
    pub fscore: SelectionResult,
    pub rfe: SelectionResult,
    pub forests: Vec<SelectionResult>,
    pub selection: HybridSelection,
}

/// One line of the selection report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReportRow {
    pub feature: String,
    pub sector: String,
    pub pearson_r: f64,
    pub f_stat: f64,
    /// 1 = kept longest.
    pub rfe_rank: usize,
    pub forest_importance: f64,
    pub hybrid_selected: bool,
}

impl HybridOutcome {
    pub fn report_rows(&self, features: &[Indicator]) -> Vec<SelectionReportRow> {
        let d = self.rfe.scores.len();
        let nf = self.forests.len().max(1) as f64;
        features
            .iter()
            .enumerate()
            .map(|(j, ind)| SelectionReportRow {
                feature: ind.name.clone(),
                sector: ind.sector.as_str().to_string(),
                pearson_r: self.filter_scores.pearson_r[j],
                f_stat: self.filter_scores.f_stat[j],
                rfe_rank: d + 1 - self.rfe.scores[j] as usize,
                forest_importance: self.forests.iter().map(|f| f.scores[j]).sum::<f64>() / nf,
                hybrid_selected: self.selection.features.binary_search(&j).is_ok(),
            })
            .collect()
    }
}

/// Scale on `fit_rows`, run every method on those rows and combine.
pub fn run_hybrid(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    fit_rows: &[usize],
    cfg: &HybridConfig,
) -> Result<HybridOutcome> {
    let d = x.ncols();
    if cfg.m == 0 || cfg.m > d {
        return Err(invalid(format!("selection size {} must lie in 1..={d}", cfg.m)));
    }
    if cfg.n_forests == 0 {
        return Err(invalid("at least one forest wrapper is required"));
    }
    let scaled = standard_scale(x, fit_rows)?;
    let xs = scaled.values.select(ndarray::Axis(0), fit_rows);
    let ys = y.select(ndarray::Axis(0), fit_rows);

    let filter_scores = pearson_scores(xs.view(), ys.view())?;
    let abs_r = filter_scores.pearson_r.iter().map(|r| r.abs()).collect();
    let pearson = SelectionResult::top_m(Method::Pearson, abs_r, cfg.m);
    let fscore = SelectionResult::top_m(Method::FScore, f_scores(xs.view(), ys.view())?.f_stat, cfg.m);

    let rfe = rfe_select(xs.view(), ys.view(), cfg.m, cfg.rfe_lambda)?;
    let forests = (0..cfg.n_forests)
        .map(|k| {
            let fc = ForestConfig {
                seed: crate::rng::derive_seed(cfg.forest.seed, k as u64),
                ..cfg.forest
            };
            forest_importance(xs.view(), ys.view(), &fc, cfg.m)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut wrappers = vec![rfe.clone()];
    wrappers.extend(forests.iter().cloned());
    let selection = hybrid_select(&[pearson.clone(), fscore.clone()], &wrappers)?;
    Ok(HybridOutcome {
        scaled,
        filter_scores,
        pearson,
        fscore,
        rfe,
        forests,
        selection,
    })
}
