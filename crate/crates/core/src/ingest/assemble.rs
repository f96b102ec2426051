use std::collections::HashMap;

use ndarray::Array2;

use super::{normalize_name, CfrSeries, EpidemicSeries, FactorTable, Indicator, RegionId, Sector};
use crate::error::{invalid, Error, Result};

/// Leading days over which progression indicators are averaged.
pub const DEFAULT_SUMMARY_DAYS: usize = 7;

/// Model-ready design matrix and raw daily CFR targets, rows sorted by region.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub regions: Vec<RegionId>,
    pub features: Vec<Indicator>,
    /// regions × features
    pub x: Array2<f64>,
    /// regions × window daily CFR
    pub y: Array2<f64>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Clone, Copy)]
enum Progression {
    NewCases,
    NewDeaths,
    Active,
}

fn derivable(name: &str) -> Option<Progression> {
    match normalize_name(name).as_str() {
        "daily_new_cases" | "new_cases" => Some(Progression::NewCases),
        "daily_new_deaths" | "new_deaths" => Some(Progression::NewDeaths),
        "current_active_case" | "current_active_cases" | "active_cases" | "active_case" => Some(Progression::Active),
        _ => None,
    }
}

/// Mean over `0..days` of the derived daily quantity.
fn summarize(kind: Progression, cases: &[f64], deaths: &[f64], days: usize) -> f64 {
    let daily = |series: &[f64], t: usize| if t == 0 { series[0] } else { series[t] - series[t - 1] };
    let total: f64 = (0..days)
        .map(|t| match kind {
            Progression::NewCases => daily(cases, t),
            Progression::NewDeaths => daily(deaths, t),
            Progression::Active => cases[t] - deaths[t],
        })
        .sum();
    total / days as f64
}

/// Summary value of a derivable progression indicator, `None` for any other name.
pub(crate) fn progression_summary(name: &str, cases: &[f64], deaths: &[f64], days: usize) -> Option<f64> {
    derivable(name).map(|kind| summarize(kind, cases, deaths, days))
}

/// Join the (imputed) factor table with per-region CFR series.
///
/// Progression-sector indicators that can be derived from the epidemic series
/// (daily new cases, daily new deaths, current active cases) are replaced by
/// their mean over the first `summary_days` days, so that one shared design
/// row serves every task. Other indicators pass through unchanged.
pub fn assemble_dataset(
    ft: &FactorTable,
    cfr: &[CfrSeries],
    series: &[EpidemicSeries],
    window: usize,
    summary_days: usize,
) -> Result<Dataset> {
    if window == 0 {
        return Err(invalid("window must be positive"));
    }
    if summary_days == 0 || summary_days > window {
        return Err(invalid(format!(
            "summary window {summary_days} must lie in 1..={window}"
        )));
    }
    if ft.n_missing() > 0 {
        return Err(invalid("factor table still has missing cells; impute first"));
    }
    let cfr_by_region: HashMap<&RegionId, &CfrSeries> = cfr.iter().map(|c| (&c.region, c)).collect();
    let series_by_region: HashMap<&RegionId, &EpidemicSeries> = series.iter().map(|s| (s.region(), s)).collect();

    let mut order: Vec<usize> = (0..ft.regions().len()).collect();
    order.sort_by(|&a, &b| ft.regions()[a].cmp(&ft.regions()[b]));

    let derived: Vec<(usize, Progression)> = ft
        .indicators()
        .iter()
        .enumerate()
        .filter(|(_, ind)| ind.sector == Sector::Progression)
        .filter_map(|(j, ind)| derivable(&ind.name).map(|k| (j, k)))
        .collect();

    let n = order.len();
    let d = ft.indicators().len();
    let mut x = Array2::zeros((n, d));
    let mut y = Array2::zeros((n, window));
    for (row, &src) in order.iter().enumerate() {
        let region = &ft.regions()[src];
        let c = cfr_by_region
            .get(region)
            .ok_or_else(|| Error::MissingCfr(region.to_string()))?;
        if c.cfr.len() != window {
            return Err(Error::MissingDay {
                region: region.to_string(),
                day: c.cfr.len().min(window),
            });
        }
        x.row_mut(row).assign(&ft.values().row(src));
        y.row_mut(row).assign(&ndarray::ArrayView1::from(&c.cfr[..]));

        if !derived.is_empty() {
            let s = series_by_region
                .get(region)
                .ok_or_else(|| Error::MissingCfr(region.to_string()))?;
            let (cases, deaths) = s.window(summary_days)?;
            for &(j, kind) in &derived {
                x[[row, j]] = summarize(kind, &cases, &deaths, summary_days);
            }
        }
    }

    Ok(Dataset {
        regions: order.iter().map(|&i| ft.regions()[i].clone()).collect(),
        features: ft.indicators().to_vec(),
        x,
        y,
    })
}

#[cfg(test)]
mod tests {
    use super::super::compute_cfr_series;
    use super::*;

    fn region(i: usize) -> RegionId {
        RegionId::new(format!("R{i:02}")).unwrap()
    }

    fn fixture(n: usize, d: usize, window: usize) -> (FactorTable, Vec<CfrSeries>, Vec<EpidemicSeries>) {
        let mut indicators = vec![
            Indicator::new(Sector::Progression, "daily_new_cases"),
            Indicator::new(Sector::Progression, "daily_new_deaths"),
            Indicator::new(Sector::Progression, "current_active_case"),
            Indicator::new(Sector::Progression, "cases_per_million"),
        ];
        for j in indicators.len()..d {
            indicators.push(Indicator::new(Sector::Others, format!("f{j}")));
        }
        let regions: Vec<RegionId> = (0..n).map(region).collect();
        let values = Array2::from_shape_fn((n, d), |(i, j)| (i * d + j) as f64);
        let ft = FactorTable::from_dense(regions.clone(), indicators, values).unwrap();
        let series: Vec<EpidemicSeries> = regions
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let recs = (0..window)
                    .map(|t| (t, (10 * (t + 1) * (i + 1)) as f64, t as f64))
                    .collect();
                EpidemicSeries::new(r.clone(), recs).unwrap()
            })
            .collect();
        let cfr = series.iter().map(|s| compute_cfr_series(s, window).unwrap()).collect();
        (ft, cfr, series)
    }

    #[test]
    fn full_size_shapes() {
        let (ft, cfr, series) = fixture(29, 27, 42);
        let ds = assemble_dataset(&ft, &cfr, &series, 42, 7).unwrap();
        assert_eq!(ds.x.dim(), (29, 27));
        assert_eq!(ds.y.dim(), (29, 42));
    }

    #[test]
    fn single_region() {
        let (ft, cfr, series) = fixture(1, 27, 42);
        let ds = assemble_dataset(&ft, &cfr, &series, 42, 7).unwrap();
        assert_eq!(ds.x.dim(), (1, 27));
        assert_eq!(ds.y.dim(), (1, 42));
    }

    #[test]
    fn short_cfr_series_rejected() {
        let (ft, mut cfr, series) = fixture(2, 6, 42);
        cfr[1].cfr.truncate(41);
        assert!(matches!(
            assemble_dataset(&ft, &cfr, &series, 42, 7),
            Err(Error::MissingDay { .. })
        ));
        cfr.pop();
        assert!(matches!(
            assemble_dataset(&ft, &cfr, &series, 42, 7),
            Err(Error::MissingCfr(_))
        ));
    }

    #[test]
    fn progression_summarized_over_first_week() {
        let (ft, cfr, series) = fixture(2, 6, 14);
        let ds = assemble_dataset(&ft, &cfr, &series, 14, 7).unwrap();
        // region 0: cases = 10(t+1), deaths = t
        assert_eq!(ds.x[[0, 0]], 10.0);
        assert_eq!(ds.x[[0, 1]], 6.0 / 7.0);
        let active: f64 = (0..7).map(|t| 10.0 * (t + 1) as f64 - t as f64).sum::<f64>() / 7.0;
        assert!((ds.x[[0, 2]] - active).abs() < 1e-12);
        // not derivable: passes through
        assert_eq!(ds.x[[0, 3]], 3.0);
    }

    #[test]
    fn independent_of_region_order() {
        let (ft, cfr, series) = fixture(5, 8, 14);
        let a = assemble_dataset(&ft, &cfr, &series, 14, 7).unwrap();
        let rev: Vec<usize> = (0..5).rev().collect();
        let shuffled = FactorTable::from_dense(
            rev.iter().map(|&i| ft.regions()[i].clone()).collect(),
            ft.indicators().to_vec(),
            ft.values().select(ndarray::Axis(0), &rev),
        )
        .unwrap();
        let mut cfr_rev = cfr.clone();
        cfr_rev.reverse();
        let b = assemble_dataset(&shuffled, &cfr_rev, &series, 14, 7).unwrap();
        assert_eq!(a, b);
    }
}
