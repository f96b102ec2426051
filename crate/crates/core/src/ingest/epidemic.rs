use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::RegionId;
use crate::error::{invalid, Error, Result};

/// Days observed from the first confirmed case.
pub const DEFAULT_WINDOW: usize = 42;

/// Cumulative confirmed cases and deaths of one region, indexed by day offset
/// from its first confirmed case.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicSeries {
    region: RegionId,
    days: Vec<usize>,
    cases: Vec<f64>,
    deaths: Vec<f64>,
}

impl EpidemicSeries {
    /// Records may arrive in any order; they are sorted by day. Counts must be
    /// non-negative and non-decreasing in day.
    pub fn new(region: RegionId, mut records: Vec<(usize, f64, f64)>) -> Result<Self> {
        records.sort_by_key(|r| r.0);
        for pair in records.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(invalid(format!("region `{region}` repeats day {}", pair[0].0)));
            }
            if pair[1].1 < pair[0].1 || pair[1].2 < pair[0].2 {
                return Err(Error::DecreasingSeries {
                    region: region.to_string(),
                    day: pair[1].0,
                });
            }
        }
        if let Some(r) = records
            .iter()
            .find(|r| !(r.1 >= 0.0 && r.2 >= 0.0) || !r.1.is_finite() || !r.2.is_finite())
        {
            return Err(invalid(format!(
                "region `{region}` has a negative or non-finite count on day {}",
                r.0
            )));
        }
        Ok(Self {
            region,
            days: records.iter().map(|r| r.0).collect(),
            cases: records.iter().map(|r| r.1).collect(),
            deaths: records.iter().map(|r| r.2).collect(),
        })
    }

    pub fn region(&self) -> &RegionId {
        &self.region
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// `(cases, deaths)` for days `0..window`, or the first absent day.
    pub fn window(&self, window: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut cases = Vec::with_capacity(window);
        let mut deaths = Vec::with_capacity(window);
        for day in 0..window {
            match self.days.binary_search(&day) {
                Ok(pos) => {
                    cases.push(self.cases[pos]);
                    deaths.push(self.deaths[pos]);
                }
                Err(_) => {
                    return Err(Error::MissingDay {
                        region: self.region.to_string(),
                        day,
                    })
                }
            }
        }
        Ok((cases, deaths))
    }
}

/// Daily case fatality rate of one region over the observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrSeries {
    pub region: RegionId,
    pub cfr: Vec<f64>,
}

/// `cfr[t] = deaths[t] / cases[t]`, with `0` (and a warning) on days without cases.
pub fn compute_cfr_series(s: &EpidemicSeries, window: usize) -> Result<CfrSeries> {
    let (cases, deaths) = s.window(window)?;
    let mut cfr = Vec::with_capacity(window);
    for (day, (&c, &d)) in cases.iter().zip(&deaths).enumerate() {
        if d > c {
            return Err(Error::DeathsExceedCases {
                region: s.region.to_string(),
                day,
            });
        }
        if c == 0.0 {
            log::warn!("region {} has no confirmed cases on day {day}; CFR set to 0", s.region);
            cfr.push(0.0);
        } else {
            cfr.push(d / c);
        }
    }
    Ok(CfrSeries {
        region: s.region.clone(),
        cfr,
    })
}

#[derive(Debug, Deserialize)]
struct EpidemicRow {
    region_id: String,
    day: usize,
    confirmed_cases: f64,
    confirmed_deaths: f64,
}

/// Load the epidemic CSV (`region_id, day, confirmed_cases, confirmed_deaths`),
/// one series per region, ordered by region id.
pub fn load_epidemic(path: &Path) -> Result<Vec<EpidemicSeries>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut by_region: BTreeMap<RegionId, Vec<(usize, f64, f64)>> = BTreeMap::new();
    for row in rdr.deserialize::<EpidemicRow>() {
        let row = row.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let region = RegionId::new(row.region_id)?;
        by_region
            .entry(region)
            .or_default()
            .push((row.day, row.confirmed_cases, row.confirmed_deaths));
    }
    by_region
        .into_iter()
        .map(|(region, records)| EpidemicSeries::new(region, records))
        .collect()
}
