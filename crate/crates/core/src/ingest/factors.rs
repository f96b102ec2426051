use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use ndarray::{Array2, Axis};

use super::{Indicator, RegionId, Sector};
use crate::error::{invalid, Error, Result};

/// Header names of the long-format factor file.
#[derive(Debug, Clone)]
pub struct ColumnMapping {
    pub region: String,
    pub sector: String,
    pub indicator: String,
    pub value: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            region: "region_id".into(),
            sector: "sector".into(),
            indicator: "indicator".into(),
            value: "value".into(),
        }
    }
}

/// Regions × indicators design table with its missing-value mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    regions: Vec<RegionId>,
    indicators: Vec<Indicator>,
    values: Array2<f64>,
    missing: Array2<bool>,
}

impl FactorTable {
    pub fn new(
        regions: Vec<RegionId>,
        indicators: Vec<Indicator>,
        values: Array2<f64>,
        missing: Array2<bool>,
    ) -> Result<Self> {
        let shape = (regions.len(), indicators.len());
        if values.dim() != shape || missing.dim() != shape {
            return Err(Error::Shape(format!(
                "factor table is {}x{} but values are {:?} and mask is {:?}",
                shape.0,
                shape.1,
                values.dim(),
                missing.dim()
            )));
        }
        let mut seen = HashSet::new();
        for r in &regions {
            if !seen.insert(r.as_str()) {
                return Err(invalid(format!("region `{r}` listed twice")));
            }
        }
        let mut seen = HashSet::new();
        for ind in &indicators {
            if !seen.insert(ind.name.as_str()) {
                return Err(invalid(format!("indicator `{}` listed twice", ind.name)));
            }
        }
        Ok(Self {
            regions,
            indicators,
            values,
            missing,
        })
    }

    /// Fully observed table.
    pub fn from_dense(regions: Vec<RegionId>, indicators: Vec<Indicator>, values: Array2<f64>) -> Result<Self> {
        let missing = Array2::from_elem(values.dim(), false);
        Self::new(regions, indicators, values, missing)
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn indicators(&self) -> &[Indicator] {
        &self.indicators
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn missing(&self) -> &Array2<bool> {
        &self.missing
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn indicator_index(&self, name: &str) -> Option<usize> {
        self.indicators.iter().position(|i| i.name == name)
    }

    pub fn region_index(&self, region: &RegionId) -> Option<usize> {
        self.regions.iter().position(|r| r == region)
    }

    /// Mean over observed cells of one indicator column.
    pub fn observed_mean(&self, col: usize) -> Option<f64> {
        let (sum, count) = self
            .values
            .column(col)
            .iter()
            .zip(self.missing.column(col))
            .filter(|(_, &m)| !m)
            .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// Drop every indicator whose sector is in `sectors`.
    pub fn without_sectors(&self, sectors: &[Sector]) -> FactorTable {
        let keep: Vec<usize> = (0..self.indicators.len())
            .filter(|&j| !sectors.contains(&self.indicators[j].sector))
            .collect();
        FactorTable {
            regions: self.regions.clone(),
            indicators: keep.iter().map(|&j| self.indicators[j].clone()).collect(),
            values: self.values.select(Axis(1), &keep),
            missing: self.missing.select(Axis(1), &keep),
        }
    }
}

/// Load a long-format factor CSV (`region_id, sector, indicator, value`).
///
/// Empty values, and (region, indicator) pairs that never appear, are marked
/// missing. Indicators are ordered by sector, then by name; regions by id.
pub fn load_factor_table(path: &Path, schema: &ColumnMapping) -> Result<FactorTable> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let (c_region, c_sector, c_ind, c_val) = (
        col(&schema.region)?,
        col(&schema.sector)?,
        col(&schema.indicator)?,
        col(&schema.value)?,
    );

    let mut cells: HashMap<(RegionId, String), Option<f64>> = HashMap::new();
    let mut indicator_sector: BTreeMap<String, Sector> = BTreeMap::new();
    let mut regions: Vec<RegionId> = Vec::new();

    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let region = RegionId::new(field(c_region)).map_err(|e| Error::InvalidRegion {
            line,
            reason: e.to_string(),
        })?;
        let sector: Sector = field(c_sector).parse()?;
        let indicator = field(c_ind).to_string();
        if indicator.is_empty() {
            return Err(invalid(format!("empty indicator name at line {line}")));
        }
        let raw = field(c_val);
        let value = if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
            None
        } else {
            let v: f64 = raw.parse().map_err(|_| Error::NonNumeric {
                value: raw.to_string(),
                line,
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    value: raw.to_string(),
                    line,
                });
            }
            Some(v)
        };

        match indicator_sector.get(&indicator) {
            Some(&s) if s != sector => {
                return Err(invalid(format!(
                    "indicator `{indicator}` assigned to both {s} and {sector}"
                )))
            }
            Some(_) => {}
            None => {
                indicator_sector.insert(indicator.clone(), sector);
            }
        }
        if !regions.contains(&region) {
            regions.push(region.clone());
        }
        if cells.insert((region.clone(), indicator.clone()), value).is_some() {
            return Err(Error::DuplicateCell {
                region: region.to_string(),
                indicator,
            });
        }
    }

    regions.sort();
    let mut indicators: Vec<Indicator> = indicator_sector
        .into_iter()
        .map(|(name, sector)| Indicator { sector, name })
        .collect();
    indicators.sort_by(|a, b| a.sector.cmp(&b.sector).then_with(|| a.name.cmp(&b.name)));

    let shape = (regions.len(), indicators.len());
    let mut values = Array2::zeros(shape);
    let mut missing = Array2::from_elem(shape, true);
    for (i, r) in regions.iter().enumerate() {
        for (j, ind) in indicators.iter().enumerate() {
            if let Some(Some(v)) = cells.get(&(r.clone(), ind.name.clone())) {
                values[[i, j]] = *v;
                missing[[i, j]] = false;
            }
        }
    }
    FactorTable::new(regions, indicators, values, missing)
}

/// Fill every missing cell with the mean of the observed cells of its column.
pub fn impute_missing(t: &FactorTable) -> Result<FactorTable> {
    let mut out = t.clone();
    for j in 0..t.indicators.len() {
        if !t.missing.column(j).iter().any(|&m| m) {
            continue;
        }
        let mean = t
            .observed_mean(j)
            .ok_or_else(|| Error::AllMissing(t.indicators[j].name.clone()))?;
        for i in 0..t.regions.len() {
            if t.missing[[i, j]] {
                out.values[[i, j]] = mean;
                out.missing[[i, j]] = false;
            }
        }
    }
    Ok(out)
}

/// Mark observed cells lying more than `k_iqr` interquartile ranges from their
/// column median as missing. Columns with zero IQR are left alone. Returns the
/// number of flagged cells.
pub fn flag_outliers(t: &mut FactorTable, k_iqr: f64) -> usize {
    let mut flagged = 0;
    for j in 0..t.indicators.len() {
        let mut observed: Vec<f64> = t
            .values
            .column(j)
            .iter()
            .zip(t.missing.column(j))
            .filter(|(_, &m)| !m)
            .map(|(&v, _)| v)
            .collect();
        if observed.len() < 4 {
            continue;
        }
        observed.sort_by(f64::total_cmp);
        let median = quantile_sorted(&observed, 0.5);
        let iqr = quantile_sorted(&observed, 0.75) - quantile_sorted(&observed, 0.25);
        if iqr <= 0.0 {
            continue;
        }
        for i in 0..t.regions.len() {
            if !t.missing[[i, j]] && (t.values[[i, j]] - median).abs() > k_iqr * iqr {
                log::warn!(
                    "flagging outlier {} = {} for region {}",
                    t.indicators[j].name,
                    t.values[[i, j]],
                    t.regions[i]
                );
                t.missing[[i, j]] = true;
                flagged += 1;
            }
        }
    }
    flagged
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    let pos = q * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    xs[lo] + (xs[hi] - xs[lo]) * (pos - lo as f64)
}
