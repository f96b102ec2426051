//! Loading, cleaning and aligning the regional factor table and the
//! per-region epidemic series into model-ready matrices.

mod assemble;
mod epidemic;
mod factors;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub(crate) use assemble::progression_summary;
pub use assemble::{assemble_dataset, Dataset, DEFAULT_SUMMARY_DAYS};
pub use epidemic::{compute_cfr_series, load_epidemic, CfrSeries, EpidemicSeries, DEFAULT_WINDOW};
pub use factors::{flag_outliers, impute_missing, load_factor_table, ColumnMapping, FactorTable};

/// Opaque region key, e.g. an ISO code or `CN-Hubei`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RegionId(String);

impl RegionId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let trimmed = id.trim();
        if trimmed.is_empty() {
            return Err(invalid("region id must be non-empty"));
        }
        Ok(Self(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for RegionId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        RegionId::new(s)
    }
}

impl From<RegionId> for String {
    fn from(r: RegionId) -> String {
        r.0
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The sector headers of the regional factor taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Progression,
    Demographics,
    DiseaseMortality,
    Healthcare,
    Ihr,
    SocialCulture,
    Others,
}

impl Sector {
    pub const ALL: [Sector; 7] = [
        Sector::Progression,
        Sector::Demographics,
        Sector::DiseaseMortality,
        Sector::Healthcare,
        Sector::Ihr,
        Sector::SocialCulture,
        Sector::Others,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Sector::Progression => "progression",
            Sector::Demographics => "demographics",
            Sector::DiseaseMortality => "disease_mortality",
            Sector::Healthcare => "healthcare",
            Sector::Ihr => "ihr",
            Sector::SocialCulture => "social_culture",
            Sector::Others => "others",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sector {
    type Err = Error;

    /// Accepts the canonical snake_case names plus the long header spellings
    /// ("COVID-19 progression", "Mortality of key diseases", ...).
    fn from_str(s: &str) -> Result<Self> {
        let key = normalize_name(s);
        let sector = match key.as_str() {
            "progression" | "covid_19_progression" | "covid19_progression" | "daily_progression" => Sector::Progression,
            "demographics" | "demographic" => Sector::Demographics,
            "disease_mortality" | "mortality_of_key_diseases" | "mortality" | "morbidity" => Sector::DiseaseMortality,
            "healthcare" | "healthcare_resource" | "healthcare_resources" | "health_resources" => Sector::Healthcare,
            "ihr"
            | "ihr_capacity"
            | "ihr_core_capacity"
            | "ihr_core_capacity_index"
            | "ihr_international_health_regulation_core_capacity_index" => Sector::Ihr,
            "social_culture" | "social_culture_index" | "socio_culture" | "culture" => Sector::SocialCulture,
            "others" | "other" => Sector::Others,
            _ => return Err(Error::UnknownSector(s.to_string())),
        };
        Ok(sector)
    }
}

/// One column of the factor table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Indicator {
    pub sector: Sector,
    pub name: String,
}

impl Indicator {
    pub fn new(sector: Sector, name: impl Into<String>) -> Self {
        Self {
            sector,
            name: name.into(),
        }
    }
}

/// Lowercase, collapse every run of non-alphanumerics into `_`.
pub(crate) fn normalize_name(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_sep = false;
    for c in s.trim().chars() {
        if c.is_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.extend(c.to_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}
