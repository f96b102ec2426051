//! Regenerates the bundled synthetic sample under `data/sample/`.
//!
//! ```text
//! cargo run -p mtfl-core --example make_sample -- data/sample
//! ```
//!
//! 29 regions (12 country-level, 17 province-level), 27 indicators in seven
//! sectors, 45 days of cumulative counts. Each region's fatality fraction is
//! driven by a handful of its static factors, so the pipeline has real signal
//! to find.

use std::error::Error;
use std::path::PathBuf;

use mtfl_core::rng;
use mtfl_core::seir::{simulate_seir, SeirParams};
use rand::Rng;
use rand_distr::{Distribution, Normal};

const DAYS: usize = 45;

/// (sector, name, mean, sd)
const STATIC: &[(&str, &str, f64, f64)] = &[
    ("progression", "cases_per_million", 150.0, 60.0),
    ("demographics", "aging_population_rate", 0.14, 0.05),
    ("demographics", "gender_rate", 1.02, 0.04),
    ("demographics", "smoking_rate", 0.22, 0.06),
    ("disease_mortality", "lung_cancer_mortality", 35.0, 10.0),
    ("disease_mortality", "coronary_heart_disease_mortality", 120.0, 40.0),
    ("disease_mortality", "diabetes_mortality", 25.0, 8.0),
    ("disease_mortality", "hypertension_mortality", 18.0, 6.0),
    ("healthcare", "hospital_beds_per_million", 4500.0, 1800.0),
    ("healthcare", "diagnoses_per_bed_rate", 0.05, 0.02),
    ("healthcare", "physicians_per_million", 2600.0, 900.0),
    ("healthcare", "healthcare_access_quality", 80.0, 8.0),
    ("ihr", "ihr_prevent", 75.0, 12.0),
    ("ihr", "ihr_detect", 78.0, 12.0),
    ("ihr", "ihr_respond", 72.0, 14.0),
    ("ihr", "ihr_enabling", 70.0, 14.0),
    ("ihr", "ihr_readiness", 74.0, 13.0),
    ("social_culture", "power_distance", 60.0, 15.0),
    ("social_culture", "individualism", 45.0, 20.0),
    ("social_culture", "masculinity", 52.0, 15.0),
    ("social_culture", "uncertainty_avoidance", 65.0, 18.0),
    ("social_culture", "annual_arrivals", 2.5e7, 1.2e7),
    ("others", "air_quality_index", 60.0, 25.0),
    ("others", "population_density", 250.0, 150.0),
];

/// Seven-day summaries of the simulated series; assembly recomputes these.
const DERIVED: &[&str] = &["daily_new_cases", "daily_new_deaths", "current_active_case"];

/// Indicator name and its effect on log fatality fraction per standard deviation.
const DRIVERS: &[(&str, f64)] = &[
    ("aging_population_rate", 0.45),
    ("hypertension_mortality", 0.30),
    ("hospital_beds_per_million", -0.35),
    ("healthcare_access_quality", -0.25),
    ("power_distance", 0.20),
];

fn main() -> Result<(), Box<dyn Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/sample".into()));
    std::fs::create_dir_all(&out)?;
    let mut r = rng::seeded(20200312);
    let std_normal = Normal::new(0.0, 1.0)?;

    let regions: Vec<String> = (1..=12)
        .map(|i| format!("country_{i:02}"))
        .chain((1..=17).map(|i| format!("province_{i:02}")))
        .collect();

    let mut factors = csv::Writer::from_path(out.join("factors.csv"))?;
    factors.write_record(["region_id", "sector", "indicator", "value"])?;
    let mut epidemic = csv::Writer::from_path(out.join("epidemic.csv"))?;
    epidemic.write_record(["region_id", "day", "confirmed_cases", "confirmed_deaths"])?;

    for region in &regions {
        let z: Vec<f64> = STATIC.iter().map(|_| std_normal.sample(&mut r)).collect();
        let mut log_mu = (0.035f64).ln();
        for (name, effect) in DRIVERS {
            let j = STATIC
                .iter()
                .position(|s| s.1 == *name)
                .expect("driver is a static factor");
            log_mu += effect * z[j];
        }
        let params = SeirParams {
            beta: r.random_range(0.35..0.6),
            sigma: 0.2,
            gamma: r.random_range(0.08..0.14),
            mu: log_mu.exp().clamp(0.002, 0.25),
            n_pop: 10f64.powf(r.random_range(6.5..8.0)),
            i0: r.random_range(5.0..40.0f64).round(),
            days: DAYS - 1,
            ..Default::default()
        };
        let traj = simulate_seir(&params)?;
        for day in 0..DAYS {
            epidemic.write_record([
                region.clone(),
                day.to_string(),
                format!("{}", traj.cumulative_cases[day].round()),
                format!("{}", traj.cumulative_deaths[day].round()),
            ])?;
        }

        let cases: Vec<f64> = traj.cumulative_cases[..7].iter().map(|v| v.round()).collect();
        let deaths: Vec<f64> = traj.cumulative_deaths[..7].iter().map(|v| v.round()).collect();
        let daily = |s: &[f64]| s[6] / 7.0;
        let active = cases.iter().zip(&deaths).map(|(c, d)| c - d).sum::<f64>() / 7.0;
        for (name, value) in DERIVED.iter().zip([daily(&cases), daily(&deaths), active]) {
            factors.write_record([region.as_str(), "progression", name, &format!("{value:.6}")])?;
        }
        for ((sector, name, mean, sd), zj) in STATIC.iter().zip(&z) {
            // a few cells left blank to exercise imputation
            let value = if r.random_bool(0.02) {
                String::new()
            } else {
                format!("{:.6}", (mean + sd * zj).max(0.0))
            };
            factors.write_record([region.as_str(), sector, name, &value])?;
        }
    }
    factors.flush()?;
    epidemic.flush()?;
    println!("wrote {} regions to {}", regions.len(), out.display());
    Ok(())
}
