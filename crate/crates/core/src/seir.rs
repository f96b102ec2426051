//! Deterministic SEIR simulator used to synthesize extra training regions.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ingest::{
    compute_cfr_series, progression_summary, EpidemicSeries, FactorTable, Indicator, RegionId, Sector,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeirParams {
    /// Transmission rate per day.
    pub beta: f64,
    /// Rate of leaving the exposed state per day.
    pub sigma: f64,
    /// Recovery rate per day.
    pub gamma: f64,
    /// Fraction of the recovery flow that dies.
    pub mu: f64,
    pub n_pop: f64,
    pub e0: f64,
    pub i0: f64,
    pub days: usize,
    pub dt: f64,
}

impl Default for SeirParams {
    fn default() -> Self {
        Self {
            beta: 0.6,
            sigma: 0.2,
            gamma: 0.1,
            mu: 0.03,
            n_pop: 1e6,
            e0: 0.0,
            i0: 10.0,
            days: 42,
            dt: 0.1,
        }
    }
}

impl SeirParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.beta, self.sigma, self.gamma];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(invalid("SEIR rates must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(invalid(format!("fatality fraction {} must lie in [0, 1]", self.mu)));
        }
        if !(self.n_pop.is_finite() && self.n_pop > 0.0) {
            return Err(invalid("population must be positive"));
        }
        if !(self.e0 >= 0.0 && self.i0 >= 0.0 && self.e0 + self.i0 <= self.n_pop) {
            return Err(invalid(
                "initial exposed and infected must be non-negative and fit in the population",
            ));
        }
        if self.days == 0 {
            return Err(invalid("simulation needs at least one day"));
        }
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(invalid(format!("step {} must lie in (0, 1] day", self.dt)));
        }
        let steps = (1.0 / self.dt).round();
        if (steps * self.dt - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("step {} must divide one day evenly", self.dt)));
        }
        Ok(())
    }

    fn steps_per_day(&self) -> usize {
        (1.0 / self.dt).round() as usize
    }
}

/// Daily samples, day 0 through `days` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeirTrajectory {
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    /// Initial infected plus the cumulative E to I flow.
    pub cumulative_cases: Vec<f64>,
    /// `mu` times the cumulative I to R flow.
    pub cumulative_deaths: Vec<f64>,
}

impl SeirTrajectory {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn cfr(&self) -> Vec<f64> {
        self.cumulative_cases
            .iter()
            .zip(&self.cumulative_deaths)
            .map(|(c, d)| if *c > 0.0 { d / c } else { 0.0 })
            .collect()
    }
}

/// S, E, I, R, cumulative E→I flow, cumulative I→R flow.
type State = [f64; 6];

fn rhs(p: &SeirParams, y: &State) -> State {
    let infection = p.beta * y[0] * y[2] / p.n_pop;
    let onset = p.sigma * y[1];
    let recovery = p.gamma * y[2];
    [
        -infection,
        infection - onset,
        onset - recovery,
        recovery,
        onset,
        recovery,
    ]
}

fn rk4_step(p: &SeirParams, y: &State, h: f64) -> State {
    let add = |a: &State, k: &State, f: f64| std::array::from_fn(|j| a[j] + f * k[j]);
    let k1 = rhs(p, y);
    let k2 = rhs(p, &add(y, &k1, 0.5 * h));
    let k3 = rhs(p, &add(y, &k2, 0.5 * h));
    let k4 = rhs(p, &add(y, &k3, h));
    std::array::from_fn(|j| y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
}

const COMPARTMENTS: [&str; 4] = ["S", "E", "I", "R"];

/// Classical RK4 at `p.dt`, sampled once per day.
pub fn simulate_seir(p: &SeirParams) -> Result<SeirTrajectory> {
    p.validate()?;
    let mut y: State = [p.n_pop - p.e0 - p.i0, p.e0, p.i0, 0.0, 0.0, 0.0];
    let mut traj = SeirTrajectory {
        s: Vec::with_capacity(p.days + 1),
        e: Vec::with_capacity(p.days + 1),
        i: Vec::with_capacity(p.days + 1),
        r: Vec::with_capacity(p.days + 1),
        cumulative_cases: Vec::with_capacity(p.days + 1),
        cumulative_deaths: Vec::with_capacity(p.days + 1),
    };
    let floor = -1e-12 * p.n_pop;
    let record = |traj: &mut SeirTrajectory, y: &State| {
        traj.s.push(y[0].max(0.0));
        traj.e.push(y[1].max(0.0));
        traj.i.push(y[2].max(0.0));
        traj.r.push(y[3].max(0.0));
        traj.cumulative_cases.push(p.i0 + y[4]);
        traj.cumulative_deaths.push(p.mu * y[5]);
    };
    record(&mut traj, &y);
    let steps = p.steps_per_day();
    for day in 0..p.days {
        for step in 0..steps {
            y = rk4_step(p, &y, p.dt);
            if let Some(c) = (0..4).find(|&c| y[c] < floor || !y[c].is_finite()) {
                return Err(Error::NegativeCompartment {
                    compartment: COMPARTMENTS[c],
                    time: day as f64 + (step + 1) as f64 * p.dt,
                    dt: p.dt,
                });
            }
        }
        record(&mut traj, &y);
    }
    Ok(traj)
}

/// Column means of an imputed factor table, used as the static profile of
/// synthetic regions.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTemplate {
    pub indicators: Vec<Indicator>,
    pub values: Vec<f64>,
}

impl FactorTemplate {
    pub fn mean_of(table: &FactorTable) -> Result<Self> {
        let values = (0..table.indicators().len())
            .map(|j| {
                table
                    .observed_mean(j)
                    .ok_or_else(|| Error::AllMissing(table.indicators()[j].name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            indicators: table.indicators().to_vec(),
            values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    /// Relative half-width of the uniform jitter on static factors.
    pub jitter: f64,
    pub seed: u64,
    pub window: usize,
    pub summary_days: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            jitter: 0.05,
            seed: 0,
            window: crate::ingest::DEFAULT_WINDOW,
            summary_days: crate::ingest::DEFAULT_SUMMARY_DAYS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub region: String,
    pub params: SeirParams,
    pub seed: u64,
    pub jitter: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticSamples {
    pub regions: Vec<RegionId>,
    /// count × features, columns in template order.
    pub x: Array2<f64>,
    /// count × window daily CFR.
    pub cfr: Array2<f64>,
    pub series: Vec<EpidemicSeries>,
    pub manifest: Vec<ManifestEntry>,
}

/// `count` parameter sets around `base`, each rate scaled by an independent
/// factor in `1 ± spread`.
pub fn param_variants(base: &SeirParams, count: usize, spread: f64, seed: u64) -> Result<Vec<SeirParams>> {
    base.validate()?;
    if !(0.0..1.0).contains(&spread) {
        return Err(invalid(format!("parameter spread {spread} must lie in [0, 1)")));
    }
    Ok((0..count)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let mut f = || 1.0 + spread * r.random_range(-1.0..=1.0);
            SeirParams {
                beta: base.beta * f(),
                sigma: base.sigma * f(),
                gamma: base.gamma * f(),
                mu: (base.mu * f()).clamp(0.0, 1.0),
                ..*base
            }
        })
        .collect())
}

/// Build `count` synthetic regions. Region `i` uses `variants[i % len]`;
/// derivable progression indicators come from its trajectory, every other
/// indicator is the template value times `1 + U(-jitter, jitter)`.
pub fn synthesize_samples(
    template: &FactorTemplate,
    variants: &[SeirParams],
    count: usize,
    opts: &SynthOptions,
) -> Result<SyntheticSamples> {
    if count == 0 {
        return Err(invalid("synthetic sample count must be at least 1"));
    }
    if variants.is_empty() {
        return Err(invalid("no SEIR parameter sets given"));
    }
    if !(0.0..1.0).contains(&opts.jitter) {
        return Err(invalid(format!("jitter {} must lie in [0, 1)", opts.jitter)));
    }
    if opts.summary_days == 0 || opts.summary_days > opts.window {
        return Err(invalid("summary days must lie within the window"));
    }
    let d = template.values.len();
    let mut x = Array2::zeros((count, d));
    let mut cfr = Array2::zeros((count, opts.window));
    let mut regions = Vec::with_capacity(count);
    let mut series = Vec::with_capacity(count);
    let mut manifest = Vec::with_capacity(count);
    for i in 0..count {
        let params = variants[i % variants.len()];
        if params.days + 1 < opts.window {
            return Err(invalid(format!(
                "simulation covers {} days but the window needs {}",
                params.days + 1,
                opts.window
            )));
        }
        let traj = simulate_seir(&params)?;
        let region = RegionId::new(format!("synthetic_{:02}", i + 1))?;
        let records = (0..opts.window)
            .map(|t| (t, traj.cumulative_cases[t], traj.cumulative_deaths[t]))
            .collect();
        let s = EpidemicSeries::new(region.clone(), records)?;
        let c = compute_cfr_series(&s, opts.window)?;
        cfr.row_mut(i).assign(&ndarray::ArrayView1::from(&c.cfr[..]));

        let seed = rng::derive_seed(opts.seed, i as u64);
        let mut r = rng::seeded(seed);
        let head = &traj.cumulative_cases[..opts.summary_days];
        let dead = &traj.cumulative_deaths[..opts.summary_days];
        for (j, ind) in template.indicators.iter().enumerate() {
            let jitter = 1.0 + opts.jitter * r.random_range(-1.0..=1.0);
            let derived = (ind.sector == Sector::Progression)
                .then(|| progression_summary(&ind.name, head, dead, opts.summary_days))
                .flatten();
            x[[i, j]] = derived.unwrap_or(template.values[j] * jitter);
        }
        manifest.push(ManifestEntry {
            region: region.to_string(),
            params,
            seed,
            jitter: opts.jitter,
        });
        regions.push(region);
        series.push(s);
    }
    Ok(SyntheticSamples {
        regions,
        x,
        cfr,
        series,
        manifest,
    })
}
