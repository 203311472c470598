//! Seeded synthetic load/solar/wind datasets with labeled outlier days.
//!
//! All randomness comes from a ChaCha8 stream seeded with
//! [`SynthConfig::seed`], so a given configuration produces bit-identical
//! output on every platform.
//!
//! Ordinary days vary smoothly with the season and a persistent weather
//! anomaly, and their demand peaks drift by an hour or two from day to day.
//! With the configured per-variable probability a day instead carries an
//! atypical event (deep cloud dropout for solar, demand spike for load,
//! calm for wind); such days are listed in [`GroundTruth`] and never fed to
//! the clustering itself.

use std::f64::consts::PI;
use std::fmt::Write as _;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, DayProfile, HOURS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Load,
    Solar,
    Wind,
}

/// Generator settings for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    /// Typical level in data units (MW).
    pub level: f64,
    /// Relative swing of the annual sinusoid.
    pub seasonal_amplitude: f64,
    /// Day of year (0-based) at which the annual sinusoid peaks.
    pub seasonal_peak_day: f64,
    /// Relative standard deviation of hourly multiplicative noise.
    pub noise: f64,
    /// Daily probability of a labeled atypical event for this variable.
    /// For solar this is the cloud-event probability.
    pub outlier_probability: f64,
}

impl VariableSpec {
    pub fn load() -> Self {
        VariableSpec {
            name: "load".into(),
            kind: VariableKind::Load,
            level: 3000.0,
            seasonal_amplitude: 0.35,
            seasonal_peak_day: 200.0,
            noise: 0.005,
            outlier_probability: 0.01,
        }
    }

    pub fn solar() -> Self {
        VariableSpec {
            name: "solar".into(),
            kind: VariableKind::Solar,
            level: 800.0,
            seasonal_amplitude: 0.15,
            seasonal_peak_day: 172.0,
            noise: 0.005,
            outlier_probability: 0.01,
        }
    }

    pub fn wind() -> Self {
        VariableSpec {
            name: "wind".into(),
            kind: VariableKind::Wind,
            level: 400.0,
            seasonal_amplitude: 0.25,
            seasonal_peak_day: 100.0,
            noise: 0.03,
            outlier_probability: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_days: usize,
    pub start_date: NaiveDate,
    pub variables: Vec<VariableSpec>,
}

impl SynthConfig {
    /// Load and solar starting 2021-01-01, about 2% labeled outlier days.
    pub fn new(seed: u64, n_days: usize) -> Self {
        SynthConfig {
            seed,
            n_days,
            start_date: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            variables: vec![VariableSpec::load(), VariableSpec::solar()],
        }
    }

    pub fn with_wind(mut self) -> Self {
        self.variables.push(VariableSpec::wind());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_days < 1 {
            return Err(Error::arg("n_days must be at least 1"));
        }
        if self.variables.is_empty() {
            return Err(Error::arg("at least one variable is required"));
        }
        for v in &self.variables {
            if !(0.0..=1.0).contains(&v.outlier_probability) {
                return Err(Error::arg(format!(
                    "{}: outlier probability must lie in [0, 1]",
                    v.name
                )));
            }
            if !(v.noise.is_finite() && v.noise >= 0.0) {
                return Err(Error::arg(format!("{}: noise must be >= 0", v.name)));
            }
            if !(v.level.is_finite() && v.level > 0.0) {
                return Err(Error::arg(format!("{}: level must be positive", v.name)));
            }
            if !(0.0..1.0).contains(&v.seasonal_amplitude) {
                return Err(Error::arg(format!(
                    "{}: seasonal amplitude must lie in [0, 1)",
                    v.name
                )));
            }
        }
        let mut names: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::arg("variable names must be unique"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlierLabel {
    pub date: NaiveDate,
    pub variable: String,
    pub event: String,
}

/// Sidecar written next to the generated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub n_days: usize,
    /// One entry per (day, variable) event.
    pub events: Vec<OutlierLabel>,
}

impl GroundTruth {
    /// Distinct outlier dates, ascending.
    pub fn outlier_dates(&self) -> Vec<NaiveDate> {
        let mut dates: Vec<NaiveDate> = self.events.iter().map(|e| e.date).collect();
        dates.dedup();
        dates
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn bump(h: f64, center: f64, width: f64) -> f64 {
    let z = (h - center) / width;
    (-0.5 * z * z).exp()
}

/// Fraction of clear-sky output at each hour; exactly zero outside daylight.
pub fn daylight_weight(hour: usize, season: f64) -> f64 {
    // hour-centred sample time
    let t = hour as f64 + 0.5;
    let half = 6.2 + 1.0 * season;
    let (rise, set) = (12.6 - half, 12.6 + half);
    if t <= rise || t >= set {
        0.0
    } else {
        ((t - rise) / (set - rise) * PI).sin().powf(1.2)
    }
}

struct DayContext {
    doy: f64,
    weekend: bool,
    anomaly: f64,
}

fn seasonal(spec: &VariableSpec, doy: f64) -> f64 {
    (2.0 * PI * (doy - spec.seasonal_peak_day) / 365.25).cos()
}

fn load_day(spec: &VariableSpec, ctx: &DayContext, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = seasonal(spec, ctx.doy);
    let summer = s.max(0.0);
    let level = spec.level * (1.0 + spec.seasonal_amplitude * s + 0.03 * ctx.anomaly);
    let morning = 7.5 + if ctx.weekend { 1.5 } else { 0.0 } + 0.9 * normal(rng);
    let shift = 1.2 * normal(rng);
    let evening = 18.5 - 1.5 * summer + 2.0 * normal(rng);
    let weekend_scale = if ctx.weekend { 0.93 } else { 1.0 };
    (0..HOURS)
        .map(|h| {
            let h = h as f64;
            let shape = 0.7
                + 0.15 * (1.0 - 0.6 * summer) * bump(h, morning + shift, 1.5)
                + 0.35 * (1.0 + 0.5 * summer) * bump(h, evening + shift, 2.5 + 1.5 * summer);
            level * weekend_scale * shape * (1.0 + spec.noise * normal(rng))
        })
        .collect()
}

fn solar_day(spec: &VariableSpec, ctx: &DayContext, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = (2.0 * PI * (ctx.doy - 172.0) / 365.25).cos();
    let amp = seasonal(spec, ctx.doy);
    let u: f64 = rng.random();
    let clearness = 1.0 - 0.12 * u * u;
    (0..HOURS)
        .map(|h| {
            let w = daylight_weight(h, s);
            if w == 0.0 {
                return 0.0;
            }
            let x = spec.level
                * (1.0 + spec.seasonal_amplitude * amp)
                * clearness
                * w
                * (1.0 + spec.noise * normal(rng));
            x.max(0.0)
        })
        .collect()
}

fn wind_day(spec: &VariableSpec, ctx: &DayContext, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = seasonal(spec, ctx.doy);
    let level = spec.level * (1.0 + spec.seasonal_amplitude * s) * (1.0 + 0.1 * ctx.anomaly);
    let night_peak = 2.0 + 1.5 * normal(rng);
    (0..HOURS)
        .map(|h| {
            let h = h as f64;
            // circular distance to the overnight peak
            let d = (h - night_peak).rem_euclid(24.0);
            let d = d.min(24.0 - d);
            let shape = 0.45 + 0.4 * bump(d, 0.0, 4.0);
            (level * shape * (1.0 + spec.noise * normal(rng))).max(0.0)
        })
        .collect()
}

/// Applies an atypical event in place and returns its label.
fn apply_event(kind: VariableKind, series: &mut [f64], rng: &mut ChaCha8Rng) -> String {
    match kind {
        VariableKind::Solar => {
            if rng.random::<f64>() < 0.5 {
                // broken cloud cover: each hour gets its own attenuation
                let depth = 0.25 + 0.3 * rng.random::<f64>();
                for x in series.iter_mut() {
                    let f = (depth + 0.3 * normal(rng)).clamp(0.02, 0.9);
                    *x *= f;
                }
                "overcast".into()
            } else {
                let start = rng.random_range(8..14);
                let len = rng.random_range(3..8);
                let depth = 0.2 + 0.25 * rng.random::<f64>();
                for x in &mut series[start..(start + len).min(HOURS)] {
                    *x *= depth;
                }
                "cloud-dropout".into()
            }
        }
        VariableKind::Load => {
            let start = rng.random_range(9..18);
            let len = rng.random_range(4..10);
            let lift = 1.4 + 0.3 * rng.random::<f64>();
            for x in &mut series[start..(start + len).min(HOURS)] {
                *x *= lift;
            }
            "demand-spike".into()
        }
        VariableKind::Wind => {
            let depth = 0.05 + 0.1 * rng.random::<f64>();
            series.iter_mut().for_each(|x| *x *= depth);
            "calm".into()
        }
    }
}

/// Generates a raw (un-normalized) dataset and its outlier labels.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut anomaly = 0.0;
    let mut days = Vec::with_capacity(cfg.n_days);
    let mut events = Vec::new();
    for d in 0..cfg.n_days {
        let date = cfg.start_date + Duration::days(d as i64);
        anomaly = 0.7 * anomaly + 0.7 * normal(&mut rng);
        let ctx = DayContext {
            doy: date.ordinal0() as f64,
            weekend: matches!(date.weekday(), Weekday::Sat | Weekday::Sun),
            anomaly,
        };
        let mut columns = Vec::with_capacity(cfg.variables.len());
        for spec in &cfg.variables {
            let mut series = match spec.kind {
                VariableKind::Load => load_day(spec, &ctx, &mut rng),
                VariableKind::Solar => solar_day(spec, &ctx, &mut rng),
                VariableKind::Wind => wind_day(spec, &ctx, &mut rng),
            };
            if rng.random::<f64>() < spec.outlier_probability {
                let event = apply_event(spec.kind, &mut series, &mut rng);
                events.push(OutlierLabel {
                    date,
                    variable: spec.name.clone(),
                    event,
                });
            }
            columns.push(series);
        }
        days.push(DayProfile::from_columns(date, &columns)?);
    }
    let names = cfg.variables.iter().map(|v| v.name.clone()).collect();
    Ok(SynthOutput {
        dataset: Dataset::new(days, names, None)?,
        truth: GroundTruth {
            seed: cfg.seed,
            n_days: cfg.n_days,
            events,
        },
    })
}

/// Writes a dataset in the hourly CSV layout [`crate::ingest::parse_csv`]
/// reads (`timestamp` column, then one column per variable). Values are
/// denormalized first and printed in shortest round-trip form.
pub fn to_csv(ds: &Dataset) -> String {
    let raw = ds.denormalize();
    let mut out = String::from("timestamp");
    for name in &raw.variable_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for day in &raw.days {
        for h in 0..HOURS {
            let _ = write!(out, "{}T{h:02}:00", day.date);
            for v in 0..day.n_vars() {
                let _ = write!(out, ",{}", day.get(h, v));
            }
            out.push('\n');
        }
    }
    out
}
