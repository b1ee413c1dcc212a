//! Synthetic bridge-sensor frames.
//!
//! * `seasonal`: an annual Stage cycle with flood pulses; the bed (Sonar)
//!   follows a lagged, inverted copy of the Stage anomaly, so it scours during
//!   the high-water season and refills afterwards.
//! * `tidal`: a semidiurnal Stage signal on a weak seasonal cycle; the bed
//!   follows Stage weakly, drifts with slow bedform migration and lowers
//!   steadily over the record.
//!
//! Discharge is an exponential rating curve of the observed Stage. The
//! generator uses a 365-day year of 8760 hours.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{indexed_stream, stream};
use crate::timeseries::{Channel, ChannelId, TimeSeriesFrame, Timestamp};

pub const HOURS_PER_YEAR: usize = 8760;
pub const TIDAL_PERIOD_HOURS: f64 = 12.42;

/// Mean Stage (ft).
const STAGE_MEAN: f64 = 8.0;
/// Amplitude of the annual Stage cycle (ft).
const STAGE_SEASONAL_AMP: f64 = 3.0;
/// Amplitude of the tidal Stage component (ft).
const STAGE_TIDAL_AMP: f64 = 2.5;
/// Seasonal Stage amplitude of the tidal scenario (ft).
const TIDAL_SEASONAL_AMP: f64 = 0.8;
/// Mean Sonar reading (ft).
const SONAR_BASELINE: f64 = 25.0;
/// Bed response time constant (h).
const SEASONAL_LAG_HOURS: f64 = 72.0;
const TIDAL_LAG_HOURS: f64 = 3.0;
/// Scale of the tidal bed coupling relative to `rho`.
const TIDAL_COUPLING: f64 = 0.25;
/// Net bed lowering of the tidal channel (ft per year).
pub const TIDAL_BED_TREND: f64 = 0.5;
/// Rating curve `Q = Q0 · exp(β · (stage − STAGE_MEAN))`.
const RATING_Q0: f64 = 500.0;
const RATING_BETA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Seasonal,
    Tidal,
}

fn default_start() -> String {
    "2020-01-01T00:00:00Z".to_string()
}

fn default_flood_season() -> (f64, f64) {
    (120.0, 240.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub years: f64,
    /// Standard deviation of the additive sensor noise (ft).
    pub noise_std: f64,
    /// Flood pulses per year.
    pub flood_count: usize,
    /// Strength of the Stage→Sonar response in [−1, 1]; positive values make
    /// the seasonal bed drop when the water rises.
    pub rho: f64,
    pub seed: u64,
    /// First timestamp; should fall on January 1st so years line up.
    #[serde(default = "default_start")]
    pub start: String,
    /// Day-of-year window `[from, to)` holding the Stage peak and all floods.
    #[serde(default = "default_flood_season")]
    pub flood_season: (f64, f64),
}

impl ScenarioSpec {
    pub fn seasonal(years: f64, noise_std: f64, flood_count: usize, rho: f64, seed: u64) -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Seasonal,
            years,
            noise_std,
            flood_count,
            rho,
            seed,
            start: default_start(),
            flood_season: default_flood_season(),
        }
    }

    pub fn tidal(years: f64, noise_std: f64, flood_count: usize, rho: f64, seed: u64) -> Self {
        ScenarioSpec { kind: ScenarioKind::Tidal, ..Self::seasonal(years, noise_std, flood_count, rho, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.years > 0.0) || !self.years.is_finite() {
            return Err(Error::BadSpec(format!("years = {} must be positive", self.years)));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::BadSpec(format!("noise_std = {} must be non-negative", self.noise_std)));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::BadSpec(format!("rho = {} outside [-1, 1]", self.rho)));
        }
        let (a, b) = self.flood_season;
        if !(0.0 <= a && a < b && b <= 365.0) {
            return Err(Error::BadSpec(format!("flood season ({a}, {b}) is not a window inside the year")));
        }
        if self.hours() < 2 {
            return Err(Error::BadSpec("scenario shorter than two hours".into()));
        }
        self.start_timestamp()?;
        Ok(())
    }

    pub fn hours(&self) -> usize {
        (self.years * HOURS_PER_YEAR as f64).round() as usize
    }

    fn start_timestamp(&self) -> Result<Timestamp> {
        Timestamp::parse(&self.start)
            .map(Timestamp::hour_floor)
            .ok_or_else(|| Error::BadSpec(format!("bad start timestamp `{}`", self.start)))
    }

    /// Half the peak-to-trough range of the noise-free, flood-free Sonar cycle.
    pub fn sonar_annual_amplitude(&self) -> f64 {
        match self.kind {
            ScenarioKind::Seasonal => {
                self.rho.abs() * STAGE_SEASONAL_AMP * lag_gain(SEASONAL_LAG_HOURS, HOURS_PER_YEAR as f64)
            }
            ScenarioKind::Tidal => {
                self.rho.abs() * TIDAL_COUPLING * TIDAL_SEASONAL_AMP * lag_gain(TIDAL_LAG_HOURS, HOURS_PER_YEAR as f64)
            }
        }
    }
}

/// Steady-state gain of first-order smoothing with time constant `tau` on a
/// sinusoid of period `period` (both in hours).
fn lag_gain(tau: f64, period: f64) -> f64 {
    let w = TAU / period;
    1.0 / (1.0 + (w * tau).powi(2)).sqrt()
}

/// Unit-peak gamma-shaped pulse: `(τ/τp)^2 · exp(2 (1 − τ/τp))` for τ ≥ 0.
fn pulse(tau: f64, rise: f64) -> f64 {
    if tau < 0.0 {
        return 0.0;
    }
    let r = tau / rise;
    r * r * (2.0 * (1.0 - r)).exp()
}

struct Flood {
    onset: f64,
    rise: f64,
    amplitude: f64,
}

fn floods(spec: &ScenarioSpec, len: usize) -> Vec<Flood> {
    let years = len.div_ceil(HOURS_PER_YEAR);
    let (from, to) = spec.flood_season;
    let mut out = Vec::new();
    for y in 0..years {
        let mut rng = indexed_stream(spec.seed, "synth-floods", y as u64);
        for _ in 0..spec.flood_count {
            let rise = rng.gen_range(12.0..36.0);
            // keep the pulse peak inside the season
            let latest = (to * 24.0 - rise).max(from * 24.0 + 1.0);
            let onset = (y * HOURS_PER_YEAR) as f64 + rng.gen_range(from * 24.0..latest);
            out.push(Flood { onset, rise, amplitude: rng.gen_range(1.5..4.0) });
        }
    }
    out
}

/// Day-of-year phase (radians) with the Stage maximum in mid-season.
fn seasonal_phase(spec: &ScenarioSpec, hour: usize) -> f64 {
    let peak_hour = 0.5 * (spec.flood_season.0 + spec.flood_season.1) * 24.0;
    TAU * (((hour % HOURS_PER_YEAR) as f64 - peak_hour) / HOURS_PER_YEAR as f64)
}

fn smooth(x: &[f64], tau: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut r = x.first().copied().unwrap_or(0.0);
    for v in x {
        r += (v - r) / tau;
        out.push(r);
    }
    out
}

fn noise(spec: &ScenarioSpec, name: &str, len: usize) -> Vec<f64> {
    if spec.noise_std == 0.0 {
        return vec![0.0; len];
    }
    let dist = Normal::new(0.0, spec.noise_std).expect("validated noise");
    let mut rng = stream(spec.seed, name);
    (0..len).map(|_| dist.sample(&mut rng)).collect()
}

/// Oscillating bed drift from migrating bedforms: three sinusoids with periods of
/// 15–60 days.
fn bedforms(spec: &ScenarioSpec, len: usize) -> Vec<f64> {
    let mut rng = stream(spec.seed, "synth-bedforms");
    let waves: Vec<(f64, f64, f64)> =
        (0..3).map(|_| (rng.gen_range(15.0..60.0) * 24.0, rng.gen_range(0.2..0.5), rng.gen_range(0.0..TAU))).collect();
    (0..len).map(|t| waves.iter().map(|(p, a, ph)| a * (TAU * t as f64 / p + ph).sin()).sum()).collect()
}

/// Builds a frame with Sonar, Stage and Discharge channels.
pub fn generate(spec: &ScenarioSpec) -> Result<TimeSeriesFrame> {
    spec.validate()?;
    let len = spec.hours();
    let floods = floods(spec, len);
    let stage_clean: Vec<f64> = (0..len)
        .map(|t| {
            let cycle = seasonal_phase(spec, t).cos();
            let base = match spec.kind {
                ScenarioKind::Seasonal => STAGE_MEAN + STAGE_SEASONAL_AMP * cycle,
                ScenarioKind::Tidal => {
                    STAGE_MEAN
                        + TIDAL_SEASONAL_AMP * cycle
                        + STAGE_TIDAL_AMP * (TAU * t as f64 / TIDAL_PERIOD_HOURS).sin()
                }
            };
            base + floods.iter().map(|f| f.amplitude * pulse(t as f64 - f.onset, f.rise)).sum::<f64>()
        })
        .collect();
    let anomaly: Vec<f64> = stage_clean.iter().map(|s| s - STAGE_MEAN).collect();
    let sonar_clean: Vec<f64> = match spec.kind {
        ScenarioKind::Seasonal => {
            smooth(&anomaly, SEASONAL_LAG_HOURS).iter().map(|r| SONAR_BASELINE - spec.rho * r).collect()
        }
        ScenarioKind::Tidal => smooth(&anomaly, TIDAL_LAG_HOURS)
            .iter()
            .zip(bedforms(spec, len))
            .enumerate()
            .map(|(t, (r, b))| {
                SONAR_BASELINE + spec.rho.abs() * TIDAL_COUPLING * r + b
                    - TIDAL_BED_TREND * t as f64 / HOURS_PER_YEAR as f64
            })
            .collect(),
    };
    let stage: Vec<f64> = stage_clean.iter().zip(noise(spec, "synth-noise-stage", len)).map(|(s, n)| s + n).collect();
    let sonar: Vec<f64> = sonar_clean.iter().zip(noise(spec, "synth-noise-sonar", len)).map(|(s, n)| s + n).collect();
    let discharge: Vec<f64> = stage.iter().map(|s| RATING_Q0 * (RATING_BETA * (s - STAGE_MEAN)).exp()).collect();

    let mut frame = TimeSeriesFrame::hourly(spec.start_timestamp()?, len);
    frame.insert(ChannelId::Sonar, Channel::from_values(sonar))?;
    frame.insert(ChannelId::Stage, Channel::from_values(stage))?;
    frame.insert(ChannelId::Discharge, Channel::from_values(discharge))?;
    Ok(frame)
}

/// Pearson correlation of two equal-length series.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(f: &TimeSeriesFrame, id: ChannelId) -> &[f64] {
        &f.channel(id).unwrap().values
    }

    #[test]
    fn clean_seasonal_stage_is_periodic() {
        let f = generate(&ScenarioSpec::seasonal(3.0, 0.0, 0, 0.8, 1)).unwrap();
        let s = values(&f, ChannelId::Stage);
        for t in 0..2 * HOURS_PER_YEAR {
            assert_eq!(s[t].to_bits(), s[t + HOURS_PER_YEAR].to_bits());
        }
    }

    #[test]
    fn seasonal_stage_and_sonar_anticorrelate() {
        let f = generate(&ScenarioSpec::seasonal(3.0, 0.12, 3, 0.8, 5)).unwrap();
        let r = pearson(values(&f, ChannelId::Stage), values(&f, ChannelId::Sonar));
        assert!(r < -0.5, "r = {r}");
    }

    #[test]
    fn tidal_coupling_is_weak_and_positive() {
        let f = generate(&ScenarioSpec::tidal(1.0, 0.05, 1, 0.8, 5)).unwrap();
        let r = pearson(values(&f, ChannelId::Stage), values(&f, ChannelId::Sonar));
        assert!(r > 0.0 && r < 0.9, "r = {r}");
    }

    #[test]
    fn annual_minimum_of_sonar_falls_in_flood_season() {
        let spec = ScenarioSpec::seasonal(3.0, 0.12, 2, 0.8, 9);
        let f = generate(&spec).unwrap();
        let s = values(&f, ChannelId::Sonar);
        for y in 0..3 {
            let year = &s[y * HOURS_PER_YEAR..(y + 1) * HOURS_PER_YEAR];
            let argmin = (0..year.len()).min_by(|&a, &b| year[a].total_cmp(&year[b])).unwrap();
            let day = argmin as f64 / 24.0;
            assert!(day >= spec.flood_season.0 && day < spec.flood_season.1, "year {y}: day {day}");
        }
    }

    #[test]
    fn discharge_is_monotone_in_stage() {
        let f = generate(&ScenarioSpec::tidal(0.1, 0.1, 0, 0.5, 2)).unwrap();
        let mut pairs: Vec<(f64, f64)> = values(&f, ChannelId::Stage)
            .iter()
            .copied()
            .zip(values(&f, ChannelId::Discharge).iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].1 > 0.0));
    }

    #[test]
    fn same_seed_same_frame() {
        let spec = ScenarioSpec::seasonal(0.5, 0.3, 2, 0.7, 42);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = ScenarioSpec { seed: 43, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn frame_passes_core_invariants() {
        let f = generate(&ScenarioSpec::tidal(0.2, 0.1, 1, 0.3, 3)).unwrap();
        f.validate().unwrap();
        assert!(f.is_hourly());
        assert!(!f.channels().any(|(_, c)| c.masked_count() > 0));
    }

    #[test]
    fn bad_specs() {
        assert!(matches!(generate(&ScenarioSpec::seasonal(0.0, 0.1, 1, 0.5, 0)), Err(Error::BadSpec(_))));
        assert!(matches!(generate(&ScenarioSpec::seasonal(1.0, -0.1, 1, 0.5, 0)), Err(Error::BadSpec(_))));
        assert!(matches!(generate(&ScenarioSpec::seasonal(1.0, 0.1, 1, 1.5, 0)), Err(Error::BadSpec(_))));
    }
}
