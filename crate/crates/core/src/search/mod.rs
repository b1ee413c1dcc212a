//! Hyperparameter search: the configuration space, exhaustive and sampled
//! searches over a pluggable MAE source, ranking policies and ensembles.

pub mod ensemble;
pub mod ranking;

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ResolvedFeatures;
use crate::models::{Architecture, DropoutRate, Family, ModelConfig};
use crate::rng::{derive_indexed, indexed_stream, StreamRng};
use crate::timeseries::{SplitSpec, TimeSeriesFrame};
use crate::training::{holdout_train, RunOptions};

pub use ensemble::{combine, ensemble_forecast, forecast_bundle, ForecastBundle, Z_95};
pub use ranking::{rank_bagging, rank_mean_mae, rank_median_mae, Policy, PolicyRanking, RankEntry, DEFAULT_TOP_K};

/// Named axes of candidate values. LSTM families combine `windows × units ×
/// dropouts`; convolutional families combine `k1 × f1 × k2 × f2 × dropouts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub families: Vec<Family>,
    #[serde(default)]
    pub windows: Vec<(usize, usize)>,
    #[serde(default)]
    pub units: Vec<usize>,
    #[serde(default)]
    pub k1: Vec<usize>,
    #[serde(default)]
    pub f1: Vec<usize>,
    #[serde(default)]
    pub k2: Vec<usize>,
    #[serde(default)]
    pub f2: Vec<usize>,
    pub dropouts: Vec<f64>,
}

impl SearchSpace {
    /// Single-shot LSTM space: 3 window pairs × 3 unit sizes × 2 dropout rates.
    pub fn experiment1() -> Self {
        SearchSpace {
            families: vec![Family::Ss],
            windows: vec![(168, 168), (336, 168), (720, 168)],
            units: vec![32, 64, 128],
            k1: Vec::new(),
            f1: Vec::new(),
            k2: Vec::new(),
            f2: Vec::new(),
            dropouts: vec![0.0, 0.2],
        }
    }

    /// Every configuration, in axis order.
    pub fn configs(&self) -> Result<Vec<ModelConfig>> {
        if self.families.is_empty() || self.dropouts.is_empty() {
            return Err(Error::Config("search space needs families and dropouts".into()));
        }
        let rates: Vec<DropoutRate> = self.dropouts.iter().map(|d| DropoutRate::new(*d)).collect::<Result<_>>()?;
        let mut out = Vec::new();
        for &family in &self.families {
            if family.is_lstm() {
                if self.windows.is_empty() || self.units.is_empty() {
                    return Err(Error::Config(format!("{} needs windows and units axes", family.tag())));
                }
                for &(w_in, w_out) in &self.windows {
                    for &units in &self.units {
                        for &dropout in &rates {
                            out.push(ModelConfig { family, arch: Architecture::Lstm { w_in, w_out, units }, dropout });
                        }
                    }
                }
            } else {
                if [&self.k1, &self.f1, &self.k2, &self.f2].iter().any(|a| a.is_empty()) {
                    return Err(Error::Config(format!("{} needs k1, f1, k2 and f2 axes", family.tag())));
                }
                for &k1 in &self.k1 {
                    for &f1 in &self.f1 {
                        for &k2 in &self.k2 {
                            for &f2 in &self.f2 {
                                for &dropout in &rates {
                                    out.push(ModelConfig {
                                        family,
                                        arch: Architecture::Cnn { k1, f1, k2, f2 },
                                        dropout,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        for c in &out {
            c.validate()?;
        }
        Ok(out)
    }

    pub fn size(&self) -> Result<usize> {
        Ok(self.configs()?.len())
    }
}

/// One trained (or simulated) run of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config: ModelConfig,
    pub trial_index: usize,
    /// Best-epoch validation MAE of the metric channel (ft).
    pub val_mae: f64,
}

/// Produces the validation MAE of one run of `cfg` under `seed`.
pub trait MaeSource: Sync {
    fn mae(&self, cfg: &ModelConfig, seed: u64) -> Result<f64>;
}

/// Draws MAEs from `N(truth[cfg], noise_std)` clipped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedOracle {
    pub truth: Vec<(ModelConfig, f64)>,
    pub noise_std: f64,
}

impl PlantedOracle {
    pub fn true_mean(&self, cfg: &ModelConfig) -> Option<f64> {
        self.truth.iter().find(|(c, _)| c == cfg).map(|(_, m)| *m)
    }

    /// Configurations ordered by planted mean, best first.
    pub fn true_ranking(&self) -> Vec<ModelConfig> {
        let mut t = self.truth.clone();
        t.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        t.into_iter().map(|(c, _)| c).collect()
    }
}

impl MaeSource for PlantedOracle {
    fn mae(&self, cfg: &ModelConfig, seed: u64) -> Result<f64> {
        let mean =
            self.true_mean(cfg).ok_or_else(|| Error::Config(format!("oracle has no planted value for {cfg}")))?;
        let dist = Normal::new(mean, self.noise_std).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = <StreamRng as rand::SeedableRng>::seed_from_u64(seed);
        Ok(dist.sample(&mut rng).max(0.0))
    }
}

/// Trains each configuration on a hold-out split and reports its
/// best-epoch validation MAE. Convolutional configs use `window`.
pub struct TrainingSource<'a> {
    pub frame: &'a TimeSeriesFrame,
    pub features: ResolvedFeatures,
    pub window: (usize, usize),
    pub split: SplitSpec,
    pub options: RunOptions,
}

impl MaeSource for TrainingSource<'_> {
    fn mae(&self, cfg: &ModelConfig, seed: u64) -> Result<f64> {
        let window = cfg.window().unwrap_or(self.window);
        let split = SplitSpec { final_test_frac: None, ..self.split };
        let run = holdout_train(cfg, self.frame, &self.features, window, &split, &self.options, seed)?;
        Ok(run.report.folds[0].report.val.ft)
    }
}

fn run_all(source: &dyn MaeSource, jobs: Vec<(ModelConfig, usize, u64)>) -> Result<Vec<TrialRecord>> {
    jobs.into_par_iter()
        .map(|(config, trial_index, seed)| {
            let val_mae = source.mae(&config, seed)?;
            Ok(TrialRecord { config, trial_index, val_mae })
        })
        .collect()
}

/// Trains every configuration `repetitions` times. Records come back grouped
/// by configuration, repetitions in order.
pub fn grid_search(
    configs: &[ModelConfig],
    source: &dyn MaeSource,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    if repetitions == 0 {
        return Err(Error::Config("grid search needs at least one repetition".into()));
    }
    let jobs = configs
        .iter()
        .flat_map(|c| (0..repetitions).map(move |r| (*c, r, derive_indexed(seed, &format!("grid/{c}"), r as u64))))
        .collect();
    run_all(source, jobs)
}

/// Configurations drawn per trial: `s · n` rounded to the nearest integer,
/// at least one.
pub fn sample_size(space_size: usize, frac: f64) -> Result<usize> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::BadFraction(frac));
    }
    Ok(((frac * space_size as f64).round() as usize).clamp(1, space_size.max(1)))
}

/// The configurations sampled for each trial, sorted by index in `configs`.
pub fn random_trials(space_size: usize, frac: f64, trials: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let k = sample_size(space_size, frac)?;
    Ok((0..trials)
        .map(|t| {
            let mut idx = sample(&mut indexed_stream(seed, "random-search", t as u64), space_size, k).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect())
}

/// Per trial, trains a uniform sample without replacement of the space once.
pub fn random_search(
    configs: &[ModelConfig],
    source: &dyn MaeSource,
    frac: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let picks = random_trials(configs.len(), frac, trials, seed)?;
    let jobs = picks
        .iter()
        .enumerate()
        .flat_map(|(t, idx)| {
            idx.iter().map(move |&i| {
                let c = configs[i];
                (c, t, derive_indexed(seed, &format!("random/{c}"), t as u64))
            })
        })
        .collect();
    run_all(source, jobs)
}
