//! Declarative experiments: one TOML file describes the data, features,
//! split, model or search space, budget and seed of a run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    equivalent_velocity, resolve_feature_set, time_features, DepthConvention, FeatureSetCode, FeatureToken,
};
use crate::frame_io::read_frame_csv;
use crate::models::ModelConfig;
use crate::rng::derive_indexed;
use crate::search::{
    grid_search, random_search, rank_bagging, rank_mean_mae, rank_median_mae, sample_size, MaeSource, PlantedOracle,
    Policy, PolicyRanking, SearchSpace, TrainingSource, TrialRecord, DEFAULT_TOP_K,
};
use crate::synth::{generate, ScenarioSpec};
use crate::timeseries::{ChannelId, SplitSpec, TimeSeriesFrame};
use crate::training::{holdout_train, sequential_train, FoldPlan, RunOptions, SequentialRun};

pub const EXPERIMENT_SCHEMA: &str = "scour.experiment/1";
pub const TUNE_SCHEMA: &str = "scour.tune/1";
pub const SWEEP_SCHEMA: &str = "scour.feature-sweep/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A preprocessed frame CSV (`timestamp,<channel>...`).
    Csv {
        path: PathBuf,
    },
    Synth(ScenarioSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    #[default]
    Grid,
    Random,
}

/// Planted mean MAEs, one per configuration of the space in axis order,
/// replacing real training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub noise_std: f64,
    pub means: Vec<f64>,
}

fn default_policies() -> Vec<Policy> {
    vec![Policy::MeanMae, Policy::MedianMae, Policy::Bagging]
}

fn default_repetitions() -> usize {
    20
}

fn default_sample_frac() -> f64 {
    0.67
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub space: SearchSpace,
    #[serde(default)]
    pub method: SearchMethod,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    /// Runs per configuration in a grid search.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_sample_frac")]
    pub sample_frac: f64,
    /// Number of random-search trials.
    #[serde(default = "default_repetitions")]
    pub trials: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
}

fn default_sweep_repetitions() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub codes: Vec<FeatureSetCode>,
    #[serde(default = "default_sweep_repetitions")]
    pub repetitions: usize,
}

fn default_schema() -> String {
    EXPERIMENT_SCHEMA.to_string()
}

fn default_feature_set() -> FeatureSetCode {
    "sNsT".parse().expect("known code")
}

fn default_split() -> SplitSpec {
    SplitSpec { final_test_frac: Some(0.1), ..SplitSpec::new(0.70, 0.15, 0.15).expect("valid split") }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub seed: u64,
    pub data: DataSource,
    #[serde(default = "default_feature_set")]
    pub feature_set: FeatureSetCode,
    #[serde(default)]
    pub depth_convention: DepthConvention,
    #[serde(default = "default_split")]
    pub split: SplitSpec,
    /// Number of sequential folds; absent means a hold-out run.
    #[serde(default)]
    pub folds: Option<usize>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    /// `(w_in, w_out)` for convolutional models, whose names carry no window.
    #[serde(default)]
    pub window: Option<(usize, usize)>,
    #[serde(default)]
    pub budget: RunOptions,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Minimal config around a data source and seed.
    pub fn new(data: DataSource, seed: u64) -> Self {
        ExperimentConfig {
            schema: default_schema(),
            seed,
            data,
            feature_set: default_feature_set(),
            depth_convention: DepthConvention::default(),
            split: default_split(),
            folds: None,
            model: None,
            window: None,
            budget: RunOptions::default(),
            search: None,
            sweep: None,
            output_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let DataSource::Csv { path: csv } = &mut cfg.data {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != EXPERIMENT_SCHEMA {
            return Err(Error::Config(format!("unsupported schema `{}`", self.schema)));
        }
        self.split.validate()?;
        if let DataSource::Synth(spec) = &self.data {
            spec.validate()?;
        }
        if self.folds == Some(0) {
            return Err(Error::Config("folds must be at least 1".into()));
        }
        if let Some(m) = &self.model {
            m.validate()?;
        }
        if self.budget.train_stride == 0 || self.budget.eval_stride == 0 {
            return Err(Error::Config("strides must be at least 1".into()));
        }
        if let Some(s) = &self.search {
            let n = s.space.size()?;
            if s.policies.is_empty() {
                return Err(Error::Config("search needs at least one policy".into()));
            }
            if s.repetitions == 0 || s.trials == 0 || s.top_k == 0 {
                return Err(Error::Config("repetitions, trials and top_k must be positive".into()));
            }
            if s.method == SearchMethod::Random {
                sample_size(n, s.sample_frac)?;
            }
            if let Some(o) = &s.oracle {
                if o.means.len() != n {
                    return Err(Error::Config(format!("oracle has {} means for {n} configurations", o.means.len())));
                }
                if !(o.noise_std >= 0.0) {
                    return Err(Error::Config("oracle noise_std must be non-negative".into()));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.codes.len() < 2 {
                return Err(Error::Config("a feature sweep needs at least two codes".into()));
            }
            let mut seen = BTreeSet::new();
            for c in &s.codes {
                if !seen.insert(c.to_string()) {
                    return Err(Error::Config(format!("duplicate feature-set code `{c}`")));
                }
            }
            if s.repetitions == 0 {
                return Err(Error::Config("sweep repetitions must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn require_model(&self) -> Result<ModelConfig> {
        self.model.ok_or_else(|| Error::Config("this command needs `model`".into()))
    }

    /// Window of `model`: its own for LSTM families, `window` otherwise.
    pub fn window_for(&self, model: &ModelConfig) -> Result<(usize, usize)> {
        model
            .window()
            .or(self.window)
            .ok_or_else(|| Error::Config(format!("{model} needs an explicit `window = [w_in, w_out]`")))
    }

    pub fn fold_plan(&self, frame_len: usize) -> Result<FoldPlan> {
        let n = self.folds.unwrap_or(1);
        let inner = SplitSpec { final_test_frac: None, ..self.split };
        FoldPlan::with_split(frame_len, n, self.split.final_test_frac.unwrap_or(0.0), &inner)
    }
}

/// Adds derived channels a feature-set code needs but the frame lacks.
pub fn prepare_features(frame: &mut TimeSeriesFrame, code: &FeatureSetCode, convention: DepthConvention) -> Result<()> {
    if code.contains(FeatureToken::EVelocity) && !frame.has(ChannelId::EVelocity) {
        equivalent_velocity(frame, convention)?;
    }
    if code.contains(FeatureToken::Year) && !frame.has(ChannelId::YearSin) {
        time_features(frame)?;
    }
    Ok(())
}

/// Loads or generates the frame and adds the channels every code of the
/// experiment needs.
pub fn load_frame(cfg: &ExperimentConfig) -> Result<TimeSeriesFrame> {
    let mut frame = match &cfg.data {
        DataSource::Csv { path } => read_frame_csv(&std::fs::read_to_string(path)?)?,
        DataSource::Synth(spec) => generate(spec)?,
    };
    prepare_features(&mut frame, &cfg.feature_set, cfg.depth_convention)?;
    if let Some(s) = &cfg.sweep {
        for code in &s.codes {
            prepare_features(&mut frame, code, cfg.depth_convention)?;
        }
    }
    Ok(frame)
}

/// Trains `model` once with the experiment's split, or fold by fold when
/// `folds` is set.
pub fn run_training(cfg: &ExperimentConfig, frame: &TimeSeriesFrame) -> Result<SequentialRun> {
    let model = cfg.require_model()?;
    let features = resolve_feature_set(&cfg.feature_set);
    let window = cfg.window_for(&model)?;
    match cfg.folds {
        None => holdout_train(&model, frame, &features, window, &cfg.split, &cfg.budget, cfg.seed),
        Some(_) => {
            sequential_train(&model, frame, &features, window, &cfg.fold_plan(frame.len())?, &cfg.budget, cfg.seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub schema: String,
    pub seed: u64,
    pub method: SearchMethod,
    pub oracle: bool,
    pub space_size: usize,
    /// Configurations trained per random-search trial.
    pub sample_size: Option<usize>,
    pub run_count: usize,
    /// Runs an exhaustive grid with the same number of repetitions would cost.
    pub full_grid_runs: usize,
    pub rankings: Vec<PolicyRanking>,
    pub records: Vec<TrialRecord>,
}

impl TuneReport {
    pub fn ranking(&self, policy: Policy) -> Option<&PolicyRanking> {
        self.rankings.iter().find(|r| r.policy == policy)
    }

    /// One row per record: `config,trial,val_mae`.
    pub fn distributions_csv(&self) -> String {
        let mut out = String::from("config,trial,val_mae\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{:?}\n", r.config, r.trial_index, r.val_mae));
        }
        out
    }
}

/// Ranks `records` under each policy, listing unsampled configurations.
pub fn rank_all(
    records: &[TrialRecord],
    policies: &[Policy],
    top_k: usize,
    space: &[ModelConfig],
) -> Result<Vec<PolicyRanking>> {
    policies
        .iter()
        .map(|p| {
            let r = match p {
                Policy::MeanMae => rank_mean_mae(records)?,
                Policy::MedianMae => rank_median_mae(records)?,
                Policy::Bagging => rank_bagging(records, top_k)?,
            };
            Ok(r.with_unobserved(space))
        })
        .collect()
}

/// Runs the configured search and every requested policy.
pub fn run_tune(cfg: &ExperimentConfig, frame: Option<&TimeSeriesFrame>) -> Result<TuneReport> {
    let search = cfg.search.as_ref().ok_or_else(|| Error::Config("this command needs a [search] table".into()))?;
    let configs = search.space.configs()?;
    let oracle = search.oracle.as_ref().map(|o| PlantedOracle {
        truth: configs.iter().copied().zip(o.means.iter().copied()).collect(),
        noise_std: o.noise_std,
    });
    let trainer;
    let source: &dyn MaeSource = match &oracle {
        Some(o) => o,
        None => {
            let frame = frame.ok_or_else(|| Error::Config("training-based search needs a frame".into()))?;
            trainer = TrainingSource {
                frame,
                features: resolve_feature_set(&cfg.feature_set),
                window: cfg.window.unwrap_or((168, 168)),
                split: cfg.split,
                options: cfg.budget.clone(),
            };
            &trainer
        }
    };
    let n = configs.len();
    let (records, sample, per_config) = match search.method {
        SearchMethod::Grid => (grid_search(&configs, source, search.repetitions, cfg.seed)?, None, search.repetitions),
        SearchMethod::Random => (
            random_search(&configs, source, search.sample_frac, search.trials, cfg.seed)?,
            Some(sample_size(n, search.sample_frac)?),
            search.trials,
        ),
    };
    Ok(TuneReport {
        schema: TUNE_SCHEMA.to_string(),
        seed: cfg.seed,
        method: search.method,
        oracle: oracle.is_some(),
        space_size: n,
        sample_size: sample,
        run_count: records.len(),
        full_grid_runs: n * per_config,
        rankings: rank_all(&records, &search.policies, search.top_k, &configs)?,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub code: FeatureSetCode,
    pub metric: ChannelId,
    /// False when the code has no Sonar input and the metric is another channel.
    pub metric_is_sonar: bool,
    /// Test MAE of the metric channel, native units, one per repetition.
    pub maes: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub config: ModelConfig,
    pub seed: u64,
    pub repetitions: usize,
    pub entries: Vec<SweepEntry>,
}

/// Trains the same model on every feature-set code with identical seeds and
/// budget.
pub fn run_feature_sweep(cfg: &ExperimentConfig, frame: &TimeSeriesFrame) -> Result<SweepReport> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("this command needs a [sweep] table".into()))?;
    let model = cfg.require_model()?;
    let window = cfg.window_for(&model)?;
    let split = SplitSpec { final_test_frac: None, ..cfg.split };
    let jobs: Vec<(usize, usize)> =
        (0..sweep.codes.len()).flat_map(|c| (0..sweep.repetitions).map(move |r| (c, r))).collect();
    let maes: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let features = resolve_feature_set(&sweep.codes[c]);
            let seed = derive_indexed(cfg.seed, "sweep", r as u64);
            let run = holdout_train(&model, frame, &features, window, &split, &cfg.budget, seed)?;
            Ok(run.report.folds[0].report.test.expect("hold-out reports a test MAE").ft)
        })
        .collect::<Result<_>>()?;
    let entries = sweep
        .codes
        .iter()
        .enumerate()
        .map(|(c, code)| {
            let features = resolve_feature_set(code);
            let m = maes[c * sweep.repetitions..(c + 1) * sweep.repetitions].to_vec();
            SweepEntry {
                code: code.clone(),
                metric: features.metric,
                metric_is_sonar: features.metric_is_sonar(),
                mean: m.iter().sum::<f64>() / m.len() as f64,
                maes: m,
            }
        })
        .collect();
    Ok(SweepReport {
        schema: SWEEP_SCHEMA.to_string(),
        config: model,
        seed: cfg.seed,
        repetitions: sweep.repetitions,
        entries,
    })
}
