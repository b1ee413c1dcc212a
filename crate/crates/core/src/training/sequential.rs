//! Chronological fold plans. The last slice of the frame is held back as a
//! final test set; the rest is cut into equal consecutive folds, each split
//! into train/val/test by target row. Fold `i > 0` fine-tunes the best
//! parameters of fold `i − 1`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{evaluate, train, TrainOptions, TrainReport};
use crate::error::{Error, Result};
use crate::features::ResolvedFeatures;
use crate::models::{build, BindShape, Checkpoint, ModelConfig};
use crate::rng::{derive_indexed, derive_seed};
use crate::timeseries::{fit_on, make_windows_in, SplitSpec, TimeSeriesFrame, WindowSpec, WindowedDataset};

pub const SEQUENTIAL_REPORT_SCHEMA: &str = "scour.sequential-report/1";

/// Target-row ranges of one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub frame_len: usize,
    pub folds: Vec<FoldRanges>,
    /// Empty when no final test slice is reserved.
    pub final_test: Range<usize>,
}

impl FoldPlan {
    /// Final 10 % reserved, folds split 70-15-15.
    pub fn new(frame_len: usize, n_folds: usize) -> Result<Self> {
        let inner = SplitSpec::new(0.70, 0.15, 0.15)?;
        Self::with_split(frame_len, n_folds, 0.10, &inner)
    }

    pub fn with_split(frame_len: usize, n_folds: usize, final_frac: f64, inner: &SplitSpec) -> Result<Self> {
        inner.validate()?;
        if n_folds == 0 {
            return Err(Error::FoldTooSmall { fold: 0, reason: "plan needs at least one fold".into() });
        }
        if !(0.0..1.0).contains(&final_frac) {
            return Err(Error::InvalidSplit(format!("final_test fraction {final_frac} outside [0, 1)")));
        }
        let reserved = (frame_len as f64 * final_frac).round() as usize;
        let body = frame_len - reserved;
        let size = body / n_folds;
        let mut folds = Vec::with_capacity(n_folds);
        for i in 0..n_folds {
            let start = i * size;
            let end = if i + 1 == n_folds { body } else { start + size };
            let (tr, va, te) = inner.sizes(end - start);
            if tr == 0 || va == 0 || te == 0 {
                return Err(Error::FoldTooSmall { fold: i, reason: format!("{} rows cannot be split", end - start) });
            }
            folds.push(FoldRanges {
                train: start..start + tr,
                val: start + tr..start + tr + va,
                test: start + tr + va..end,
            });
        }
        Ok(FoldPlan { n_folds, frame_len, folds, final_test: body..frame_len })
    }

    /// Hold-out plan: one fold split by `split`, with its optional final slice.
    pub fn holdout(frame_len: usize, split: &SplitSpec) -> Result<Self> {
        let inner = SplitSpec { final_test_frac: None, ..*split };
        Self::with_split(frame_len, 1, split.final_test_frac.unwrap_or(0.0), &inner)
    }

    /// True when no two folds share a training row.
    pub fn training_ranges_disjoint(&self) -> bool {
        self.folds.windows(2).all(|w| w[0].train.end <= w[1].train.start)
            && self.folds.iter().all(|f| f.train.end <= f.val.start && f.val.end <= f.test.start)
    }
}

/// Everything a training run needs besides the model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub train: TrainOptions,
    /// Hours between consecutive training windows.
    pub train_stride: usize,
    /// Hours between consecutive evaluation windows.
    pub eval_stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { train: TrainOptions::default(), train_stride: 1, eval_stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub ranges: FoldRanges,
    pub train_samples: usize,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialReport {
    pub schema: String,
    pub config: ModelConfig,
    pub seed: u64,
    pub n_folds: usize,
    pub final_test: Range<usize>,
    pub folds: Vec<FoldReport>,
}

impl SequentialReport {
    /// Final-test MAE (ft) of the last fold's model, the deliverable of the run.
    pub fn final_test_ft(&self) -> Option<f64> {
        self.folds.last()?.report.final_test.map(|m| m.ft)
    }
}

pub struct SequentialRun {
    pub report: SequentialReport,
    /// Parameters each fold started from.
    pub starts: Vec<Checkpoint>,
    /// Best parameters of each fold.
    pub bests: Vec<Checkpoint>,
}

fn windows(
    frame: &TimeSeriesFrame,
    spec: &WindowSpec,
    range: Range<usize>,
    fold: usize,
    what: &str,
) -> Result<WindowedDataset> {
    let ds = make_windows_in(frame, spec, range)?;
    if ds.is_empty() {
        return Err(Error::FoldTooSmall { fold, reason: format!("{what} range holds no complete window") });
    }
    Ok(ds)
}

/// Trains `cfg` fold by fold. Normalisation is fitted on the first fold's
/// training rows and kept for every later fold.
pub fn sequential_train(
    cfg: &ModelConfig,
    frame: &TimeSeriesFrame,
    features: &ResolvedFeatures,
    window: (usize, usize),
    plan: &FoldPlan,
    opts: &RunOptions,
    seed: u64,
) -> Result<SequentialRun> {
    if plan.frame_len != frame.len() {
        return Err(Error::FoldTooSmall {
            fold: 0,
            reason: format!("plan covers {} rows, frame has {}", plan.frame_len, frame.len()),
        });
    }
    let (w_in, w_out) = window;
    let spec = WindowSpec::new(w_in, w_out, features.inputs.clone(), features.targets.clone());
    let train_spec = spec.clone().with_stride(opts.train_stride);
    let eval_spec = spec.with_stride(opts.eval_stride);
    let shape = BindShape { w_in, w_out, n_in: features.inputs.len(), n_out: features.targets.len() };
    let mut model = build(cfg, shape, derive_seed(seed, "model"))?;

    let first_train = windows(frame, &train_spec, plan.folds[0].train.clone(), 0, "train")?;
    let stats = fit_on(frame, &first_train)?;
    let final_test = if plan.final_test.is_empty() {
        None
    } else {
        let ds = make_windows_in(frame, &eval_spec, plan.final_test.clone())?;
        if ds.is_empty() {
            return Err(Error::EmptyPartition("final_test"));
        }
        Some(ds.normalized(&stats))
    };

    let mut folds = Vec::with_capacity(plan.n_folds);
    let mut starts = Vec::with_capacity(plan.n_folds);
    let mut bests = Vec::with_capacity(plan.n_folds);
    for (i, r) in plan.folds.iter().enumerate() {
        let train_set =
            if i == 0 { first_train.clone() } else { windows(frame, &train_spec, r.train.clone(), i, "train")? };
        let train_set = train_set.normalized(&stats);
        let val_set = windows(frame, &eval_spec, r.val.clone(), i, "val")?.normalized(&stats);
        let test_set = windows(frame, &eval_spec, r.test.clone(), i, "test")?.normalized(&stats);

        starts.push(Checkpoint::capture(model.as_ref(), &features.inputs, &features.targets, &stats));
        let topts = TrainOptions { seed: derive_indexed(seed, "fold-train", i as u64), ..opts.train.clone() };
        let mut report = train(model.as_mut(), &train_set, &val_set, features.metric, &topts)?;
        report.seed = seed;
        report.test = Some(evaluate(model.as_mut(), &test_set, features.metric)?.mae);
        if let Some(ft) = &final_test {
            report.final_test = Some(evaluate(model.as_mut(), ft, features.metric)?.mae);
        }
        bests.push(Checkpoint::capture(model.as_ref(), &features.inputs, &features.targets, &stats));
        folds.push(FoldReport { fold: i, ranges: r.clone(), train_samples: train_set.len(), report });
    }
    Ok(SequentialRun {
        report: SequentialReport {
            schema: SEQUENTIAL_REPORT_SCHEMA.to_string(),
            config: *cfg,
            seed,
            n_folds: plan.n_folds,
            final_test: plan.final_test.clone(),
            folds,
        },
        starts,
        bests,
    })
}

/// Single chronological train/val/test run, the one-fold case of
/// [`sequential_train`].
pub fn holdout_train(
    cfg: &ModelConfig,
    frame: &TimeSeriesFrame,
    features: &ResolvedFeatures,
    window: (usize, usize),
    split: &SplitSpec,
    opts: &RunOptions,
    seed: u64,
) -> Result<SequentialRun> {
    let plan = FoldPlan::holdout(frame.len(), split)?;
    sequential_train(cfg, frame, features, window, &plan, opts, seed)
}
