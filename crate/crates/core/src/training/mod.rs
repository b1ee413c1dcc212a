//! Mini-batch training with early stopping, evaluation in native units, the
//! persistence baseline, and sequential fold training.

pub mod sequential;

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Forecaster, ModelConfig};
use crate::neural::{mse_loss, Adam, Mode, Tensor};
use crate::rng::indexed_stream;
use crate::timeseries::{ChannelId, WindowedDataset, FEET_TO_METERS};

pub use sequential::{
    holdout_train, sequential_train, FoldPlan, FoldRanges, FoldReport, RunOptions, SequentialReport, SequentialRun,
};

pub const TRAIN_REPORT_SCHEMA: &str = "scour.train-report/1";

/// Samples per forward pass when predicting a whole dataset.
const PREDICT_CHUNK: usize = 256;

/// Mean absolute error in feet with its metre equivalent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mae {
    pub ft: f64,
    pub m: f64,
}

impl Mae {
    pub fn from_ft(ft: f64) -> Self {
        Mae { ft, m: ft * FEET_TO_METERS }
    }
}

/// Which target channels enter the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMask {
    /// every target channel
    #[default]
    AllTargets,
    /// the metric channel only (Sonar when present)
    MetricOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss_mask: LossMask,
    /// Seed of the batch-shuffling stream.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_epochs: 200,
            patience: 15,
            batch_size: 32,
            learning_rate: 1e-3,
            loss_mask: LossMask::AllTargets,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: Mae,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema: String,
    pub config: ModelConfig,
    pub seed: u64,
    pub metric: ChannelId,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Validation MAE of the kept parameters.
    pub val: Mae,
    pub test: Option<Mae>,
    pub final_test: Option<Mae>,
    /// Wall-clock seconds. Not serialised.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Equality over every reported number except the wall-clock time.
impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.config == other.config
            && self.seed == other.seed
            && self.metric == other.metric
            && self.epochs == other.epochs
            && self.best_epoch == other.best_epoch
            && self.val == other.val
            && self.test == other.test
            && self.final_test == other.final_test
    }
}

impl TrainReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Per-channel and per-horizon-step errors of one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub channels: Vec<ChannelId>,
    pub per_channel: Vec<Mae>,
    pub metric: ChannelId,
    pub mae: Mae,
    /// MAE of the metric channel at each of the `w_out` horizon steps.
    pub per_step: Vec<Mae>,
}

/// Stacks the selected samples into `[S × w_in × n_in]` inputs and
/// `[S × w_out × n_out]` targets.
pub fn stack(ds: &WindowedDataset, idx: &[usize]) -> (Tensor, Tensor) {
    let sh = ds.shape;
    let mut x = Vec::with_capacity(idx.len() * sh.w_in * sh.n_in);
    let mut y = Vec::with_capacity(idx.len() * sh.w_out * sh.n_out);
    for &i in idx {
        x.extend_from_slice(&ds.samples[i].input);
        y.extend_from_slice(&ds.samples[i].target);
    }
    (
        Tensor::from_vec(&[idx.len(), sh.w_in, sh.n_in], x).expect("sample layout"),
        Tensor::from_vec(&[idx.len(), sh.w_out, sh.n_out], y).expect("sample layout"),
    )
}

fn check_layout(model: &dyn Forecaster, ds: &WindowedDataset) -> Result<()> {
    let b = model.bind_shape();
    let s = ds.shape;
    if (b.w_in, b.w_out, b.n_in, b.n_out) != (s.w_in, s.w_out, s.n_in, s.n_out) {
        return Err(Error::ShapeMismatch(format!("model bound to {b:?}, dataset has {s:?}")));
    }
    Ok(())
}

fn metric_index(ds: &WindowedDataset, metric: ChannelId) -> Result<usize> {
    ds.target_channels
        .iter()
        .position(|c| *c == metric)
        .ok_or_else(|| Error::MissingChannel(format!("metric channel {metric} is not a target")))
}

/// Model outputs for every sample of `ds`, in the dataset's normalised units,
/// flattened as `[S × w_out × n_out]`.
pub fn predict_normalized(model: &mut dyn Forecaster, ds: &WindowedDataset) -> Result<Vec<f64>> {
    check_layout(model, ds)?;
    let mut out = Vec::with_capacity(ds.len() * ds.shape.w_out * ds.shape.n_out);
    let all: Vec<usize> = (0..ds.len()).collect();
    for chunk in all.chunks(PREDICT_CHUNK) {
        let (x, _) = stack(ds, chunk);
        out.extend_from_slice(model.predict(&x)?.data());
    }
    Ok(out)
}

/// Model outputs for every sample of `ds` in native units.
pub fn predict_dataset(model: &mut dyn Forecaster, ds: &WindowedDataset) -> Result<Vec<f64>> {
    let n_out = ds.shape.n_out;
    let mut out = predict_normalized(model, ds)?;
    for (i, v) in out.iter_mut().enumerate() {
        *v = ds.norm_stats.denormalize(ds.target_channels[i % n_out], *v);
    }
    Ok(out)
}

/// Absolute errors in native units between normalised predictions and targets.
fn native_errors(ds: &WindowedDataset, pred: &[f64]) -> Vec<f64> {
    let n_out = ds.shape.n_out;
    let scale: Vec<f64> =
        ds.target_channels.iter().map(|c| ds.norm_stats.position(*c).map_or(1.0, |p| ds.norm_stats.std[p])).collect();
    ds.samples
        .iter()
        .flat_map(|s| s.target.iter())
        .zip(pred)
        .enumerate()
        .map(|(i, (t, p))| (p - t).abs() * scale[i % n_out])
        .collect()
}

/// Errors of precomputed normalised predictions against `ds`.
pub fn evaluate_predictions(ds: &WindowedDataset, pred: &[f64], metric: ChannelId) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(Error::EmptyPartition("evaluation"));
    }
    let sh = ds.shape;
    if pred.len() != ds.len() * sh.w_out * sh.n_out {
        return Err(Error::ShapeMismatch(format!("{} predictions for {} samples", pred.len(), ds.len())));
    }
    let mi = metric_index(ds, metric)?;
    let err = native_errors(ds, pred);
    let mut per_channel = vec![0.0; sh.n_out];
    let mut per_step = vec![0.0; sh.w_out];
    for (i, e) in err.iter().enumerate() {
        let ch = i % sh.n_out;
        per_channel[ch] += e;
        if ch == mi {
            per_step[(i / sh.n_out) % sh.w_out] += e;
        }
    }
    let rows = (ds.len() * sh.w_out) as f64;
    let per_channel: Vec<Mae> = per_channel.iter().map(|s| Mae::from_ft(s / rows)).collect();
    Ok(Evaluation {
        channels: ds.target_channels.clone(),
        mae: per_channel[mi],
        per_channel,
        metric,
        per_step: per_step.iter().map(|s| Mae::from_ft(s / ds.len() as f64)).collect(),
    })
}

/// Denormalised MAE per target channel and per horizon step.
pub fn evaluate(model: &mut dyn Forecaster, ds: &WindowedDataset, metric: ChannelId) -> Result<Evaluation> {
    let pred = predict_normalized(model, ds)?;
    evaluate_predictions(ds, &pred, metric)
}

/// Restores a checkpoint and evaluates it on `ds`, re-expressed in the
/// checkpoint's normalisation.
pub fn evaluate_checkpoint(
    ck: &crate::models::Checkpoint,
    ds: &WindowedDataset,
    metric: ChannelId,
) -> Result<Evaluation> {
    if ds.input_channels != ck.input_channels || ds.target_channels != ck.target_channels {
        return Err(Error::ChannelMismatch(format!(
            "checkpoint channels {:?}/{:?} vs dataset {:?}/{:?}",
            ck.input_channels, ck.target_channels, ds.input_channels, ds.target_channels
        )));
    }
    let mut model = ck.restore(0)?;
    evaluate(model.as_mut(), &ds.normalized(&ck.norm_stats), metric)
}

/// Repeats the last input value of `metric` over the whole horizon.
pub fn persistence_baseline(ds: &WindowedDataset, metric: ChannelId) -> Result<Mae> {
    if ds.is_empty() {
        return Err(Error::EmptyPartition("evaluation"));
    }
    let sh = ds.shape;
    let ii = ds
        .input_channels
        .iter()
        .position(|c| *c == metric)
        .ok_or_else(|| Error::MissingChannel(format!("metric channel {metric} is not an input")))?;
    let mi = metric_index(ds, metric)?;
    let stats = &ds.norm_stats;
    let mut acc = 0.0;
    for s in &ds.samples {
        let last = stats.denormalize(metric, s.input[(sh.w_in - 1) * sh.n_in + ii]);
        for t in 0..sh.w_out {
            acc += (stats.denormalize(metric, s.target[t * sh.n_out + mi]) - last).abs();
        }
    }
    Ok(Mae::from_ft(acc / (ds.len() * sh.w_out) as f64))
}

fn snapshot(model: &dyn Forecaster) -> (Vec<Tensor>, Vec<(String, Tensor)>) {
    (model.parameters().iter().map(|p| p.value.clone()).collect(), model.buffers())
}

fn restore(model: &mut dyn Forecaster, snap: &(Vec<Tensor>, Vec<(String, Tensor)>)) -> Result<()> {
    for (p, v) in model.parameters_mut().into_iter().zip(&snap.0) {
        p.value = v.clone();
    }
    for (name, t) in &snap.1 {
        model.load_buffer(name, t)?;
    }
    Ok(())
}

/// Minimises the masked MSE over shuffled mini-batches, evaluating the metric
/// channel MAE on `val` after every epoch. Training stops once `patience`
/// epochs pass without a strict improvement, and the model is left holding
/// the parameters of the best epoch.
pub fn train(
    model: &mut dyn Forecaster,
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    metric: ChannelId,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    let started = Instant::now();
    if train_set.is_empty() {
        return Err(Error::EmptyPartition("train"));
    }
    if val_set.is_empty() {
        return Err(Error::EmptyPartition("val"));
    }
    if opts.batch_size == 0 || opts.max_epochs == 0 {
        return Err(Error::Config("batch_size and max_epochs must be positive".into()));
    }
    check_layout(model, train_set)?;
    check_layout(model, val_set)?;
    let mi = metric_index(train_set, metric)?;
    let mask: Vec<usize> = match opts.loss_mask {
        LossMask::AllTargets => (0..train_set.shape.n_out).collect(),
        LossMask::MetricOnly => vec![mi],
    };

    for p in model.parameters_mut() {
        p.first_moment.fill(0.0);
        p.second_moment.fill(0.0);
    }
    let mut adam = Adam::with_lr(opts.learning_rate);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, Mae, (Vec<Tensor>, Vec<(String, Tensor)>))> = None;
    let mut since_best = 0;

    for epoch in 1..=opts.max_epochs {
        order.shuffle(&mut indexed_stream(opts.seed, "shuffle", epoch as u64));
        let mut loss_sum = 0.0;
        for batch in order.chunks(opts.batch_size) {
            let (x, y) = stack(train_set, batch);
            let pred = model.forward(&x, Mode::Train)?;
            let (loss, grad) = mse_loss(&pred, &y, &mask)?;
            if !loss.is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            for p in model.parameters_mut() {
                p.zero_grad();
            }
            model.backward(&grad)?;
            adam.step(model.parameters_mut());
        }
        let val_mae = evaluate(model, val_set, metric)?.mae;
        if !val_mae.ft.is_finite() {
            return Err(Error::DivergedLoss { epoch });
        }
        epochs.push(EpochRecord { epoch, train_loss: loss_sum / train_set.len() as f64, val_mae });
        if best.as_ref().is_none_or(|(_, b, _)| val_mae.ft < b.ft) {
            best = Some((epoch, val_mae, snapshot(model)));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= opts.patience {
            break;
        }
    }
    let (best_epoch, val, snap) = best.expect("at least one epoch ran");
    restore(model, &snap)?;
    Ok(TrainReport {
        schema: TRAIN_REPORT_SCHEMA.to_string(),
        config: *model.config(),
        seed: opts.seed,
        metric,
        epochs,
        best_epoch,
        val,
        test: None,
        final_test: None,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
