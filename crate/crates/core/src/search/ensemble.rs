//! Ensembles of trained checkpoints: the mean forecast and a normal 95% band.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Checkpoint, ModelConfig};
use crate::timeseries::{ChannelId, Timestamp, WindowedDataset};
use crate::training::predict_dataset;

pub const Z_95: f64 = 1.96;

/// Per-position mean and `mean ± 1.96 · s` across models, where `s` is the
/// sample standard deviation. A single model yields a zero-width band.
pub fn combine(per_model: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let first = per_model.first().ok_or(Error::TooFewModels { needed: 1, got: 0 })?;
    let n = first.len();
    if per_model.iter().any(|p| p.len() != n) {
        return Err(Error::ShapeMismatch("ensemble members disagree on forecast length".into()));
    }
    let m = per_model.len() as f64;
    let mut mean = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let mu = per_model.iter().map(|p| p[i]).sum::<f64>() / m;
        let sd = if per_model.len() > 1 {
            (per_model.iter().map(|p| (p[i] - mu).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        mean[i] = mu;
        lower[i] = mu - Z_95 * sd;
        upper[i] = mu + Z_95 * sd;
    }
    Ok((mean, lower, upper))
}

/// Forecasts of several checkpoints over one dataset, in native units. Every
/// vector is flattened as `[origin × w_out × n_out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBundle {
    pub models: Vec<ModelConfig>,
    pub channels: Vec<ChannelId>,
    pub origins: Vec<Timestamp>,
    pub w_out: usize,
    pub n_out: usize,
    pub per_model: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ForecastBundle {
    pub fn index(&self, origin: usize, step: usize, channel: usize) -> usize {
        (origin * self.w_out + step) * self.n_out + channel
    }
}

/// Runs each checkpoint over `ds` (re-expressed in that checkpoint's
/// normalisation) and combines the native-unit outputs.
pub fn forecast_bundle(checkpoints: &[Checkpoint], ds: &WindowedDataset) -> Result<ForecastBundle> {
    if checkpoints.is_empty() {
        return Err(Error::TooFewModels { needed: 1, got: 0 });
    }
    let sh = ds.shape;
    let mut per_model = Vec::with_capacity(checkpoints.len());
    for ck in checkpoints {
        if ck.input_channels != ds.input_channels || ck.target_channels != ds.target_channels {
            return Err(Error::ChannelMismatch(format!("{} was trained on different channels", ck.config)));
        }
        let b = ck.shape;
        if (b.w_in, b.w_out, b.n_in, b.n_out) != (sh.w_in, sh.w_out, sh.n_in, sh.n_out) {
            return Err(Error::ShapeMismatch(format!("{} is bound to {b:?}, dataset has {sh:?}", ck.config)));
        }
        let mut model = ck.restore(0)?;
        per_model.push(predict_dataset(model.as_mut(), &ds.normalized(&ck.norm_stats))?);
    }
    let (mean, lower, upper) = combine(&per_model)?;
    Ok(ForecastBundle {
        models: checkpoints.iter().map(|c| c.config).collect(),
        channels: ds.target_channels.clone(),
        origins: ds.samples.iter().map(|s| s.origin).collect(),
        w_out: sh.w_out,
        n_out: sh.n_out,
        per_model,
        mean,
        lower,
        upper,
    })
}

/// Like [`forecast_bundle`] but requires at least two members.
pub fn ensemble_forecast(checkpoints: &[Checkpoint], ds: &WindowedDataset) -> Result<ForecastBundle> {
    if checkpoints.len() < 2 {
        return Err(Error::TooFewModels { needed: 2, got: checkpoints.len() });
    }
    forecast_bundle(checkpoints, ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_gives_known_band() {
        let (mean, lo, hi) = combine(&[vec![1.0, 5.0], vec![-1.0, 5.0]]).unwrap();
        assert_eq!(mean, vec![0.0, 5.0]);
        let half = Z_95 * 2f64.sqrt();
        assert!((hi[0] - half).abs() < 1e-12 && (lo[0] + half).abs() < 1e-12);
        assert_eq!((lo[1], hi[1]), (5.0, 5.0));
    }

    #[test]
    fn identical_members_have_zero_width() {
        let p = vec![0.3, -2.0, 7.5];
        let (mean, lo, hi) = combine(&[p.clone(), p.clone(), p.clone()]).unwrap();
        assert_eq!(mean, p);
        assert_eq!(lo, p);
        assert_eq!(hi, p);
    }

    #[test]
    fn band_contains_mean_and_rejects_ragged_input() {
        let (mean, lo, hi) = combine(&[vec![1.0, 2.0], vec![4.0, -3.0], vec![0.5, 0.0]]).unwrap();
        for i in 0..2 {
            assert!(lo[i] <= mean[i] && mean[i] <= hi[i]);
        }
        assert!(combine(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert_eq!(combine(&[]).unwrap_err(), Error::TooFewModels { needed: 1, got: 0 });
    }
}
