//! Autoregressive LSTM: after a warm-up pass over the input window, each
//! one-step prediction is written back into the next input row.
//!
//! Target channels that are also inputs receive the prediction; every other
//! input channel repeats its last observed value for the whole rollout.

use super::{check_input, check_window, BindShape, Family, Forecaster, ModelConfig};
use crate::error::{Error, Result};
use crate::neural::dense::{dense_backward, dense_forward};
use crate::neural::norm::dropout;
use crate::neural::{Dense, Dropout, Layer, Lstm, Mode, Parameter, Tensor};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::timeseries::ChannelId;
use rand::SeedableRng;

pub struct FeedbackModel {
    cfg: ModelConfig,
    shape: BindShape,
    lstm: Lstm,
    head: Dense,
    /// For each input channel, the target channel that feeds it (if any).
    feed: Vec<Option<usize>>,
    rng: StreamRng,
    pinned: Option<u64>,
    trace: Option<Trace>,
}

struct Trace {
    batch: usize,
    /// Head inputs (post-dropout hidden state) per rollout step.
    head_inputs: Vec<Tensor>,
    masks: Vec<Option<Vec<f64>>>,
}

impl FeedbackModel {
    pub fn new(cfg: &ModelConfig, shape: BindShape, seed: u64) -> Result<Self> {
        Self::with_feed(cfg, shape, seed, None)
    }
}

/// Maps each input channel to the target channel with the same id.
pub fn feed_routing(inputs: &[ChannelId], targets: &[ChannelId]) -> Vec<Option<usize>> {
    inputs.iter().map(|c| targets.iter().position(|t| t == c)).collect()
}

impl FeedbackModel {
    /// `feed[j] = Some(k)` routes target channel `k` into input channel `j`
    /// during the rollout. Defaults to matching positions when input and
    /// target channel lists share a prefix.
    pub fn with_feed(cfg: &ModelConfig, shape: BindShape, seed: u64, feed: Option<Vec<Option<usize>>>) -> Result<Self> {
        if cfg.family != Family::Fb {
            return Err(Error::ConfigMismatch(format!("{cfg} is not the feedback family")));
        }
        cfg.validate()?;
        check_window(cfg, &shape)?;
        let super::Architecture::Lstm { units, .. } = cfg.arch else { unreachable!("validated") };
        let feed = feed.unwrap_or_else(|| (0..shape.n_in).map(|j| (j < shape.n_out).then_some(j)).collect());
        if feed.len() != shape.n_in || feed.iter().flatten().any(|&k| k >= shape.n_out) {
            return Err(Error::ConfigMismatch("feedback routing does not match channel counts".into()));
        }
        let mut rng = stream(seed, "init");
        let lstm = Lstm::new("lstm1", shape.n_in, units, false, &mut rng);
        let head = Dense::new("head", units, shape.n_out, &mut rng);
        let dseed = derive_seed(seed, "dropout");
        Ok(FeedbackModel {
            cfg: *cfg,
            shape,
            lstm,
            head,
            feed,
            rng: StreamRng::seed_from_u64(dseed),
            pinned: None,
            trace: None,
        })
    }

    fn row(x: &Tensor, t: usize) -> Tensor {
        let (b, len, n) = (x.dim(0), x.dim(1), x.dim(2));
        let mut out = Tensor::zeros(&[b, n]);
        for r in 0..b {
            out.data_mut()[r * n..(r + 1) * n].copy_from_slice(&x.data()[(r * len + t) * n..(r * len + t + 1) * n]);
        }
        out
    }
}

impl Layer for FeedbackModel {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let batch = check_input(input, &self.shape)?;
        let BindShape { w_in, w_out, n_in, n_out } = self.shape;
        let units = self.lstm.units;
        if let Some(seed) = self.pinned {
            self.rng = StreamRng::seed_from_u64(seed);
        }
        self.lstm.clear();
        let mut a = Tensor::zeros(&[batch, units]);
        let mut c = Tensor::zeros(&[batch, units]);
        for t in 0..w_in {
            let (na, nc) = self.lstm.step(&Self::row(input, t), &a, &c)?;
            a = na;
            c = nc;
        }
        let last_obs = Self::row(input, w_in - 1);
        let mut out = Tensor::zeros(&[batch, w_out, n_out]);
        let mut trace = Trace { batch, head_inputs: Vec::with_capacity(w_out), masks: Vec::with_capacity(w_out) };
        for s in 0..w_out {
            let (h, mask) = dropout(&a, self.cfg.dropout_rate(), mode, &mut self.rng)?;
            let pred = dense_forward(&h, &self.head.weights.value, &self.head.bias.value)?;
            for r in 0..batch {
                out.data_mut()[(r * w_out + s) * n_out..(r * w_out + s + 1) * n_out]
                    .copy_from_slice(&pred.data()[r * n_out..(r + 1) * n_out]);
            }
            trace.head_inputs.push(h);
            trace.masks.push(mask);
            if s + 1 < w_out {
                let mut next = last_obs.clone();
                for r in 0..batch {
                    for (j, k) in self.feed.iter().enumerate() {
                        if let Some(k) = k {
                            next.data_mut()[r * n_in + j] = pred.data()[r * n_out + k];
                        }
                    }
                }
                let (na, nc) = self.lstm.step(&next, &a, &c)?;
                a = na;
                c = nc;
            }
        }
        self.trace = Some(trace);
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let trace = self.trace.take().ok_or_else(|| Error::ShapeMismatch("backward before forward".into()))?;
        let BindShape { w_in, w_out, n_in, n_out } = self.shape;
        let batch = trace.batch;
        let units = self.lstm.units;
        if grad_out.shape() != [batch, w_out, n_out] {
            return Err(Error::ShapeMismatch(format!("feedback grad {:?}", grad_out.shape())));
        }
        let mut dinput = Tensor::zeros(&[batch, w_in, n_in]);
        let mut dlast = Tensor::zeros(&[batch, n_in]);
        let mut da = Tensor::zeros(&[batch, units]);
        let mut dc = Tensor::zeros(&[batch, units]);
        let mut dpred_carry = Tensor::zeros(&[batch, n_out]);
        for s in (0..w_out).rev() {
            let mut g = Tensor::zeros(&[batch, n_out]);
            for r in 0..batch {
                for k in 0..n_out {
                    g.data_mut()[r * n_out + k] =
                        grad_out.data()[(r * w_out + s) * n_out + k] + dpred_carry.data()[r * n_out + k];
                }
            }
            let hg = dense_backward(&trace.head_inputs[s], &self.head.weights.value, &g)?;
            self.head.weights.grad.add_assign(&hg.weights);
            self.head.bias.grad.add_assign(&hg.bias);
            let mut dh = hg.input;
            if let Some(mask) = &trace.masks[s] {
                for (d, m) in dh.data_mut().iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            da.add_assign(&dh);
            let (dx, da_prev, dc_prev) = self.lstm.backward_step(&da, &dc)?;
            if s >= 1 {
                dpred_carry = Tensor::zeros(&[batch, n_out]);
                for r in 0..batch {
                    for (j, k) in self.feed.iter().enumerate() {
                        let v = dx.data()[r * n_in + j];
                        match k {
                            Some(k) => dpred_carry.data_mut()[r * n_out + k] += v,
                            None => dlast.data_mut()[r * n_in + j] += v,
                        }
                    }
                }
            } else {
                dlast.add_assign(&dx);
            }
            da = da_prev;
            dc = dc_prev;
        }
        for r in 0..batch {
            let dst = &mut dinput.data_mut()[(r * w_in + w_in - 1) * n_in..(r * w_in + w_in) * n_in];
            for (d, v) in dst.iter_mut().zip(&dlast.data()[r * n_in..(r + 1) * n_in]) {
                *d += v;
            }
        }
        for t in (0..w_in - 1).rev() {
            let (dx, da_prev, dc_prev) = self.lstm.backward_step(&da, &dc)?;
            for r in 0..batch {
                dinput.data_mut()[(r * w_in + t) * n_in..(r * w_in + t + 1) * n_in]
                    .copy_from_slice(&dx.data()[r * n_in..(r + 1) * n_in]);
            }
            da = da_prev;
            dc = dc_prev;
        }
        Ok(dinput)
    }

    fn parameters(&self) -> Vec<&Parameter> {
        let mut p = self.lstm.parameters();
        p.extend(self.head.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.lstm.parameters_mut();
        p.extend(self.head.parameters_mut());
        p
    }

    fn is_deterministic(&self) -> bool {
        self.cfg.dropout_rate() == 0.0 || self.pinned.is_some()
    }
}

impl Forecaster for FeedbackModel {
    fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn bind_shape(&self) -> BindShape {
        self.shape
    }

    /// Masks are drawn per rollout step from the model's own stream.
    fn dropout_layers_mut(&mut self) -> Vec<&mut Dropout> {
        Vec::new()
    }

    fn pin_dropout(&mut self, seed: u64) {
        self.pinned = Some(crate::rng::derive_indexed(seed, "dropout-pin", 0));
    }

    fn reseed_dropout(&mut self, seed: u64) {
        self.rng = StreamRng::seed_from_u64(crate::rng::derive_indexed(seed, "dropout", 0));
    }
}
