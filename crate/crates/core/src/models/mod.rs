//! The six forecasting architectures and their shared interface.

pub mod checkpoint;
pub mod cnn;
pub mod config;
pub mod feedback;
pub mod single_shot;

use serde::{Deserialize, Serialize};

pub use checkpoint::{checkpoint_file_name, Checkpoint, StoredTensor, CHECKPOINT_SCHEMA};
pub use cnn::CnnModel;
pub use config::{format_config, parse_config, Architecture, DropoutRate, Family, ModelConfig};
pub use feedback::FeedbackModel;
pub use single_shot::SingleShotModel;

use crate::error::{Error, Result};
use crate::neural::{Dropout, Layer, Mode, Tensor};

/// Data-dependent sizes a configuration is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindShape {
    pub w_in: usize,
    pub w_out: usize,
    pub n_in: usize,
    pub n_out: usize,
}

/// A model mapping `[batch × w_in × n_in]` to `[batch × w_out × n_out]`.
pub trait Forecaster: Layer {
    fn config(&self) -> &ModelConfig;
    fn bind_shape(&self) -> BindShape;
    /// Non-trainable tensors (batch-norm running statistics).
    fn buffers(&self) -> Vec<(String, Tensor)> {
        Vec::new()
    }
    fn load_buffer(&mut self, name: &str, _value: &Tensor) -> Result<()> {
        Err(Error::Checkpoint(format!("unknown buffer `{name}`")))
    }
    fn dropout_layers_mut(&mut self) -> Vec<&mut Dropout>;

    fn predict(&mut self, input: &Tensor) -> Result<Tensor> {
        self.forward(input, Mode::Infer)
    }

    fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Pins every dropout mask (for finite-difference checks).
    fn pin_dropout(&mut self, seed: u64) {
        for (i, d) in self.dropout_layers_mut().into_iter().enumerate() {
            d.pin(crate::rng::derive_indexed(seed, "dropout-pin", i as u64));
        }
    }

    fn reseed_dropout(&mut self, seed: u64) {
        for (i, d) in self.dropout_layers_mut().into_iter().enumerate() {
            d.reseed(crate::rng::derive_indexed(seed, "dropout", i as u64));
        }
    }
}

/// Builds the architecture named by `cfg` with parameters drawn from `seed`.
pub fn build(cfg: &ModelConfig, shape: BindShape, seed: u64) -> Result<Box<dyn Forecaster>> {
    Ok(match cfg.family {
        Family::Ss | Family::Ss2 => Box::new(SingleShotModel::new(cfg, shape, seed)?),
        Family::Fb => Box::new(FeedbackModel::new(cfg, shape, seed)?),
        Family::Vcn | Family::Dcn | Family::Fcn => Box::new(CnnModel::new(cfg, shape, seed)?),
    })
}

pub fn build_single_shot(cfg: &ModelConfig, shape: BindShape, seed: u64) -> Result<SingleShotModel> {
    SingleShotModel::new(cfg, shape, seed)
}

pub fn build_feedback(cfg: &ModelConfig, shape: BindShape, seed: u64) -> Result<FeedbackModel> {
    FeedbackModel::new(cfg, shape, seed)
}

pub fn build_cnn(cfg: &ModelConfig, shape: BindShape, seed: u64) -> Result<CnnModel> {
    CnnModel::new(cfg, shape, seed)
}

/// Checks the window of an LSTM config against the bind shape.
pub(crate) fn check_window(cfg: &ModelConfig, shape: &BindShape) -> Result<()> {
    if shape.w_in < 2 || shape.w_out < 1 || shape.n_in == 0 || shape.n_out == 0 {
        return Err(Error::ConfigMismatch(format!("degenerate bind shape {shape:?}")));
    }
    if let Some((w_in, w_out)) = cfg.window() {
        if (w_in, w_out) != (shape.w_in, shape.w_out) {
            return Err(Error::ConfigMismatch(format!("{cfg} bound to windows ({}, {})", shape.w_in, shape.w_out)));
        }
    }
    Ok(())
}

pub(crate) fn check_input(input: &Tensor, shape: &BindShape) -> Result<usize> {
    input.expect_rank(3, "model input")?;
    if input.dim(1) != shape.w_in || input.dim(2) != shape.n_in {
        return Err(Error::ShapeMismatch(format!(
            "model expects [_, {}, {}], got {:?}",
            shape.w_in,
            shape.n_in,
            input.shape()
        )));
    }
    Ok(input.dim(0))
}
