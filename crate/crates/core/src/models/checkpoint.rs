//! Versioned JSON checkpoints: named parameter tensors with shapes, batch-norm
//! buffers, and the data layout the model was trained on.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build, BindShape, Forecaster, ModelConfig};
use crate::error::{Error, Result};
use crate::neural::Tensor;
use crate::timeseries::{ChannelId, NormalizationStats};

pub const CHECKPOINT_SCHEMA: &str = "scour.checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl From<&Tensor> for StoredTensor {
    fn from(t: &Tensor) -> Self {
        StoredTensor { shape: t.shape().to_vec(), data: t.data().to_vec() }
    }
}

impl StoredTensor {
    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::from_vec(&self.shape, self.data.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema: String,
    pub config: ModelConfig,
    pub shape: BindShape,
    pub input_channels: Vec<ChannelId>,
    pub target_channels: Vec<ChannelId>,
    pub norm_stats: NormalizationStats,
    pub tensors: BTreeMap<String, StoredTensor>,
    pub buffers: BTreeMap<String, StoredTensor>,
}

impl Checkpoint {
    pub fn capture(
        model: &dyn Forecaster,
        input_channels: &[ChannelId],
        target_channels: &[ChannelId],
        norm_stats: &NormalizationStats,
    ) -> Self {
        let tensors = model.parameters().iter().map(|p| (p.name.clone(), StoredTensor::from(&p.value))).collect();
        let buffers = model.buffers().iter().map(|(n, t)| (n.clone(), StoredTensor::from(t))).collect();
        Checkpoint {
            schema: CHECKPOINT_SCHEMA.to_string(),
            config: *model.config(),
            shape: model.bind_shape(),
            input_channels: input_channels.to_vec(),
            target_channels: target_channels.to_vec(),
            norm_stats: norm_stats.clone(),
            tensors,
            buffers,
        }
    }

    /// Overwrites the parameters and buffers of `model`. Every parameter of the
    /// model must be present with a matching shape.
    pub fn load_into(&self, model: &mut dyn Forecaster) -> Result<()> {
        if model.config() != &self.config || model.bind_shape() != self.shape {
            return Err(Error::Checkpoint(format!(
                "checkpoint for {} does not match model {}",
                self.config,
                model.config()
            )));
        }
        for p in model.parameters_mut() {
            let stored =
                self.tensors.get(&p.name).ok_or_else(|| Error::Checkpoint(format!("missing tensor `{}`", p.name)))?;
            if stored.shape != p.value.shape() || stored.data.len() != p.value.len() {
                return Err(Error::Checkpoint(format!("tensor `{}` has shape {:?}", p.name, stored.shape)));
            }
            p.value.data_mut().copy_from_slice(&stored.data);
        }
        for (name, t) in &self.buffers {
            model.load_buffer(name, &t.to_tensor()?)?;
        }
        Ok(())
    }

    /// Builds a fresh model of the stored configuration and loads the weights.
    pub fn restore(&self, seed: u64) -> Result<Box<dyn Forecaster>> {
        let mut model = build(&self.config, self.shape, seed)?;
        self.load_into(model.as_mut())?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.schema != CHECKPOINT_SCHEMA {
            return Err(Error::Checkpoint(format!("unsupported schema `{}`", ck.schema)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `<config-string>__<dataset-id>__<fold>.ckpt`
pub fn checkpoint_file_name(cfg: &ModelConfig, dataset_id: &str, fold: usize) -> String {
    format!("{cfg}__{dataset_id}__{fold}.ckpt")
}
