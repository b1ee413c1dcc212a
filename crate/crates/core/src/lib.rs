//! Scour forecasting toolkit: hourly sensor frames, LSTM and temporal-CNN
//! forecasters built on a small reverse-mode operator set, hyperparameter
//! search policies and a sequential fold-training protocol.

pub mod error;
pub mod experiment;
pub mod features;
pub mod frame_io;
pub mod ingest;
pub mod models;
pub mod neural;
pub mod rng;
pub mod search;
pub mod synth;
pub mod timeseries;
pub mod training;

pub use error::{Error, Result};
