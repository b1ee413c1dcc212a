//! Minimal differentiable operator set: dense, LSTM cell, 1-D convolutions,
//! batch norm, dropout, ReLU, MSE/MAE and an adaptive-moment optimiser.

pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod norm;
pub mod optim;
pub mod tensor;

pub use conv::{conv1d, conv1d_backward, ConvMode};
pub use dense::{dense_backward, dense_forward};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport};
pub use layers::{BatchNorm, Conv1d, Dense, Dropout, Layer, Lstm, Relu};
pub use loss::{mae_metric, mse_loss};
pub use lstm::{lstm_cell_backward, lstm_cell_step};
pub use norm::{batch_norm, batch_norm_backward, dropout, Mode};
pub use optim::{adam_step, Adam};
pub use tensor::{Parameter, Tensor};
