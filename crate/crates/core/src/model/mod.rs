//! PV-LSTM encoder-decoder network.

mod config;
mod lstm;
mod network;
mod params;

pub use config::{Encoders, InputFeatures, ModelConfig, Task};
pub use lstm::{encode, lstm_cell, Dense, HiddenState, LstmCellParams};
pub use network::{
    batch_loss, batch_loss_and_gradients, decode_intention, decode_velocity, fuse_hidden, split_hidden, BoxLossSpace,
    LossBreakdown, LossWeights, Prediction, CHUNK_SIZE,
};
pub use params::{ModelParameters, Normalizer};
