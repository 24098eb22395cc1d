//! Pedestrian trajectory and crossing-intention forecasting.
//!
//! The crate is organised bottom-up: [`kernel`] holds the dense matrix type,
//! activations, losses, Adam and the finite-difference gradient checker;
//! [`model`] builds the position/velocity LSTM on top of it; [`data`] turns
//! annotation tracks into fixed-length windows; [`baselines`] and
//! [`metrics`] provide the comparison points; [`train`] ties everything into
//! a reproducible training loop with checkpoints.

pub mod baselines;
pub mod data;
pub mod error;
pub mod exec;
pub mod kernel;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use exec::Execution;
