//! Dense linear algebra, activations, losses and the Adam optimizer.

mod activation;
mod adam;
mod gradcheck;
mod loss;
mod matrix;

pub use activation::{activate, sigmoid, Activation};
pub use adam::{adam_step, AdamConfig, ParamBlock};
pub use gradcheck::{grad_check, BlockReport, GradCheckOptions, GradCheckReport, ParamSet};
pub use loss::{bce_loss, mse_loss, BCE_EPSILON};
pub(crate) use loss::{bce_loss_f64, mse_loss_f64};
pub use matrix::{add_matmul_nt, matmul, matmul_tn, Matrix};
