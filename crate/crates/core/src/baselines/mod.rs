//! Non-learned reference predictors.

mod cvcs;
mod kalman;

pub use cvcs::{cvcs_predict, CvcsVelocity};
pub use kalman::{lkf_fit_predict, KalmanFilter, KalmanState, LkfConfig};

use crate::data::{BoundingBox, SequenceWindow};
use crate::error::Result;
use crate::exec::Execution;

/// A baseline selected at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    Cvcs(CvcsVelocity),
    Lkf(LkfConfig),
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Cvcs(_) => "cvcs",
            Baseline::Lkf(_) => "lkf",
        }
    }

    pub fn predict(&self, window: &SequenceWindow) -> Result<Vec<BoundingBox>> {
        match self {
            Baseline::Cvcs(v) => cvcs_predict(window, *v),
            Baseline::Lkf(cfg) => lkf_fit_predict(window, cfg),
        }
    }

    /// Predicts every window, preserving order.
    pub fn predict_all(&self, windows: &[SequenceWindow], exec: Execution) -> Result<Vec<Vec<BoundingBox>>> {
        exec.map(windows, |w| self.predict(w)).into_iter().collect()
    }
}
