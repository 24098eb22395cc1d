use std::fmt;
use std::str::FromStr;

use crate::data::{BoundingBox, SequenceWindow};
use crate::error::{Error, Result};

/// Which observed center velocity the extrapolation holds constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CvcsVelocity {
    /// Mean of all observed per-frame center displacements.
    #[default]
    Mean,
    /// The final observed displacement only.
    Last,
}

impl FromStr for CvcsVelocity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(CvcsVelocity::Mean),
            "last" => Ok(CvcsVelocity::Last),
            other => Err(Error::Config(format!("unknown cvcs velocity `{other}` (expected mean or last)"))),
        }
    }
}

impl fmt::Display for CvcsVelocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CvcsVelocity::Mean => "mean",
            CvcsVelocity::Last => "last",
        })
    }
}

/// Constant-velocity, constant-scale extrapolation of the box center. Width
/// and height stay at their last observed values.
pub fn cvcs_predict(window: &SequenceWindow, velocity: CvcsVelocity) -> Result<Vec<BoundingBox>> {
    if window.obs_velocities.is_empty() {
        return Err(Error::Validation(format!("window {} needs t_obs >= 2", window.provenance)));
    }
    let (dx, dy) = match velocity {
        CvcsVelocity::Last => {
            let v = window.last_velocity();
            (v.dx, v.dy)
        }
        CvcsVelocity::Mean => {
            let n = window.obs_velocities.len() as f64;
            let (sx, sy) = window
                .obs_velocities
                .iter()
                .fold((0.0f64, 0.0f64), |(sx, sy), v| (sx + v.dx as f64, sy + v.dy as f64));
            ((sx / n) as f32, (sy / n) as f32)
        }
    };
    let mut current = window.last_box();
    Ok((0..window.t_pred())
        .map(|_| {
            current = current.translated(dx, dy);
            current
        })
        .collect())
}
