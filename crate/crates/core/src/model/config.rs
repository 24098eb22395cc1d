use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which heads are trained and evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    BoxOnly,
    IntentionOnly,
    MultiTask,
}

/// What each observed frame contributes as input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputFeatures {
    /// `(x, y, w, h)`.
    Box,
    /// `(x, y)` only; predicted boxes keep the last observed size.
    CenterOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Encoders {
    PositionVelocity,
    VelocityOnly,
    /// Position encoder only, and the box decoder emits absolute boxes
    /// instead of velocities.
    PositionOnly,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text $(| $alias)* => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

text_enum!(Task { BoxOnly => "box-only", IntentionOnly => "intention-only", MultiTask => "multi" | "multi-task" });
text_enum!(InputFeatures { Box => "box", CenterOnly => "center" | "center-only" });
text_enum!(Encoders {
    PositionVelocity => "position+velocity",
    VelocityOnly => "velocity" | "velocity-only",
    PositionOnly => "position" | "position-only",
});

/// Architecture hyperparameters. Together with the seed these fully
/// determine the parameter shapes and their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub t_obs: usize,
    pub t_pred: usize,
    pub task: Task,
    pub input_features: InputFeatures,
    pub encoders: Encoders,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 256,
            t_obs: 18,
            t_pred: 18,
            task: Task::MultiTask,
            input_features: InputFeatures::Box,
            encoders: Encoders::PositionVelocity,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::Config("hidden_size must be positive".into()));
        }
        if self.t_obs < 2 {
            return Err(Error::Config(format!("t_obs must be at least 2, got {}", self.t_obs)));
        }
        if self.t_pred < 1 {
            return Err(Error::Config("t_pred must be at least 1".into()));
        }
        Ok(())
    }

    /// Width of per-frame box and velocity vectors.
    pub fn feature_dim(&self) -> usize {
        match self.input_features {
            InputFeatures::Box => 4,
            InputFeatures::CenterOnly => 2,
        }
    }

    pub fn decoder_hidden(&self) -> usize {
        2 * self.hidden_size
    }

    pub fn predicts_boxes(&self) -> bool {
        self.task != Task::IntentionOnly
    }

    pub fn predicts_intention(&self) -> bool {
        self.task != Task::BoxOnly
    }

    pub fn uses_position_encoder(&self) -> bool {
        self.encoders != Encoders::VelocityOnly
    }

    pub fn uses_velocity_encoder(&self) -> bool {
        self.encoders != Encoders::PositionOnly
    }

    /// The box decoder emits absolute boxes rather than velocities.
    pub fn direct_positions(&self) -> bool {
        self.encoders == Encoders::PositionOnly
    }

    /// Flat `key=value` lines, in a fixed order.
    pub fn to_text(&self) -> String {
        format!(
            "hidden_size={}\nt_obs={}\nt_pred={}\ntask={}\ninput_features={}\nencoders={}\n",
            self.hidden_size, self.t_obs, self.t_pred, self.task, self.input_features, self.encoders
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = ModelConfig::default();
        let mut seen = 0usize;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed model config line `{line}`")))?;
            let num = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("`{k}` expects an integer, got `{v}`")))
            };
            match k {
                "hidden_size" => c.hidden_size = num(v)?,
                "t_obs" => c.t_obs = num(v)?,
                "t_pred" => c.t_pred = num(v)?,
                "task" => c.task = v.parse()?,
                "input_features" => c.input_features = v.parse()?,
                "encoders" => c.encoders = v.parse()?,
                _ => continue,
            }
            seen += 1;
        }
        if seen != 6 {
            return Err(Error::Config("model config is incomplete".into()));
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let c = ModelConfig {
            hidden_size: 8,
            t_obs: 3,
            t_pred: 2,
            task: Task::BoxOnly,
            input_features: InputFeatures::CenterOnly,
            encoders: Encoders::VelocityOnly,
        };
        assert_eq!(ModelConfig::from_text(&c.to_text()).unwrap(), c);
        assert!(ModelConfig::from_text("hidden_size=8\n").is_err());
    }

    #[test]
    fn enum_aliases() {
        assert_eq!("multi-task".parse::<Task>().unwrap(), Task::MultiTask);
        assert_eq!("position".parse::<Encoders>().unwrap(), Encoders::PositionOnly);
        assert!("both".parse::<Encoders>().is_err());
    }

    #[test]
    fn rejects_short_observation() {
        let c = ModelConfig { t_obs: 1, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
