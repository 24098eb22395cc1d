use std::fmt::Write as _;

use crate::baselines::{CvcsVelocity, LkfConfig};
use crate::data::{SplitRule, WindowConfig};
use crate::error::{Error, Result};
use crate::kernel::AdamConfig;
use crate::model::{BoxLossSpace, LossWeights, ModelConfig};

/// Reduce-on-plateau learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig {
    pub factor: f32,
    /// Epochs without improvement tolerated before the rate is reduced.
    pub patience: usize,
    pub min_lr: f32,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            factor: 0.5,
            patience: 5,
            min_lr: 1e-6,
        }
    }
}

/// Everything a training or evaluation run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss_weight_box: f32,
    pub loss_weight_intention: f32,
    pub box_loss_space: BoxLossSpace,
    pub scheduler: SchedulerConfig,
    pub adam: AdamConfig,
    /// Fraction of training videos held out for validation.
    pub validation_fraction: f64,
    /// Fit a per-feature affine input normalization on the training windows.
    pub normalize: bool,
    pub model: ModelConfig,
    pub window: WindowConfig,
    pub split: SplitRule,
    pub cvcs_velocity: CvcsVelocity,
    pub lkf: LkfConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            learning_rate: 1e-4,
            epochs: 100,
            batch_size: 128,
            loss_weight_box: 1.0,
            loss_weight_intention: 1.0,
            box_loss_space: BoxLossSpace::Velocity,
            scheduler: SchedulerConfig::default(),
            adam: AdamConfig::default(),
            validation_fraction: 0.1,
            normalize: false,
            model: ModelConfig::default(),
            window: WindowConfig::default(),
            split: SplitRule::default(),
            cvcs_velocity: CvcsVelocity::default(),
            lkf: LkfConfig::default(),
        }
    }
}

/// Keys of the flat configuration format with their meaning.
pub const CONFIG_KEYS: [(&str, &str); 29] = [
    ("seed", "seed for initialization and shuffling"),
    ("learning_rate", "initial Adam learning rate"),
    ("epochs", "number of training epochs"),
    ("batch_size", "windows per optimizer step"),
    ("loss_weight_box", "weight of the box MSE"),
    ("loss_weight_intention", "weight of the intention BCE"),
    ("box_loss_space", "velocity | box"),
    ("scheduler_factor", "learning-rate multiplier on plateau"),
    ("scheduler_patience", "epochs without improvement before reducing"),
    ("scheduler_min_lr", "learning-rate floor"),
    ("adam_beta1", "first-moment decay"),
    ("adam_beta2", "second-moment decay"),
    ("adam_epsilon", "denominator offset"),
    ("validation_fraction", "fraction of training videos held out"),
    ("normalize", "true | false"),
    ("hidden_size", "encoder hidden size (decoders use twice this)"),
    ("t_obs", "observed frames per window"),
    ("t_pred", "predicted frames per window"),
    ("task", "multi | box-only | intention-only"),
    ("input_features", "box | center"),
    ("encoders", "position+velocity | velocity | position"),
    ("stride", "frames between consecutive window starts"),
    ("fps", "annotation frame rate"),
    ("split", "first:N | fraction:F"),
    ("cvcs_velocity", "mean | last"),
    ("lkf_position_noise", "Kalman process noise on x, y, w, h"),
    ("lkf_velocity_noise", "Kalman process noise on velocities"),
    ("lkf_observation_noise", "Kalman observation noise"),
    ("lkf_initial_covariance", "Kalman initial covariance diagonal"),
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{key}` expects true or false, got `{value}`")),
    }
}

impl TrainConfig {
    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            box_weight: self.loss_weight_box,
            intention_weight: self.loss_weight_intention,
            box_space: self.box_loss_space,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.window.validate()?;
        self.lkf.validate()?;
        if self.window.t_obs != self.model.t_obs || self.window.t_pred != self.model.t_pred {
            return Err(Error::Config("window and model horizons disagree".into()));
        }
        let w = (self.loss_weight_box, self.loss_weight_intention);
        if !(w.0.is_finite() && w.1.is_finite()) || w.0 < 0.0 || w.1 < 0.0 || (w.0 == 0.0 && w.1 == 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be non-negative and not both zero, got {} and {}",
                w.0, w.1
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        let s = &self.scheduler;
        if !(s.factor > 0.0 && s.factor < 1.0) || !(s.min_lr >= 0.0) {
            return Err(Error::Config(format!("invalid scheduler settings {s:?}")));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "loss_weight_box" => self.loss_weight_box = parse_value(key, value)?,
            "loss_weight_intention" => self.loss_weight_intention = parse_value(key, value)?,
            "box_loss_space" => self.box_loss_space = value.parse().map_err(|e: Error| e.to_string())?,
            "scheduler_factor" => self.scheduler.factor = parse_value(key, value)?,
            "scheduler_patience" => self.scheduler.patience = parse_value(key, value)?,
            "scheduler_min_lr" => self.scheduler.min_lr = parse_value(key, value)?,
            "adam_beta1" => self.adam.beta1 = parse_value(key, value)?,
            "adam_beta2" => self.adam.beta2 = parse_value(key, value)?,
            "adam_epsilon" => self.adam.epsilon = parse_value(key, value)?,
            "validation_fraction" => self.validation_fraction = parse_value(key, value)?,
            "normalize" => self.normalize = parse_bool(key, value)?,
            "hidden_size" => self.model.hidden_size = parse_value(key, value)?,
            "t_obs" => {
                self.model.t_obs = parse_value(key, value)?;
                self.window.t_obs = self.model.t_obs;
            }
            "t_pred" => {
                self.model.t_pred = parse_value(key, value)?;
                self.window.t_pred = self.model.t_pred;
            }
            "task" => self.model.task = value.parse().map_err(|e: Error| e.to_string())?,
            "input_features" => self.model.input_features = value.parse().map_err(|e: Error| e.to_string())?,
            "encoders" => self.model.encoders = value.parse().map_err(|e: Error| e.to_string())?,
            "stride" => self.window.stride = parse_value(key, value)?,
            "fps" => self.window.fps = parse_value(key, value)?,
            "split" => self.split = value.parse().map_err(|e: Error| e.to_string())?,
            "cvcs_velocity" => self.cvcs_velocity = value.parse().map_err(|e: Error| e.to_string())?,
            "lkf_position_noise" => self.lkf.position_noise = parse_value(key, value)?,
            "lkf_velocity_noise" => self.lkf.velocity_noise = parse_value(key, value)?,
            "lkf_observation_noise" => self.lkf.observation_noise = parse_value(key, value)?,
            "lkf_initial_covariance" => self.lkf.initial_covariance = parse_value(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "seed" => self.seed.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "loss_weight_box" => self.loss_weight_box.to_string(),
            "loss_weight_intention" => self.loss_weight_intention.to_string(),
            "box_loss_space" => self.box_loss_space.to_string(),
            "scheduler_factor" => self.scheduler.factor.to_string(),
            "scheduler_patience" => self.scheduler.patience.to_string(),
            "scheduler_min_lr" => self.scheduler.min_lr.to_string(),
            "adam_beta1" => self.adam.beta1.to_string(),
            "adam_beta2" => self.adam.beta2.to_string(),
            "adam_epsilon" => self.adam.epsilon.to_string(),
            "validation_fraction" => self.validation_fraction.to_string(),
            "normalize" => self.normalize.to_string(),
            "hidden_size" => self.model.hidden_size.to_string(),
            "t_obs" => self.model.t_obs.to_string(),
            "t_pred" => self.model.t_pred.to_string(),
            "task" => self.model.task.to_string(),
            "input_features" => self.model.input_features.to_string(),
            "encoders" => self.model.encoders.to_string(),
            "stride" => self.window.stride.to_string(),
            "fps" => self.window.fps.to_string(),
            "split" => self.split.to_string(),
            "cvcs_velocity" => self.cvcs_velocity.to_string(),
            "lkf_position_noise" => self.lkf.position_noise.to_string(),
            "lkf_velocity_noise" => self.lkf.velocity_noise.to_string(),
            "lkf_observation_noise" => self.lkf.observation_noise.to_string(),
            "lkf_initial_covariance" => self.lkf.initial_covariance.to_string(),
            _ => unreachable!("key list and accessor disagree on `{key}`"),
        }
    }

    /// Parses flat `key=value` lines. Blank lines and `#` comments are
    /// ignored; unknown or repeated keys are errors. Keys not mentioned keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<TrainConfig> {
        let mut config = TrainConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fail = |message: String| Error::Parse { line: line_no, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(fail(format!("duplicate key `{key}`")));
            }
            config.set(key, value).map_err(fail)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainConfig::parse(&text)
    }

    /// Every key with its current value, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _) in CONFIG_KEYS {
            writeln!(out, "{key}={}", self.get(key)).expect("writing to a String cannot fail");
        }
        out
    }

    /// The default configuration with a comment describing each key.
    pub fn documented_defaults() -> String {
        let d = TrainConfig::default();
        let mut out = String::new();
        for (key, doc) in CONFIG_KEYS {
            writeln!(out, "# {doc}\n{key}={}", d.get(key)).expect("writing to a String cannot fail");
        }
        out
    }
}
