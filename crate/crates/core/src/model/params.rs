use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::lstm::{CellGrads, Dense, DenseGrads, LstmCellParams};
use crate::data::{BoundingBox, BoxVelocity, SequenceWindow};
use crate::error::{Error, Result};
use crate::kernel::{Matrix, ParamBlock, ParamSet};

/// Fixed affine maps between pixel space and the network's input space.
/// Boxes map as `(b - offset) / scale`, velocities as `v / velocity_scale`,
/// which keeps a zero velocity zero in both spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub box_offset: Vec<f32>,
    pub box_scale: Vec<f32>,
    pub velocity_scale: Vec<f32>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            box_offset: vec![0.0; dim],
            box_scale: vec![1.0; dim],
            velocity_scale: vec![1.0; dim],
        }
    }

    /// Per-component mean/standard deviation of observed boxes and RMS of
    /// observed velocities over `windows`. Degenerate spreads fall back to 1.
    pub fn fit(windows: &[SequenceWindow], dim: usize) -> Self {
        let mut n = Normalizer::identity(dim);
        let boxes: Vec<[f32; 4]> = windows.iter().flat_map(|w| w.obs_boxes.iter().map(|b| b.to_array())).collect();
        let vels: Vec<[f32; 4]> =
            windows.iter().flat_map(|w| w.obs_velocities.iter().map(|v| v.to_array())).collect();
        if boxes.is_empty() {
            return n;
        }
        let spread = |v: f64| if v.is_finite() && v > 1e-6 { v as f32 } else { 1.0 };
        for d in 0..dim {
            let count = boxes.len() as f64;
            let mean = boxes.iter().map(|b| b[d] as f64).sum::<f64>() / count;
            let var = boxes.iter().map(|b| (b[d] as f64 - mean).powi(2)).sum::<f64>() / count;
            n.box_offset[d] = mean as f32;
            n.box_scale[d] = spread(var.sqrt());
            let rms = (vels.iter().map(|v| (v[d] as f64).powi(2)).sum::<f64>() / vels.len().max(1) as f64).sqrt();
            n.velocity_scale[d] = spread(rms);
        }
        n
    }

    pub fn dim(&self) -> usize {
        self.box_offset.len()
    }

    pub fn box_features(&self, b: &BoundingBox) -> Vec<f32> {
        b.to_array()[..self.dim()]
            .iter()
            .enumerate()
            .map(|(d, &v)| (v - self.box_offset[d]) / self.box_scale[d])
            .collect()
    }

    pub fn velocity_features(&self, v: &BoxVelocity) -> Vec<f32> {
        v.to_array()[..self.dim()]
            .iter()
            .enumerate()
            .map(|(d, &x)| x / self.velocity_scale[d])
            .collect()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = [&self.box_offset, &self.box_scale, &self.velocity_scale]
            .iter()
            .all(|v| v.len() == dim && v.iter().all(|x| x.is_finite()))
            && self.box_scale.iter().chain(&self.velocity_scale).all(|&s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("normalizer is not a valid {dim}-dimensional affine map")))
        }
    }
}

/// All learnable weights of the network plus its fixed normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub enc_velocity: LstmCellParams,
    pub enc_position: LstmCellParams,
    pub dec_velocity: LstmCellParams,
    pub dec_intention: LstmCellParams,
    pub out_velocity: Dense,
    pub out_intention: Dense,
    pub intention_embedding: Dense,
    pub normalizer: Normalizer,
}

impl ModelParameters {
    /// All-zero weights. The resulting model predicts zero velocities and
    /// uniform intentions.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (f, h, d) = (config.feature_dim(), config.hidden_size, config.decoder_hidden());
        Ok(ModelParameters {
            config,
            enc_velocity: LstmCellParams::zeros("enc_velocity", f, h),
            enc_position: LstmCellParams::zeros("enc_position", f, h),
            dec_velocity: LstmCellParams::zeros("dec_velocity", f, d),
            dec_intention: LstmCellParams::zeros("dec_intention", f, d),
            out_velocity: Dense::zeros("out_velocity", d, f),
            out_intention: Dense::zeros("out_intention", d, 2),
            intention_embedding: Dense::zeros("intention_embedding", 2, f),
            normalizer: Normalizer::identity(f),
        })
    }

    /// Uniform `±1/sqrt(fan_in)` initialization. Every block is drawn in a
    /// fixed order whatever the task, so ablations sharing a seed start from
    /// identical trunk weights.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (f, h, d) = (config.feature_dim(), config.hidden_size, config.decoder_hidden());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(ModelParameters {
            config,
            enc_velocity: LstmCellParams::init("enc_velocity", f, h, &mut rng),
            enc_position: LstmCellParams::init("enc_position", f, h, &mut rng),
            dec_velocity: LstmCellParams::init("dec_velocity", f, d, &mut rng),
            dec_intention: LstmCellParams::init("dec_intention", f, d, &mut rng),
            out_velocity: Dense::init("out_velocity", d, f, &mut rng),
            out_intention: Dense::init("out_intention", d, 2, &mut rng),
            intention_embedding: Dense::init("intention_embedding", 2, f, &mut rng),
            normalizer: Normalizer::identity(f),
        })
    }

    /// Checks every block against the shapes implied by `config`.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let reference = ModelParameters::zeros(self.config)?;
        for (a, b) in self.blocks().iter().zip(reference.blocks()) {
            if a.name != b.name || a.shape() != b.shape() {
                return Err(Error::Config(format!(
                    "parameter `{}` has shape {:?}, config requires `{}` {:?}",
                    a.name,
                    a.shape(),
                    b.name,
                    b.shape()
                )));
            }
            for m in [&a.grad, &a.adam_m, &a.adam_v] {
                if m.shape() != a.shape() {
                    return Err(Error::Config(format!("optimizer state of `{}` has the wrong shape", a.name)));
                }
            }
        }
        self.normalizer.validate(self.config.feature_dim())
    }

}

impl ParamSet for ModelParameters {
    fn blocks(&self) -> Vec<&ParamBlock> {
        let mut v: Vec<&ParamBlock> = Vec::with_capacity(18);
        for c in [&self.enc_velocity, &self.enc_position, &self.dec_velocity, &self.dec_intention] {
            v.extend(c.blocks());
        }
        for d in [&self.out_velocity, &self.out_intention, &self.intention_embedding] {
            v.extend(d.blocks());
        }
        v
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        let mut v: Vec<&mut ParamBlock> = Vec::with_capacity(18);
        for c in [&mut self.enc_velocity, &mut self.enc_position, &mut self.dec_velocity, &mut self.dec_intention] {
            v.extend(c.blocks_mut());
        }
        for d in [&mut self.out_velocity, &mut self.out_intention, &mut self.intention_embedding] {
            v.extend(d.blocks_mut());
        }
        v
    }
}

/// Gradient buffers mirroring [`ModelParameters`] block for block.
#[derive(Debug, Clone)]
pub(crate) struct ModelGrads {
    pub enc_velocity: CellGrads,
    pub enc_position: CellGrads,
    pub dec_velocity: CellGrads,
    pub dec_intention: CellGrads,
    pub out_velocity: DenseGrads,
    pub out_intention: DenseGrads,
    pub intention_embedding: DenseGrads,
}

impl ModelGrads {
    pub fn zeros_like(p: &ModelParameters) -> Self {
        ModelGrads {
            enc_velocity: CellGrads::zeros_like(&p.enc_velocity),
            enc_position: CellGrads::zeros_like(&p.enc_position),
            dec_velocity: CellGrads::zeros_like(&p.dec_velocity),
            dec_intention: CellGrads::zeros_like(&p.dec_intention),
            out_velocity: DenseGrads::zeros_like(&p.out_velocity),
            out_intention: DenseGrads::zeros_like(&p.out_intention),
            intention_embedding: DenseGrads::zeros_like(&p.intention_embedding),
        }
    }

    /// Matrices in [`ParamSet::blocks`] order.
    pub fn matrices(&self) -> Vec<&Matrix> {
        let mut v = Vec::with_capacity(18);
        for c in [&self.enc_velocity, &self.enc_position, &self.dec_velocity, &self.dec_intention] {
            v.extend(c.matrices());
        }
        for d in [&self.out_velocity, &self.out_intention, &self.intention_embedding] {
            v.extend(d.matrices());
        }
        v
    }

    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = Vec::with_capacity(18);
        for c in [&mut self.enc_velocity, &mut self.enc_position, &mut self.dec_velocity, &mut self.dec_intention] {
            v.extend(c.matrices_mut());
        }
        for d in [&mut self.out_velocity, &mut self.out_intention, &mut self.intention_embedding] {
            v.extend(d.matrices_mut());
        }
        v
    }

    pub fn add(&mut self, other: &ModelGrads) -> Result<()> {
        for (a, b) in self.matrices_mut().into_iter().zip(other.matrices()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    /// Overwrites every block gradient of `params`.
    pub fn store_into(&self, params: &mut ModelParameters) {
        for (block, g) in params.blocks_mut().into_iter().zip(self.matrices()) {
            block.grad = g.clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::{InputFeatures, Task};

    fn small() -> ModelConfig {
        ModelConfig { hidden_size: 8, t_obs: 3, t_pred: 3, ..Default::default() }
    }

    #[test]
    fn shapes_follow_config() {
        let p = ModelParameters::init(small(), 1).unwrap();
        let shape = |name: &str| p.blocks().into_iter().find(|b| b.name == name).unwrap().shape();
        assert_eq!(shape("enc_velocity.input_weights"), (32, 4));
        assert_eq!(shape("enc_position.recurrent_weights"), (32, 8));
        assert_eq!(shape("dec_velocity.recurrent_weights"), (64, 16));
        assert_eq!(shape("dec_intention.bias"), (64, 1));
        assert_eq!(shape("out_velocity.weight"), (4, 16));
        assert_eq!(shape("out_intention.weight"), (2, 16));
        assert_eq!(shape("intention_embedding.weight"), (4, 2));
        assert_eq!(p.blocks().len(), 18);
        p.validate().unwrap();
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let a = ModelParameters::init(small(), 5).unwrap();
        assert_eq!(a, ModelParameters::init(small(), 5).unwrap());
        assert_ne!(a, ModelParameters::init(small(), 6).unwrap());
        let bound = 1.0 / (4.0f32 + 8.0).sqrt();
        assert!(a.enc_velocity.input_weights.value.as_slice().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn trunk_init_is_task_independent() {
        let multi = ModelParameters::init(small(), 3).unwrap();
        let boxes = ModelParameters::init(ModelConfig { task: Task::BoxOnly, ..small() }, 3).unwrap();
        assert_eq!(multi.enc_position, boxes.enc_position);
        assert_eq!(multi.dec_velocity, boxes.dec_velocity);
    }

    #[test]
    fn center_only_shrinks_feature_dim() {
        let c = ModelConfig { input_features: InputFeatures::CenterOnly, ..small() };
        let p = ModelParameters::init(c, 1).unwrap();
        assert_eq!(p.out_velocity.weight.shape(), (2, 16));
        assert_eq!(p.intention_embedding.weight.shape(), (2, 2));
    }

    #[test]
    fn validate_catches_mismatch() {
        let mut p = ModelParameters::init(small(), 1).unwrap();
        p.config.hidden_size = 16;
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }
}
