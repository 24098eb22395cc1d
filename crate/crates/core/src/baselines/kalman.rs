use nalgebra::{SMatrix, SVector};

use crate::data::{BoundingBox, SequenceWindow};
use crate::error::{Error, Result};

type Vec8 = SVector<f64, 8>;
type Mat8 = SMatrix<f64, 8, 8>;
type Vec4 = SVector<f64, 4>;
type Mat4 = SMatrix<f64, 4, 4>;
type Obs = SMatrix<f64, 4, 8>;

/// Noise parameters of the constant-velocity box filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkfConfig {
    /// Process noise variance on x, y, w, h.
    pub position_noise: f64,
    /// Process noise variance on the four velocity components.
    pub velocity_noise: f64,
    pub observation_noise: f64,
    /// Diagonal of the initial state covariance.
    pub initial_covariance: f64,
}

impl Default for LkfConfig {
    fn default() -> Self {
        LkfConfig {
            position_noise: 0.01,
            velocity_noise: 1.0,
            observation_noise: 1.0,
            initial_covariance: 10.0,
        }
    }
}

impl LkfConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.position_noise) && ok(self.velocity_noise))
            || !(self.observation_noise.is_finite() && self.observation_noise > 0.0)
            || !(self.initial_covariance.is_finite() && self.initial_covariance > 0.0)
        {
            return Err(Error::Config(format!("invalid Kalman noise parameters {self:?}")));
        }
        Ok(())
    }
}

/// State `(x, y, w, h, dx, dy, dw, dh)` and its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: Vec8,
    pub covariance: Mat8,
}

impl KalmanState {
    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::new(self.mean[0] as f32, self.mean[1] as f32, self.mean[2] as f32, self.mean[3] as f32)
    }

    /// Largest absolute entry of `Σ - Σᵀ`.
    pub fn asymmetry(&self) -> f64 {
        (self.covariance - self.covariance.transpose()).abs().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.covariance.symmetric_eigen().eigenvalues.min()
    }
}

/// Linear Kalman filter with unit-timestep constant-velocity dynamics.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    transition: Mat8,
    process: Mat8,
    observation: Obs,
    measurement: Mat4,
    state: KalmanState,
}

fn symmetrize(m: &Mat8) -> Mat8 {
    (m + m.transpose()) * 0.5
}

impl KalmanFilter {
    /// Starts at `first` with zero velocity.
    pub fn new(first: BoundingBox, config: &LkfConfig) -> Result<Self> {
        config.validate()?;
        let mut transition = Mat8::identity();
        for i in 0..4 {
            transition[(i, i + 4)] = 1.0;
        }
        let mut q = Vec8::zeros();
        for i in 0..4 {
            q[i] = config.position_noise;
            q[i + 4] = config.velocity_noise;
        }
        let mut observation = Obs::zeros();
        for i in 0..4 {
            observation[(i, i)] = 1.0;
        }
        let mut mean = Vec8::zeros();
        for (i, v) in first.to_array().into_iter().enumerate() {
            mean[i] = v as f64;
        }
        Ok(KalmanFilter {
            transition,
            process: Mat8::from_diagonal(&q),
            observation,
            measurement: Mat4::identity() * config.observation_noise,
            state: KalmanState {
                mean,
                covariance: Mat8::identity() * config.initial_covariance,
            },
        })
    }

    pub fn state(&self) -> &KalmanState {
        &self.state
    }

    pub fn predict(&mut self) {
        let f = &self.transition;
        self.state.mean = f * self.state.mean;
        self.state.covariance = symmetrize(&(f * self.state.covariance * f.transpose() + self.process));
    }

    pub fn update(&mut self, observed: BoundingBox) -> Result<()> {
        let z = Vec4::from_iterator(observed.to_array().into_iter().map(f64::from));
        let h = &self.observation;
        let p = &self.state.covariance;
        let innovation = z - h * self.state.mean;
        let s = h * p * h.transpose() + self.measurement;
        let chol = s.cholesky().ok_or_else(|| {
            Error::Numerical(format!(
                "innovation covariance is not positive definite (diagonal {:?})",
                s.diagonal().as_slice()
            ))
        })?;
        // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ since S and P are symmetric.
        let gain = chol.solve(&(h * p)).transpose();
        self.state.mean += gain * innovation;
        // Joseph form keeps the covariance positive semi-definite.
        let i_kh = Mat8::identity() - gain * h;
        let updated = i_kh * p * i_kh.transpose() + gain * self.measurement * gain.transpose();
        self.state.covariance = symmetrize(&updated);
        Ok(())
    }
}

/// Filters the observed boxes, then rolls the dynamics forward `t_pred`
/// steps without updates.
pub fn lkf_fit_predict(window: &SequenceWindow, config: &LkfConfig) -> Result<Vec<BoundingBox>> {
    let mut filter = KalmanFilter::new(window.obs_boxes[0], config)?;
    filter.update(window.obs_boxes[0])?;
    for &b in &window.obs_boxes[1..] {
        filter.predict();
        filter.update(b)?;
    }
    Ok((0..window.t_pred())
        .map(|_| {
            filter.predict();
            filter.state().bounding_box()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{IntentionLabel, Provenance};

    fn line(t_obs: usize, t_pred: usize, v: (f32, f32)) -> SequenceWindow {
        let at = |k: usize| BoundingBox::new(100.0 + v.0 * k as f32, 200.0 + v.1 * k as f32, 30.0, 80.0);
        SequenceWindow::new(
            (0..t_obs).map(at).collect(),
            (t_obs..t_obs + t_pred).map(at).collect(),
            vec![IntentionLabel::Crossing; t_pred],
            Provenance::default(),
        )
        .unwrap()
    }

    fn max_error(pred: &[BoundingBox], truth: &[BoundingBox]) -> f32 {
        pred.iter()
            .zip(truth)
            .flat_map(|(p, t)| p.to_array().into_iter().zip(t.to_array()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f32::max)
    }

    #[test]
    fn noiseless_line_is_continued() {
        for t_obs in [8, 12, 18] {
            let w = line(t_obs, 18, (2.0, -1.5));
            let p = lkf_fit_predict(&w, &LkfConfig::default()).unwrap();
            assert!(max_error(&p, &w.future_boxes) < 0.1, "t_obs={t_obs}: {}", max_error(&p, &w.future_boxes));
        }
    }

    #[test]
    fn stationary_track_stays_put() {
        let w = line(8, 10, (0.0, 0.0));
        let p = lkf_fit_predict(&w, &LkfConfig::default()).unwrap();
        assert!(max_error(&p, &w.future_boxes) < 0.1);
    }

    #[test]
    fn covariance_stays_symmetric_and_psd() {
        let w = line(18, 1, (3.0, 1.0));
        let cfg = LkfConfig::default();
        let mut f = KalmanFilter::new(w.obs_boxes[0], &cfg).unwrap();
        f.update(w.obs_boxes[0]).unwrap();
        for &b in &w.obs_boxes[1..] {
            f.predict();
            assert!(f.state().asymmetry() < 1e-6);
            assert!(f.state().min_eigenvalue() >= -1e-9);
            f.update(b).unwrap();
            assert!(f.state().asymmetry() < 1e-6);
            assert!(f.state().min_eigenvalue() >= -1e-9);
        }
    }

    #[test]
    fn rejects_invalid_noise() {
        let cfg = LkfConfig {
            observation_noise: 0.0,
            ..LkfConfig::default()
        };
        assert!(matches!(KalmanFilter::new(BoundingBox::new(0.0, 0.0, 1.0, 1.0), &cfg), Err(Error::Config(_))));
    }
}
