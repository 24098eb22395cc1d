//! Seeded synthetic pedestrian tracks for tests, benchmarks and demos.
//!
//! Every coordinate is rounded to a 1/256 px grid, so sums and differences
//! of boxes are exact in `f32` and constant-velocity tracks are reproduced
//! exactly by integer-step extrapolation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{windows_for_track, BoundingBox, IntentionLabel, Provenance, SequenceWindow, Track, WindowConfig};
use crate::error::{Error, Result};

const GRID: f32 = 256.0;

fn snap(v: f32) -> f32 {
    (v * GRID).round() / GRID
}

fn snap_box(b: BoundingBox) -> BoundingBox {
    BoundingBox::new(snap(b.x_center), snap(b.y_center), snap(b.width.max(1.0)), snap(b.height.max(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    ConstantVelocity,
    /// Constant drift plus a sinusoidal oscillation of the center.
    Sinusoid,
    /// Alternates the two kinds.
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Number of tracks, each exactly one window long.
    pub count: usize,
    pub t_obs: usize,
    pub t_pred: usize,
    pub motion: Motion,
    /// Tracks are spread evenly over this many videos.
    pub videos: usize,
    /// Standard deviation of each video's camera velocity in px/frame; the
    /// resulting offset is added to every box of that video.
    pub camera_drift: f32,
    /// Standard deviation of i.i.d. Gaussian noise on every box coordinate.
    pub noise_sigma: f32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            count: 32,
            t_obs: 18,
            t_pred: 18,
            motion: Motion::Mixed,
            videos: 4,
            camera_drift: 0.0,
            noise_sigma: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn window_config(&self) -> WindowConfig {
        WindowConfig {
            t_obs: self.t_obs,
            t_pred: self.t_pred,
            ..WindowConfig::default()
        }
    }
}

fn normal(sigma: f32) -> Result<Normal<f32>> {
    Normal::new(0.0, sigma.max(0.0)).map_err(|e| Error::Config(format!("invalid standard deviation {sigma}: {e}")))
}

/// Generates `spec.count` tracks. Labels are constant per track: crossing iff
/// the net x displacement over the whole track is positive.
pub fn synthetic_tracks(spec: &SynthSpec, seed: u64) -> Result<Vec<Track>> {
    spec.window_config().validate()?;
    if spec.videos == 0 {
        return Err(Error::Config("videos must be at least 1".into()));
    }
    let span = spec.t_obs + spec.t_pred;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = normal(spec.noise_sigma)?;
    let drift = normal(spec.camera_drift)?;
    let cameras: Vec<(f32, f32, f32, f32)> = (0..spec.videos)
        .map(|_| {
            let (ox, oy) = if spec.camera_drift > 0.0 {
                (rng.random_range(-400.0..400.0), rng.random_range(-150.0..150.0))
            } else {
                (0.0, 0.0)
            };
            (ox, oy, drift.sample(&mut rng), drift.sample(&mut rng))
        })
        .collect();

    let mut tracks = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let video = i * spec.videos / spec.count.max(1);
        let (ox, oy, cvx, cvy) = cameras[video];
        let sinusoid = match spec.motion {
            Motion::ConstantVelocity => false,
            Motion::Sinusoid => true,
            Motion::Mixed => i % 2 == 1,
        };
        let x0 = snap(rng.random_range(300.0..1600.0));
        let y0 = snap(rng.random_range(400.0..700.0));
        let w = snap(rng.random_range(20.0..60.0));
        let h = snap(w * 2.5);
        let speed = snap(rng.random_range(0.5..4.0)) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let vy = snap(rng.random_range(-1.0..1.0));
        let (amp, omega, phase) =
            (rng.random_range(2.0..10.0f32), rng.random_range(0.15..0.45f32), rng.random_range(0.0..6.28f32));

        let mut boxes = Vec::with_capacity(span);
        for k in 0..span {
            let t = k as f32;
            let mut x = x0 + speed * t;
            if sinusoid {
                x += amp * ((omega * t + phase).sin() - phase.sin());
            }
            let y = y0 + vy * t;
            let mut b = BoundingBox::new(x + ox + cvx * t, y + oy + cvy * t, w, h);
            if spec.noise_sigma > 0.0 {
                b = BoundingBox::new(
                    b.x_center + noise.sample(&mut rng),
                    b.y_center + noise.sample(&mut rng),
                    b.width + noise.sample(&mut rng),
                    b.height + noise.sample(&mut rng),
                );
            }
            boxes.push(snap_box(b));
        }
        let label = if boxes[span - 1].x_center - boxes[0].x_center > 0.0 {
            IntentionLabel::Crossing
        } else {
            IntentionLabel::NotCrossing
        };
        tracks.push(Track {
            video_id: format!("video_{video}"),
            pedestrian_id: format!("ped_{i}"),
            start_frame: 0,
            labels: vec![label; span],
            boxes,
        });
    }
    Ok(tracks)
}

/// One window per generated track.
pub fn synthetic_windows(spec: &SynthSpec, seed: u64) -> Result<Vec<SequenceWindow>> {
    let config = spec.window_config();
    Ok(synthetic_tracks(spec, seed)?.iter().flat_map(|t| windows_for_track(t, &config)).collect())
}

/// Small jittered tracks with coordinates of order one pixel and mixed
/// labels. Used for finite-difference gradient checks, where large pixel
/// values would drown the central differences in `f32` rounding noise.
pub fn unit_scale_windows(count: usize, t_obs: usize, t_pred: usize, seed: u64) -> Result<Vec<SequenceWindow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut b = BoundingBox::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0, 2.0);
            let (vx, vy) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            let mut boxes = Vec::with_capacity(t_obs + t_pred);
            for _ in 0..t_obs + t_pred {
                boxes.push(b);
                b = BoundingBox::new(
                    b.x_center + vx + rng.random_range(-0.05..0.05),
                    b.y_center + vy,
                    b.width + rng.random_range(-0.05..0.05),
                    b.height,
                );
            }
            let future = boxes.split_off(t_obs);
            let labels = (0..t_pred)
                .map(|k| if (i + k) % 3 == 0 { IntentionLabel::Crossing } else { IntentionLabel::NotCrossing })
                .collect();
            SequenceWindow::new(boxes, future, labels, Provenance::default())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let spec = SynthSpec::default();
        let a = synthetic_windows(&spec, 3).unwrap();
        assert_eq!(a.len(), 32);
        assert_eq!(a, synthetic_windows(&spec, 3).unwrap());
        assert_ne!(a, synthetic_windows(&spec, 4).unwrap());
        assert!(a.iter().all(|w| w.t_obs() == 18 && w.t_pred() == 18));
    }

    #[test]
    fn labels_follow_net_x_displacement() {
        for w in synthetic_windows(&SynthSpec::default(), 1).unwrap() {
            let net = w.future_boxes.last().unwrap().x_center - w.obs_boxes[0].x_center;
            let expected = if net > 0.0 { IntentionLabel::Crossing } else { IntentionLabel::NotCrossing };
            assert!(w.future_labels.iter().all(|&l| l == expected));
        }
    }

    #[test]
    fn constant_velocity_steps_are_exact() {
        let spec = SynthSpec {
            motion: Motion::ConstantVelocity,
            ..SynthSpec::default()
        };
        for w in synthetic_windows(&spec, 9).unwrap() {
            let v = w.obs_velocities[0];
            assert!(w.obs_velocities.iter().all(|&u| u == v));
            assert!(w.future_velocities().iter().all(|&u| u == v));
        }
    }

    #[test]
    fn videos_partition_tracks() {
        let tracks = synthetic_tracks(&SynthSpec::default(), 0).unwrap();
        assert_eq!(tracks[0].video_id, "video_0");
        assert_eq!(tracks[31].video_id, "video_3");
    }
}
