use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pedestrian box at one frame: center, width and height in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_center: f32,
    pub y_center: f32,
    pub width: f32,
    pub height: f32,
}

/// Componentwise frame-to-frame change of a [`BoundingBox`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxVelocity {
    pub dx: f32,
    pub dy: f32,
    pub dw: f32,
    pub dh: f32,
}

impl BoundingBox {
    pub const fn new(x_center: f32, y_center: f32, width: f32, height: f32) -> Self {
        BoundingBox {
            x_center,
            y_center,
            width,
            height,
        }
    }

    /// Like [`BoundingBox::new`] but enforces finite coordinates and a
    /// strictly positive size.
    pub fn validated(x_center: f32, y_center: f32, width: f32, height: f32) -> Result<Self> {
        let b = Self::new(x_center, y_center, width, height);
        if !b.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::Validation(format!("non-finite box {b:?}")));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::Validation(format!(
                "box size must be positive, got width {width} height {height}"
            )));
        }
        Ok(b)
    }

    pub fn to_array(self) -> [f32; 4] {
        [self.x_center, self.y_center, self.width, self.height]
    }

    pub fn from_array(a: [f32; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// `(x_min, y_min, x_max, y_max)`.
    pub fn corners(self) -> (f32, f32, f32, f32) {
        let hw = self.width / 2.0;
        let hh = self.height / 2.0;
        (
            self.x_center - hw,
            self.y_center - hh,
            self.x_center + hw,
            self.y_center + hh,
        )
    }

    pub fn translated(self, dx: f32, dy: f32) -> Self {
        Self::new(self.x_center + dx, self.y_center + dy, self.width, self.height)
    }
}

impl Sub for BoundingBox {
    type Output = BoxVelocity;

    fn sub(self, prev: BoundingBox) -> BoxVelocity {
        BoxVelocity {
            dx: self.x_center - prev.x_center,
            dy: self.y_center - prev.y_center,
            dw: self.width - prev.width,
            dh: self.height - prev.height,
        }
    }
}

impl Add<BoxVelocity> for BoundingBox {
    type Output = BoundingBox;

    fn add(self, v: BoxVelocity) -> BoundingBox {
        BoundingBox::new(
            self.x_center + v.dx,
            self.y_center + v.dy,
            self.width + v.dw,
            self.height + v.dh,
        )
    }
}

impl BoxVelocity {
    pub const fn new(dx: f32, dy: f32, dw: f32, dh: f32) -> Self {
        BoxVelocity { dx, dy, dw, dh }
    }

    pub fn to_array(self) -> [f32; 4] {
        [self.dx, self.dy, self.dw, self.dh]
    }

    pub fn from_array(a: [f32; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// Consecutive differences of a box sequence (one shorter than the input).
pub fn derive_velocities(boxes: &[BoundingBox]) -> Vec<BoxVelocity> {
    boxes.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Cumulative addition of velocities starting from `last_box` (which is not
/// itself part of the output).
///
/// Inverts [`derive_velocities`] exactly whenever the coordinate differences
/// are representable in `f32` (e.g. any sub-pixel grid of the image plane).
pub fn integrate_boxes(last_box: BoundingBox, velocities: &[BoxVelocity]) -> Vec<BoundingBox> {
    velocities
        .iter()
        .scan(last_box, |cur, &v| {
            *cur = *cur + v;
            Some(*cur)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntentionLabel {
    NotCrossing = 0,
    Crossing = 1,
}

impl IntentionLabel {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(IntentionLabel::NotCrossing),
            1 => Ok(IntentionLabel::Crossing),
            other => Err(Error::Validation(format!("crossing label {other} is not 0 or 1"))),
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f32(self) -> f32 {
        self as u8 as f32
    }
}

/// One annotated row of the canonical track file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub video_id: String,
    pub frame: u32,
    pub pedestrian_id: String,
    pub bbox: BoundingBox,
    pub label: IntentionLabel,
}

/// A frame-contiguous run of one pedestrian in one video.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub video_id: String,
    pub pedestrian_id: String,
    pub start_frame: u32,
    pub boxes: Vec<BoundingBox>,
    pub labels: Vec<IntentionLabel>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub t_obs: usize,
    pub t_pred: usize,
    pub stride: usize,
    /// Frame rate of the source video. Informational only.
    pub fps: f32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            t_obs: 18,
            t_pred: 18,
            stride: 1,
            fps: 30.0,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_obs < 2 {
            return Err(Error::Config(format!("t_obs must be at least 2, got {}", self.t_obs)));
        }
        if self.t_pred < 1 {
            return Err(Error::Config("t_pred must be at least 1".into()));
        }
        if self.stride < 1 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn span(&self) -> usize {
        self.t_obs + self.t_pred
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub video_id: String,
    pub pedestrian_id: String,
    pub start_frame: u32,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}@{}", self.video_id, self.pedestrian_id, self.start_frame)
    }
}

/// One sample: observed boxes (with their derived velocities) and the future
/// boxes and intention labels to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceWindow {
    pub obs_boxes: Vec<BoundingBox>,
    pub obs_velocities: Vec<BoxVelocity>,
    pub future_boxes: Vec<BoundingBox>,
    pub future_labels: Vec<IntentionLabel>,
    pub provenance: Provenance,
}

impl SequenceWindow {
    pub fn new(
        obs_boxes: Vec<BoundingBox>,
        future_boxes: Vec<BoundingBox>,
        future_labels: Vec<IntentionLabel>,
        provenance: Provenance,
    ) -> Result<Self> {
        if obs_boxes.len() < 2 {
            return Err(Error::Validation("a window needs at least 2 observed boxes".into()));
        }
        if future_boxes.is_empty() || future_boxes.len() != future_labels.len() {
            return Err(Error::Validation(format!(
                "window {provenance}: {} future boxes but {} labels",
                future_boxes.len(),
                future_labels.len()
            )));
        }
        Ok(SequenceWindow {
            obs_velocities: derive_velocities(&obs_boxes),
            obs_boxes,
            future_boxes,
            future_labels,
            provenance,
        })
    }

    pub fn t_obs(&self) -> usize {
        self.obs_boxes.len()
    }

    pub fn t_pred(&self) -> usize {
        self.future_boxes.len()
    }

    pub fn last_box(&self) -> BoundingBox {
        *self.obs_boxes.last().expect("non-empty observation")
    }

    pub fn last_velocity(&self) -> BoxVelocity {
        *self.obs_velocities.last().expect("t_obs >= 2")
    }

    /// Ground-truth velocities of the future segment, the first one taken
    /// relative to the last observed box.
    pub fn future_velocities(&self) -> Vec<BoxVelocity> {
        let mut prev = self.last_box();
        self.future_boxes
            .iter()
            .map(|&b| {
                let v = b - prev;
                prev = b;
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integrate_example() {
        let last = BoundingBox::new(100.0, 200.0, 50.0, 80.0);
        let v = [BoxVelocity::new(2.0, -2.0, 0.0, 2.0), BoxVelocity::new(1.0, 0.0, 1.0, 0.0)];
        assert_eq!(
            integrate_boxes(last, &v),
            vec![
                BoundingBox::new(102.0, 198.0, 50.0, 82.0),
                BoundingBox::new(103.0, 198.0, 51.0, 82.0)
            ]
        );
        assert_eq!(integrate_boxes(last, &[BoxVelocity::default(); 3]), vec![last; 3]);
    }

    #[test]
    fn validated_rejects_degenerate_boxes() {
        assert!(BoundingBox::validated(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::validated(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(BoundingBox::validated(f32::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(BoundingBox::validated(-10.0, 5000.0, 1.0, 1.0).is_ok());
    }

    // Coordinates on a 1/256 px grid within +-4096 px.
    fn grid_coord() -> impl Strategy<Value = f32> {
        (-1_048_576i32..1_048_576).prop_map(|v| v as f32 / 256.0)
    }

    fn grid_box() -> impl Strategy<Value = BoundingBox> {
        (grid_coord(), grid_coord(), 1u32..200_000, 1u32..200_000).prop_map(|(x, y, w, h)| {
            BoundingBox::new(x, y, w as f32 / 256.0, h as f32 / 256.0)
        })
    }

    proptest! {
        #[test]
        fn derive_then_integrate_round_trips(boxes in prop::collection::vec(grid_box(), 2..40)) {
            let v = derive_velocities(&boxes);
            let rebuilt = integrate_boxes(boxes[0], &v);
            prop_assert_eq!(&rebuilt[..], &boxes[1..]);
        }
    }
}
