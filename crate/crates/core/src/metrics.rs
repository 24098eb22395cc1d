//! Displacement, overlap and intention-accuracy metrics.

use std::fmt::{self, Write as _};

use crate::data::{BoundingBox, IntentionLabel, SequenceWindow};
use crate::error::{Error, Result};
use crate::exec::Execution;

fn check_lengths(what: &str, pred: usize, gt: usize) -> Result<()> {
    if pred != gt || pred == 0 {
        return Err(Error::Validation(format!(
            "{what}: prediction has {pred} steps, ground truth has {gt} (need equal and at least 1)"
        )));
    }
    Ok(())
}

fn center_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let dx = a.x_center as f64 - b.x_center as f64;
    let dy = a.y_center as f64 - b.y_center as f64;
    dx.hypot(dy)
}

/// Mean and final Euclidean distance between box centers of one sequence.
pub fn displacement_errors(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<(f64, f64)> {
    check_lengths("displacement_errors", pred.len(), gt.len())?;
    let d: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| center_distance(p, g)).collect();
    Ok((d.iter().sum::<f64>() / d.len() as f64, *d.last().expect("non-empty")))
}

/// Intersection over union of two center/size boxes; 0 when disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let corners = |bx: &BoundingBox| {
        let (hw, hh) = (bx.width as f64 / 2.0, bx.height as f64 / 2.0);
        let (x, y) = (bx.x_center as f64, bx.y_center as f64);
        (x - hw, y - hh, x + hw, y + hh)
    };
    let (ax0, ay0, ax1, ay1) = corners(a);
    let (bx0, by0, bx1, by1) = corners(b);
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Mean and final-step IOU of one sequence.
pub fn iou_series(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<(f64, f64)> {
    check_lengths("iou_series", pred.len(), gt.len())?;
    let v: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| iou(p, g)).collect();
    Ok((v.iter().sum::<f64>() / v.len() as f64, *v.last().expect("non-empty")))
}

/// Which future steps count towards intention accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyMode {
    AllSteps,
    FirstStep,
}

/// Arg-max of `[p(not crossing), p(crossing)]`; ties go to not crossing.
pub fn predicted_label(probs: [f32; 2]) -> IntentionLabel {
    if probs[1] > probs[0] {
        IntentionLabel::Crossing
    } else {
        IntentionLabel::NotCrossing
    }
}

/// Fraction of correctly classified steps (or first steps) over a batch.
pub fn intention_accuracy(pred: &[Vec<[f32; 2]>], gt: &[Vec<IntentionLabel>], mode: AccuracyMode) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::Validation(format!(
            "intention_accuracy: {} predicted sequences, {} labelled",
            pred.len(),
            gt.len()
        )));
    }
    let mut correct = 0usize;
    let mut total = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        check_lengths("intention_accuracy", p.len(), g.len())?;
        let steps = match mode {
            AccuracyMode::AllSteps => p.len(),
            AccuracyMode::FirstStep => 1,
        };
        correct += p[..steps].iter().zip(g).filter(|(p, g)| predicted_label(**p) == **g).count();
        total += steps;
    }
    Ok(correct as f64 / total as f64)
}

/// Aggregate metrics over a set of windows. Box metrics are averaged per
/// sample first, then over samples with equal weight. Metrics for a head that
/// was not evaluated are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub ade: Option<f64>,
    pub fde: Option<f64>,
    pub aiou: Option<f64>,
    pub fiou: Option<f64>,
    pub intention_accuracy_all: Option<f64>,
    pub intention_accuracy_first: Option<f64>,
    pub sample_count: usize,
}

const KEYS: [&str; 7] = [
    "ade",
    "fde",
    "aiou",
    "fiou",
    "intention_accuracy_all",
    "intention_accuracy_first",
    "sample_count",
];

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"))
}

impl MetricsReport {
    /// Scores predictions against the windows' ground truth.
    pub fn compute(
        windows: &[SequenceWindow],
        boxes: Option<&[Vec<BoundingBox>]>,
        intentions: Option<&[Vec<[f32; 2]>]>,
        exec: Execution,
    ) -> Result<MetricsReport> {
        let mut report = MetricsReport {
            sample_count: windows.len(),
            ..MetricsReport::default()
        };
        if windows.is_empty() {
            return Ok(report);
        }
        if let Some(boxes) = boxes {
            if boxes.len() != windows.len() {
                return Err(Error::Validation(format!(
                    "{} box predictions for {} windows",
                    boxes.len(),
                    windows.len()
                )));
            }
            let pairs: Vec<(&Vec<BoundingBox>, &SequenceWindow)> = boxes.iter().zip(windows).collect();
            let per_sample = exec.map(&pairs, |(p, w)| -> Result<[f64; 4]> {
                let (ade, fde) = displacement_errors(p, &w.future_boxes)?;
                let (aiou, fiou) = iou_series(p, &w.future_boxes)?;
                Ok([ade, fde, aiou, fiou])
            });
            let mut sums = [0.0f64; 4];
            for s in per_sample {
                for (acc, v) in sums.iter_mut().zip(s?) {
                    *acc += v;
                }
            }
            let n = windows.len() as f64;
            report.ade = Some(sums[0] / n);
            report.fde = Some(sums[1] / n);
            report.aiou = Some(sums[2] / n);
            report.fiou = Some(sums[3] / n);
        }
        if let Some(probs) = intentions {
            let labels: Vec<Vec<IntentionLabel>> = windows.iter().map(|w| w.future_labels.clone()).collect();
            report.intention_accuracy_all = Some(intention_accuracy(probs, &labels, AccuracyMode::AllSteps)?);
            report.intention_accuracy_first = Some(intention_accuracy(probs, &labels, AccuracyMode::FirstStep)?);
        }
        Ok(report)
    }

    fn values(&self) -> [String; 7] {
        [
            show(self.ade),
            show(self.fde),
            show(self.aiou),
            show(self.fiou),
            show(self.intention_accuracy_all),
            show(self.intention_accuracy_first),
            self.sample_count.to_string(),
        ]
    }

    /// One `key=value` line per metric.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(self.values()) {
            writeln!(out, "{k}={v}").expect("writing to a String cannot fail");
        }
        out
    }

    pub fn csv_header() -> String {
        KEYS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values().join(",")
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_key_value())
    }
}
