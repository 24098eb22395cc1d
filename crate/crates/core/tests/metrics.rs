use proptest::prelude::*;
use pvlstm::data::{BoundingBox, IntentionLabel, Provenance, SequenceWindow};
use pvlstm::metrics::{iou, MetricsReport};
use pvlstm::Execution;

/// Area fractions by counting cell centers of a square grid with the given
/// pitch over the union's bounding rectangle.
fn raster_iou(a: &BoundingBox, b: &BoundingBox, pitch: f64) -> f64 {
    let bounds = |x: &BoundingBox| {
        let (hw, hh) = (x.width as f64 / 2.0, x.height as f64 / 2.0);
        (x.x_center as f64 - hw, x.y_center as f64 - hh, x.x_center as f64 + hw, x.y_center as f64 + hh)
    };
    let (a, b) = (bounds(a), bounds(b));
    let inside = |r: (f64, f64, f64, f64), x: f64, y: f64| x >= r.0 && x < r.2 && y >= r.1 && y < r.3;
    let (x0, y0) = (a.0.min(b.0), a.1.min(b.1));
    let nx = ((a.2.max(b.2) - x0) / pitch).round() as usize;
    let ny = ((a.3.max(b.3) - y0) / pitch).round() as usize;
    let (mut inter, mut union) = (0u64, 0u64);
    for i in 0..nx {
        let x = x0 + (i as f64 + 0.5) * pitch;
        for j in 0..ny {
            let y = y0 + (j as f64 + 0.5) * pitch;
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    inter as f64 / union as f64
}

#[test]
fn iou_matches_rasterization() {
    let a = BoundingBox::new(0.0, 0.0, 2.0, 2.0);
    let b = BoundingBox::new(1.0, 1.0, 2.0, 2.0);
    let oracle = raster_iou(&a, &b, 1e-3);
    assert!((iou(&a, &b) - oracle).abs() < 1e-3, "{} vs {oracle}", iou(&a, &b));
    assert!((oracle - 1.0 / 7.0).abs() < 1e-3);
    let c = BoundingBox::new(0.5, -0.25, 3.0, 1.5);
    assert!((iou(&a, &c) - raster_iou(&a, &c, 1e-2)).abs() < 1e-2);
}

fn grid_box() -> impl Strategy<Value = BoundingBox> {
    (-400i32..400, -400i32..400, 4i32..200, 4i32..200)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x as f32 / 4.0, y as f32 / 4.0, w as f32 / 4.0, h as f32 / 4.0))
}

fn shift(b: &BoundingBox) -> BoundingBox {
    b.translated(1000.0, 1000.0)
}

proptest! {
    #[test]
    fn metrics_are_translation_invariant(
        seqs in prop::collection::vec(
            (prop::collection::vec(grid_box(), 6), prop::collection::vec(grid_box(), 3), prop::collection::vec(0u8..2, 3)),
            1..8,
        )
    ) {
        let mut windows = Vec::new();
        let mut shifted = Vec::new();
        let mut preds = Vec::new();
        let mut shifted_preds = Vec::new();
        let mut probs = Vec::new();
        for (boxes, pred, labels) in &seqs {
            let labels: Vec<IntentionLabel> = labels.iter().map(|&l| IntentionLabel::from_u8(l).unwrap()).collect();
            let make = |bs: Vec<BoundingBox>| {
                SequenceWindow::new(bs[..3].to_vec(), bs[3..].to_vec(), labels.clone(), Provenance::default()).unwrap()
            };
            windows.push(make(boxes.clone()));
            shifted.push(make(boxes.iter().map(shift).collect()));
            preds.push(pred.clone());
            shifted_preds.push(pred.iter().map(shift).collect::<Vec<_>>());
            probs.push(vec![[0.3, 0.7], [0.6, 0.4], [0.5, 0.5]]);
        }
        let a = MetricsReport::compute(&windows, Some(&preds), Some(&probs), Execution::Sequential).unwrap();
        let b = MetricsReport::compute(&shifted, Some(&shifted_preds), Some(&probs), Execution::Sequential).unwrap();
        prop_assert_eq!(a, b);
    }
}
