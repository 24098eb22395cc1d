use pvlstm::baselines::{cvcs_predict, lkf_fit_predict, Baseline, CvcsVelocity, LkfConfig};
use pvlstm::data::BoundingBox;
use pvlstm::metrics::{displacement_errors, MetricsReport};
use pvlstm::synth::{synthetic_windows, Motion, SynthSpec};
use pvlstm::Execution;

fn constant_velocity(count: usize, noise: f32, seed: u64) -> Vec<pvlstm::data::SequenceWindow> {
    let spec = SynthSpec {
        count,
        motion: Motion::ConstantVelocity,
        noise_sigma: noise,
        ..SynthSpec::default()
    };
    synthetic_windows(&spec, seed).unwrap()
}

#[test]
fn cvcs_is_exact_on_noiseless_constant_velocity() {
    let w = constant_velocity(200, 0.0, 1);
    let boxes = Baseline::Cvcs(CvcsVelocity::Mean).predict_all(&w, Execution::default()).unwrap();
    let r = MetricsReport::compute(&w, Some(&boxes), None, Execution::Sequential).unwrap();
    assert_eq!(r.ade, Some(0.0));
    assert_eq!(r.fde, Some(0.0));
    assert_eq!(r.aiou, Some(1.0));
}

#[test]
fn lkf_and_cvcs_agree_on_noiseless_tracks() {
    for t_obs in [8, 18] {
        let spec = SynthSpec { count: 50, t_obs, motion: Motion::ConstantVelocity, ..SynthSpec::default() };
        for w in synthetic_windows(&spec, 2).unwrap() {
            let a = cvcs_predict(&w, CvcsVelocity::Mean).unwrap();
            let b = lkf_fit_predict(&w, &LkfConfig::default()).unwrap();
            for (p, q) in a.iter().zip(&b) {
                for (x, y) in p.to_array().into_iter().zip(q.to_array()) {
                    assert!((x - y).abs() < 0.1, "t_obs={t_obs}: {p:?} vs {q:?}");
                }
            }
        }
    }
}

#[test]
fn lkf_beats_repeating_the_last_noisy_observation() {
    let w = constant_velocity(1000, 2.0, 3);
    let lkf = Baseline::Lkf(LkfConfig::default()).predict_all(&w, Execution::default()).unwrap();
    let mut sum_lkf = 0.0;
    let mut sum_repeat = 0.0;
    for (win, pred) in w.iter().zip(&lkf) {
        let repeat: Vec<BoundingBox> = vec![win.last_box(); win.t_pred()];
        sum_lkf += displacement_errors(pred, &win.future_boxes).unwrap().0;
        sum_repeat += displacement_errors(&repeat, &win.future_boxes).unwrap().0;
    }
    assert!(sum_lkf < sum_repeat, "lkf {} vs repeat {}", sum_lkf / 1000.0, sum_repeat / 1000.0);
}

#[test]
fn parallel_prediction_matches_sequential() {
    let w = constant_velocity(64, 2.0, 4);
    let b = Baseline::Lkf(LkfConfig::default());
    assert_eq!(b.predict_all(&w, Execution::Sequential).unwrap(), b.predict_all(&w, Execution::Parallel).unwrap());
}
