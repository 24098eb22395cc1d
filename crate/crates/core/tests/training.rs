use pvlstm::data::{BoundingBox, IntentionLabel, Provenance, SequenceWindow};
use pvlstm::kernel::ParamSet;
use pvlstm::model::{batch_loss, ModelConfig, ModelParameters, Task};
use pvlstm::synth::{synthetic_windows, SynthSpec};
use pvlstm::train::{epoch_log_csv, evaluate, fit, train_step, Checkpoint, SchedulerConfig, TrainConfig, Trainer};
use pvlstm::{Error, Execution};

fn small_config(hidden: usize) -> TrainConfig {
    let mut c = TrainConfig::default();
    c.model.hidden_size = hidden;
    c.learning_rate = 1e-3;
    c.batch_size = 8;
    c.epochs = 4;
    c.seed = 3;
    c
}

fn windows(count: usize, seed: u64) -> Vec<SequenceWindow> {
    synthetic_windows(&SynthSpec { count, ..SynthSpec::default() }, seed).unwrap()
}

fn snapshot(p: &ModelParameters, prefixes: &[&str]) -> Vec<Vec<u32>> {
    p.blocks()
        .iter()
        .filter(|b| prefixes.iter().any(|x| b.name.starts_with(x)))
        .map(|b| b.value.as_slice().iter().map(|v| v.to_bits()).collect())
        .collect()
}

const INTENTION: [&str; 3] = ["dec_intention", "out_intention", "intention_embedding"];
const BOX_HEAD: [&str; 2] = ["dec_velocity", "out_velocity"];

#[test]
fn zero_weight_freezes_the_corresponding_head() {
    let w = windows(8, 1);
    for (box_w, int_w, frozen, moving) in
        [(1.0, 0.0, &INTENTION[..], &BOX_HEAD[..]), (0.0, 1.0, &BOX_HEAD[..], &INTENTION[..])]
    {
        let mut c = small_config(8);
        c.loss_weight_box = box_w;
        c.loss_weight_intention = int_w;
        let mut p = ModelParameters::init(c.model, 1).unwrap();
        let (frozen0, moving0) = (snapshot(&p, frozen), snapshot(&p, moving));
        let trunk0 = snapshot(&p, &["enc_"]);
        for _ in 0..5 {
            train_step(&mut p, &w, &c, c.learning_rate, Execution::Sequential).unwrap();
        }
        assert_eq!(snapshot(&p, frozen), frozen0);
        assert_ne!(snapshot(&p, moving), moving0);
        assert_ne!(snapshot(&p, &["enc_"]), trunk0);
    }
}

#[test]
fn repeated_steps_on_one_batch_decrease_the_loss() {
    let w = windows(8, 2);
    let c = small_config(16);
    let mut p = ModelParameters::init(c.model, 2).unwrap();
    let losses: Vec<f64> = (0..50)
        .map(|_| train_step(&mut p, &w, &c, 1e-3, Execution::Sequential).unwrap().total)
        .collect();
    let rises = losses.windows(2).filter(|p| p[1] > p[0]).count();
    assert!(rises <= 5, "{rises} increases: {losses:?}");
    assert!(losses[49] < losses[0]);
}

#[test]
fn single_epoch_single_batch() {
    let w = windows(8, 3);
    let mut c = small_config(8);
    c.epochs = 1;
    let mut t = Trainer::new(&c, &w, Execution::Sequential).unwrap();
    let log = t.fit(&w, &w[..2]).unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(log[0].epoch, 1);
    assert!(t.state.scheduler.best.is_finite());
    assert_eq!(t.state.scheduler.bad_epochs, 0);
    assert_eq!(epoch_log_csv(&log).lines().count(), 2);
}

#[test]
fn runs_are_deterministic_and_thread_independent() {
    let w = windows(20, 4);
    let c = small_config(8);
    let (p1, l1) = fit(&w, &w[..4], &c, Execution::Sequential).unwrap();
    let (p2, l2) = fit(&w, &w[..4], &c, Execution::Sequential).unwrap();
    let (p3, l3) = fit(&w, &w[..4], &c, Execution::Parallel).unwrap();
    assert_eq!(epoch_log_csv(&l1), epoch_log_csv(&l2));
    assert_eq!(epoch_log_csv(&l1), epoch_log_csv(&l3));
    assert_eq!(p1, p2);
    assert_eq!(p1, p3);
}

#[test]
fn resume_continues_an_interrupted_run_exactly() {
    let w = windows(24, 5);
    let (train, val) = w.split_at(20);
    let mut c = small_config(8);
    c.epochs = 6;
    c.normalize = true;
    c.scheduler = SchedulerConfig { patience: 0, ..SchedulerConfig::default() };

    let mut straight = Trainer::new(&c, train, Execution::Sequential).unwrap();
    let full = straight.fit(train, val).unwrap();

    let mut first = Trainer::new(&c, train, Execution::Sequential).unwrap();
    let mut log = Vec::new();
    for _ in 0..3 {
        log.push(first.run_epoch(train, val).unwrap());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.ckpt");
    first.checkpoint().save(&path).unwrap();
    let mut second = Trainer::resume(&c, Checkpoint::load(&path).unwrap(), Execution::Sequential).unwrap();
    log.extend(second.fit(train, val).unwrap());

    assert_eq!(epoch_log_csv(&log), epoch_log_csv(&full));
    assert_eq!(second.params, straight.params);
    assert_eq!(second.state, straight.state);
}

#[test]
fn zero_model_on_constant_boxes_has_zero_ade() {
    let b = BoundingBox::new(100.0, 200.0, 30.0, 70.0);
    let w: Vec<SequenceWindow> = (0..5)
        .map(|_| SequenceWindow::new(vec![b; 18], vec![b; 18], vec![IntentionLabel::Crossing; 18], Provenance::default()))
        .collect::<Result<_, _>>()
        .unwrap();
    let p = ModelParameters::zeros(ModelConfig { hidden_size: 4, ..ModelConfig::default() }).unwrap();
    let r = evaluate(&p, &w, Execution::Sequential).unwrap();
    assert_eq!(r.ade, Some(0.0));
    assert_eq!(r.fde, Some(0.0));
    assert_eq!(r.aiou, Some(1.0));
    assert_eq!(r, evaluate(&p, &w, Execution::Parallel).unwrap());
}

#[test]
fn failure_modes() {
    let c = small_config(4);
    assert!(matches!(fit(&[], &[], &c, Execution::Sequential), Err(Error::Validation(_))));

    let w = windows(3, 6);
    let mut p = ModelParameters::init(c.model, 0).unwrap();
    p.blocks_mut()[0].value.as_mut_slice()[0] = f32::NAN;
    match train_step(&mut p, &w, &c, 1e-3, Execution::Sequential) {
        Err(Error::NonFiniteLoss(ids)) => assert!(ids.contains(&w[2].provenance.to_string()), "{ids}"),
        other => panic!("{other:?}"),
    }

    let mut wrong = c.clone();
    wrong.model.hidden_size = 5;
    let ck = Trainer::new(&c, &w, Execution::Sequential).unwrap().checkpoint();
    assert!(matches!(Trainer::resume(&wrong, ck, Execution::Sequential), Err(Error::Config(_))));
}

#[test]
fn box_only_task_logs_zero_intention_loss() {
    let w = windows(8, 7);
    let mut c = small_config(8);
    c.model.task = Task::BoxOnly;
    c.epochs = 2;
    let (_, log) = fit(&w, &w[..2], &c, Execution::Sequential).unwrap();
    assert!(log.iter().all(|r| r.loss_intention == 0.0 && r.validation.intention_accuracy_all.is_none()));
    assert!(epoch_log_csv(&log).lines().nth(1).unwrap().split(',').nth(3) == Some("0.000000"));
}

#[test]
fn overfit_run_reaches_low_training_ade() {
    let w = windows(32, 1);
    let mut c = small_config(64);
    c.batch_size = 128;
    c.epochs = 300;
    c.normalize = true;
    let (p, _) = fit(&w, &[], &c, Execution::default()).unwrap();
    let loss = batch_loss(&p, &w, &c.loss_weights(), Execution::default()).unwrap();
    let r = evaluate(&p, &w, Execution::default()).unwrap();
    assert!(loss.box_loss < 1.0, "{loss:?}");
    assert_eq!(r.intention_accuracy_all, Some(1.0));
    assert!(r.ade.unwrap() < 2.0, "{r}");
}
