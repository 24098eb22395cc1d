use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pvlstm::baselines::Baseline;
use pvlstm::data::{
    build_windows_with, carve_validation, load_tracks, load_windows, read_windows_shape, split_by_video, write_tracks,
    write_windows, LabeledWindow, SequenceWindow, Split, Track,
};
use pvlstm::kernel::{grad_check, GradCheckOptions, ParamSet};
use pvlstm::metrics::MetricsReport;
use pvlstm::model::{batch_loss, batch_loss_and_gradients, LossWeights, ModelConfig, ModelParameters};
use pvlstm::synth::{synthetic_tracks, unit_scale_windows, Motion, SynthSpec};
use pvlstm::train::{epoch_log_csv, evaluate, write_atomic, Checkpoint, TrainConfig, Trainer, EPOCH_LOG_HEADER};
use pvlstm::Execution;

use crate::{BaselineArg, MotionArg, SplitArg};

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(TrainConfig::default()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn windows(tracks: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let config = load_config(config)?;
    let tracks = load_tracks(tracks).with_context(|| format!("reading tracks {}", tracks.display()))?;
    let (train, test) = split_by_video(&tracks, config.split)?;
    let exec = Execution::default();
    let mut labeled = Vec::new();
    let mut counts = Vec::new();
    for (split, part) in [(Split::Train, &train), (Split::Test, &test)] {
        let windows = build_windows_with(part, &config.window, exec)?;
        counts.push(windows.len());
        labeled.extend(windows.into_iter().map(|window| LabeledWindow { split, window }));
    }
    let mut bytes = Vec::new();
    write_windows(&mut bytes, &labeled, (config.window.t_obs, config.window.t_pred))?;
    write_file(out, &bytes)?;
    println!("train_windows={}", counts[0]);
    println!("test_windows={}", counts[1]);
    println!("total_windows={}", counts[0] + counts[1]);
    Ok(())
}

fn load_split(path: &Path, split: SplitArg) -> Result<Vec<SequenceWindow>> {
    let all = load_windows(path).with_context(|| format!("reading windows {}", path.display()))?;
    Ok(all
        .into_iter()
        .filter(|w| match split {
            SplitArg::All => true,
            SplitArg::Train => w.split == Split::Train,
            SplitArg::Test => w.split == Split::Test,
        })
        .map(|w| w.window)
        .collect())
}

fn check_shape(data: &Path, model: &ModelConfig) -> Result<()> {
    let shape = read_windows_shape(data)?;
    if shape != (model.t_obs, model.t_pred) {
        bail!(
            "windows file has t_obs={} t_pred={}, model expects t_obs={} t_pred={}",
            shape.0,
            shape.1,
            model.t_obs,
            model.t_pred
        );
    }
    Ok(())
}

pub fn train(
    config: Option<&Path>,
    data: &Path,
    out: &Path,
    log: Option<PathBuf>,
    resume: Option<&Path>,
    exec: Execution,
) -> Result<()> {
    let config = load_config(config)?;
    check_shape(data, &config.model)?;
    let windows = load_split(data, SplitArg::Train)?;
    if windows.is_empty() {
        bail!("{} contains no training windows", data.display());
    }
    let (train, validation) = carve_validation(&windows, config.validation_fraction)?;
    let log_path = log.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".log.csv");
        PathBuf::from(p)
    });

    let (mut trainer, mut log_text) = match resume {
        Some(ck) => {
            let checkpoint = Checkpoint::load_matching(ck, &config.model)
                .with_context(|| format!("loading checkpoint {}", ck.display()))?;
            let previous = std::fs::read_to_string(&log_path).unwrap_or_default();
            let previous = if previous.starts_with(EPOCH_LOG_HEADER) {
                previous
            } else {
                format!("{EPOCH_LOG_HEADER}\n")
            };
            (Trainer::resume(&config, checkpoint, exec)?, previous)
        }
        None => (Trainer::new(&config, &train, exec)?, format!("{EPOCH_LOG_HEADER}\n")),
    };
    let records = trainer.fit(&train, &validation)?;
    let new_rows = epoch_log_csv(&records);
    log_text.push_str(new_rows.split_once('\n').map_or("", |(_, rows)| rows));

    trainer.checkpoint().save(out).with_context(|| format!("writing checkpoint {}", out.display()))?;
    write_file(&log_path, log_text.as_bytes())?;

    println!(
        "trained {} epochs on {} windows ({} validation); checkpoint {}",
        trainer.state.epochs_completed,
        train.len(),
        validation.len(),
        out.display()
    );
    let report = match records.last() {
        Some(r) if !validation.is_empty() => r.validation,
        _ if !validation.is_empty() => evaluate(&trainer.params, &validation, exec)?,
        _ => {
            println!("no validation videos; metrics on the training windows:");
            evaluate(&trainer.params, &train, exec)?
        }
    };
    print!("{report}");
    Ok(())
}

pub struct EvalArgs {
    pub checkpoint: Option<PathBuf>,
    pub data: PathBuf,
    pub baseline: Option<BaselineArg>,
    pub config: Option<PathBuf>,
    pub split: SplitArg,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub exec: Execution,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let windows = load_split(&args.data, args.split)?;
    if windows.is_empty() {
        eprintln!("warning: no windows in the selected split of {}", args.data.display());
    }
    let report = match args.baseline {
        Some(kind) => {
            if args.checkpoint.is_some() {
                bail!("--checkpoint and --baseline are mutually exclusive");
            }
            let config = load_config(args.config.as_deref())?;
            let baseline = match kind {
                BaselineArg::Cvcs => Baseline::Cvcs(config.cvcs_velocity),
                BaselineArg::Lkf => Baseline::Lkf(config.lkf),
            };
            let boxes = baseline.predict_all(&windows, args.exec)?;
            MetricsReport::compute(&windows, Some(&boxes), None, args.exec)?
        }
        None => {
            let path = args.checkpoint.as_deref().expect("clap requires a checkpoint without --baseline");
            let checkpoint = match &args.config {
                Some(c) => Checkpoint::load_matching(path, &load_config(Some(c))?.model),
                None => Checkpoint::load(path),
            }
            .with_context(|| format!("loading checkpoint {}", path.display()))?;
            check_shape(&args.data, &checkpoint.params.config)?;
            evaluate(&checkpoint.params, &windows, args.exec)?
        }
    };
    print!("{report}");
    if let Some(p) = &args.out {
        write_file(p, report.to_key_value().as_bytes())?;
    }
    if let Some(p) = &args.csv {
        write_file(p, format!("{}\n{}\n", MetricsReport::csv_header(), report.csv_row()).as_bytes())?;
    }
    Ok(())
}

pub fn gradcheck(
    hidden: usize,
    t_obs: usize,
    t_pred: usize,
    batch: usize,
    seed: u64,
    threshold: f64,
    corrupt: Option<&str>,
) -> Result<()> {
    let config = ModelConfig {
        hidden_size: hidden,
        t_obs,
        t_pred,
        ..ModelConfig::default()
    };
    let mut params = ModelParameters::init(config, seed)?;
    if let Some(name) = corrupt {
        if !params.blocks().iter().any(|b| b.name == name) {
            bail!("no parameter block named `{name}`");
        }
    }
    let windows = unit_scale_windows(batch, t_obs, t_pred, seed)?;
    let weights = LossWeights::default();
    let exec = Execution::Sequential;
    let mut failure = None;
    let report = grad_check(
        &mut params,
        GradCheckOptions::default(),
        |p| match batch_loss(p, &windows, &weights, exec) {
            Ok(l) => l.total,
            Err(_) => f64::NAN,
        },
        |p| {
            if let Err(e) = batch_loss_and_gradients(p, &windows, &weights, exec) {
                failure = Some(e);
            }
            if let Some(name) = corrupt {
                for b in p.blocks_mut().into_iter().filter(|b| b.name == name) {
                    b.grad = b.grad.scale(1.5);
                }
            }
        },
    );
    if let Some(e) = failure {
        return Err(e.into());
    }
    for b in &report.blocks {
        println!(
            "{:<32} rel={:.3e} abs={:.3e} {}",
            b.name,
            b.max_relative_error,
            b.max_absolute_error,
            if b.max_relative_error < threshold { "ok" } else { "FAIL" }
        );
    }
    println!("max_relative_error={:.3e} threshold={threshold:.0e}", report.max_relative_error());
    let failing = report.failing(threshold);
    if !failing.is_empty() {
        let names: Vec<&str> = failing.iter().map(|b| b.name.as_str()).collect();
        bail!("gradient check failed for {}", names.join(", "));
    }
    Ok(())
}

fn cell(v: Option<f32>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

pub fn predict(checkpoint: &Path, tracks: &Path, out: &Path, exec: Execution) -> Result<()> {
    let ck = Checkpoint::load(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let params = ck.params;
    let (t_obs, t_pred) = (params.config.t_obs, params.config.t_pred);
    let tracks = load_tracks(tracks).with_context(|| format!("reading tracks {}", tracks.display()))?;

    // Tracks arrive sorted by video, pedestrian and frame, so the last
    // segment seen for a pedestrian is its final contiguous run.
    let mut last: Vec<&Track> = Vec::new();
    let mut index: HashMap<(&str, &str), usize> = HashMap::new();
    for t in &tracks {
        match index.get(&(t.video_id.as_str(), t.pedestrian_id.as_str())) {
            Some(&i) => last[i] = t,
            None => {
                index.insert((t.video_id.as_str(), t.pedestrian_id.as_str()), last.len());
                last.push(t);
            }
        }
    }
    let (usable, short): (Vec<&Track>, Vec<&Track>) = last.into_iter().partition(|t| t.len() >= t_obs);
    let observations: Vec<_> = usable.iter().map(|t| t.boxes[t.len() - t_obs..].to_vec()).collect();
    let pred = params.forecast(&observations, exec)?;

    let mut text = String::from("video_id,ped_id,step,x_center,y_center,width,height,p_cross\n");
    for (i, t) in usable.iter().enumerate() {
        for k in 0..t_pred {
            let b = pred.boxes.as_ref().map(|b| b[i][k]);
            let p = pred.intentions.as_ref().map(|p| p[i][k][1]);
            writeln!(
                text,
                "{},{},{},{},{},{},{},{}",
                t.video_id,
                t.pedestrian_id,
                k + 1,
                cell(b.map(|b| b.x_center)),
                cell(b.map(|b| b.y_center)),
                cell(b.map(|b| b.width)),
                cell(b.map(|b| b.height)),
                cell(p)
            )
            .expect("writing to a String cannot fail");
        }
    }
    write_file(out, text.as_bytes())?;
    println!("predicted {} pedestrians x {t_pred} steps", usable.len());
    if !short.is_empty() {
        eprintln!("warning: skipped {} pedestrians with fewer than {t_obs} frames", short.len());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn synth(
    out: &Path,
    count: usize,
    videos: usize,
    t_obs: usize,
    t_pred: usize,
    motion: MotionArg,
    drift: f32,
    noise: f32,
    seed: u64,
) -> Result<()> {
    let spec = SynthSpec {
        count,
        t_obs,
        t_pred,
        motion: match motion {
            MotionArg::ConstantVelocity => Motion::ConstantVelocity,
            MotionArg::Sinusoid => Motion::Sinusoid,
            MotionArg::Mixed => Motion::Mixed,
        },
        videos,
        camera_drift: drift,
        noise_sigma: noise,
    };
    let tracks = synthetic_tracks(&spec, seed)?;
    let mut bytes = Vec::new();
    write_tracks(&mut bytes, &tracks)?;
    write_file(out, &bytes)?;
    println!("wrote {} tracks", tracks.len());
    Ok(())
}
