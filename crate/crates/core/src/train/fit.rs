use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{Checkpoint, TrainingState};
use super::config::TrainConfig;
use crate::data::{shuffled_batches, SequenceWindow};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::{adam_step, ParamSet};
use crate::metrics::MetricsReport;
use crate::model::{batch_loss, batch_loss_and_gradients, LossBreakdown, ModelParameters, Normalizer};

pub const EPOCH_LOG_HEADER: &str = "epoch,lr,loss_box,loss_int,val_ade,val_fde,val_aiou,val_fiou,val_acc";

/// One row of the per-epoch training log. Losses are means over the epoch's
/// training windows, measured before each step's update.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Rate used during this epoch.
    pub learning_rate: f32,
    pub loss_box: f64,
    pub loss_intention: f64,
    pub validation: MetricsReport,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"))
}

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        let v = &self.validation;
        format!(
            "{},{:e},{:.6},{:.6},{},{},{},{},{}",
            self.epoch,
            self.learning_rate,
            self.loss_box,
            self.loss_intention,
            cell(v.ade),
            cell(v.fde),
            cell(v.aiou),
            cell(v.fiou),
            cell(v.intention_accuracy_all)
        )
    }
}

/// Header plus one line per record.
pub fn epoch_log_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from(EPOCH_LOG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// One optimizer step on `batch`: weighted loss, backpropagation through the
/// unrolled network, then Adam on every parameter block.
pub fn train_step(
    params: &mut ModelParameters,
    batch: &[SequenceWindow],
    config: &TrainConfig,
    learning_rate: f32,
    exec: Execution,
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::Validation("train_step needs a non-empty batch".into()));
    }
    let loss = batch_loss_and_gradients(params, batch, &config.loss_weights(), exec)?;
    if !(loss.box_loss.is_finite() && loss.intention_loss.is_finite() && loss.total.is_finite()) {
        let ids: Vec<String> = batch.iter().map(|w| w.provenance.to_string()).collect();
        return Err(Error::NonFiniteLoss(ids.join(", ")));
    }
    for block in params.blocks_mut() {
        adam_step(block, learning_rate, &config.adam)?;
    }
    Ok(loss)
}

/// Forward pass and metrics, without gradient bookkeeping.
pub fn evaluate(params: &ModelParameters, windows: &[SequenceWindow], exec: Execution) -> Result<MetricsReport> {
    let pred = params.forward_with(windows, exec)?;
    MetricsReport::compute(windows, pred.boxes.as_deref(), pred.intentions.as_deref(), exec)
}

/// Owns the parameters and loop state of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: ModelParameters,
    pub state: TrainingState,
    pub config: TrainConfig,
    pub exec: Execution,
}

impl Trainer {
    /// Fresh parameters from `config.seed`; the normalizer, if enabled, is
    /// fitted on `train`.
    pub fn new(config: &TrainConfig, train: &[SequenceWindow], exec: Execution) -> Result<Trainer> {
        config.validate()?;
        let mut params = ModelParameters::init(config.model, config.seed)?;
        if config.normalize {
            params.normalizer = Normalizer::fit(train, config.model.feature_dim());
        }
        Ok(Trainer {
            params,
            state: TrainingState::new(config.seed, config.learning_rate, config.scheduler),
            config: config.clone(),
            exec,
        })
    }

    pub fn resume(config: &TrainConfig, checkpoint: Checkpoint, exec: Execution) -> Result<Trainer> {
        config.validate()?;
        if checkpoint.params.config != config.model {
            return Err(Error::Config("checkpoint model does not match the configuration".into()));
        }
        if checkpoint.state.seed != config.seed {
            return Err(Error::Config(format!(
                "checkpoint was trained with seed {}, configuration has {}",
                checkpoint.state.seed, config.seed
            )));
        }
        Ok(Trainer {
            params: checkpoint.params,
            state: checkpoint.state,
            config: config.clone(),
            exec,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            state: self.state.clone(),
        }
    }

    pub fn run_epoch(&mut self, train: &[SequenceWindow], validation: &[SequenceWindow]) -> Result<EpochRecord> {
        if train.is_empty() {
            return Err(Error::Validation("training set is empty".into()));
        }
        let lr = self.state.learning_rate();
        let mut rng = ChaCha8Rng::seed_from_u64(self.state.seed);
        rng.set_stream(self.state.rng_stream);
        let (mut sum_box, mut sum_int, mut sum_total) = (0.0f64, 0.0f64, 0.0f64);
        for idx in shuffled_batches(train.len(), self.config.batch_size, &mut rng) {
            let batch: Vec<SequenceWindow> = idx.iter().map(|&i| train[i].clone()).collect();
            let loss = train_step(&mut self.params, &batch, &self.config, lr, self.exec)?;
            let n = batch.len() as f64;
            sum_box += loss.box_loss * n;
            sum_int += loss.intention_loss * n;
            sum_total += loss.total * n;
        }
        let n = train.len() as f64;

        let (monitored, report) = if validation.is_empty() {
            (sum_total / n, MetricsReport::default())
        } else {
            let val_loss = batch_loss(&self.params, validation, &self.config.loss_weights(), self.exec)?;
            (val_loss.total, evaluate(&self.params, validation, self.exec)?)
        };
        self.state.scheduler.step(monitored);
        self.state.epochs_completed += 1;
        self.state.rng_stream += 1;
        Ok(EpochRecord {
            epoch: self.state.epochs_completed,
            learning_rate: lr,
            loss_box: sum_box / n,
            loss_intention: sum_int / n,
            validation: report,
        })
    }

    /// Runs the remaining epochs up to `config.epochs`.
    pub fn fit(&mut self, train: &[SequenceWindow], validation: &[SequenceWindow]) -> Result<Vec<EpochRecord>> {
        let mut log = Vec::new();
        while self.state.epochs_completed < self.config.epochs {
            log.push(self.run_epoch(train, validation)?);
        }
        Ok(log)
    }
}

/// Trains from scratch and returns the final parameters with the epoch log.
pub fn fit(
    train: &[SequenceWindow],
    validation: &[SequenceWindow],
    config: &TrainConfig,
    exec: Execution,
) -> Result<(ModelParameters, Vec<EpochRecord>)> {
    if train.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    let mut trainer = Trainer::new(config, train, exec)?;
    let log = trainer.fit(train, validation)?;
    Ok((trainer.params, log))
}
