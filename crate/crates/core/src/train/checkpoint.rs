//! Binary checkpoint format.
//!
//! ```text
//! "PVLS" | version u32 | blob_len u32 | blob (UTF-8 key=value lines)
//! record* where record = name_len u32 | name | rank u32 | dims u32* | f32 data
//! ```
//!
//! All integers and floats are little-endian. The blob carries the model
//! configuration, optimizer step counts, scheduler and RNG state; records
//! carry every parameter array, its Adam moments and the input normalizer.

use std::collections::{BTreeMap, HashMap};
use std::io::Write as _;
use std::path::Path;

use super::scheduler::PlateauScheduler;
use super::config::SchedulerConfig;
use crate::error::{Error, Result};
use crate::kernel::{Matrix, ParamSet};
use crate::model::{ModelConfig, ModelParameters};

pub const MAGIC: &[u8; 4] = b"PVLS";
pub const FORMAT_VERSION: u32 = 1;

/// Optimizer-loop state needed to resume a run exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState {
    pub epochs_completed: usize,
    pub scheduler: PlateauScheduler,
    pub seed: u64,
    /// ChaCha stream used to shuffle the next epoch.
    pub rng_stream: u64,
}

impl TrainingState {
    pub fn new(seed: u64, learning_rate: f32, scheduler: SchedulerConfig) -> Self {
        TrainingState {
            epochs_completed: 0,
            scheduler: PlateauScheduler::new(scheduler, learning_rate),
            seed,
            rng_stream: 1,
        }
    }

    pub fn learning_rate(&self) -> f32 {
        self.scheduler.learning_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParameters,
    pub state: TrainingState,
}

fn push_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in 32 bits")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn push_record(out: &mut Vec<u8>, name: &str, rows: usize, cols: usize, data: &[f32]) -> Result<()> {
    push_u32(out, name.len())?;
    out.extend_from_slice(name.as_bytes());
    push_u32(out, 2)?;
    push_u32(out, rows)?;
    push_u32(out, cols)?;
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

fn normalizer_records(p: &ModelParameters) -> [(&'static str, &[f32]); 3] {
    let n = &p.normalizer;
    [
        ("normalizer.box_offset", &n.box_offset),
        ("normalizer.box_scale", &n.box_scale),
        ("normalizer.velocity_scale", &n.velocity_scale),
    ]
}

impl Checkpoint {
    fn blob(&self) -> String {
        let s = &self.state;
        let mut blob = self.params.config.to_text();
        blob.push_str(&format!(
            "epochs_completed={}\nlearning_rate={:?}\nscheduler_factor={:?}\nscheduler_patience={}\n\
             scheduler_min_lr={:?}\nscheduler_best={:?}\nscheduler_bad_epochs={}\nseed={}\nrng_stream={}\n",
            s.epochs_completed,
            s.scheduler.learning_rate,
            s.scheduler.config.factor,
            s.scheduler.config.patience,
            s.scheduler.config.min_lr,
            s.scheduler.best,
            s.scheduler.bad_epochs,
            s.seed,
            s.rng_stream,
        ));
        for b in self.params.blocks() {
            blob.push_str(&format!("step.{}={}\n", b.name, b.step_count));
        }
        blob
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let blob = self.blob();
        push_u32(&mut out, blob.len())?;
        out.extend_from_slice(blob.as_bytes());
        for b in self.params.blocks() {
            let (r, c) = b.shape();
            push_record(&mut out, &b.name, r, c, b.value.as_slice())?;
            push_record(&mut out, &format!("{}.adam_m", b.name), r, c, b.adam_m.as_slice())?;
            push_record(&mut out, &format!("{}.adam_v", b.name), r, c, b.adam_v.as_slice())?;
        }
        for (name, data) in normalizer_records(&self.params) {
            push_record(&mut out, name, 1, data.len(), data)?;
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic bytes)".into()));
        }
        let version = r.u32("format version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (this build reads version {FORMAT_VERSION})"
            )));
        }
        let blob_len = r.u32("config length")? as usize;
        let blob = std::str::from_utf8(r.take(blob_len, "config")?)
            .map_err(|_| Error::Checkpoint("config blob is not valid UTF-8".into()))?;
        let fields: HashMap<&str, &str> = blob.lines().filter_map(|l| l.split_once('=')).collect();
        let config = ModelConfig::from_text(blob).map_err(|e| Error::Checkpoint(format!("bad model config: {e}")))?;

        let mut records: BTreeMap<String, Matrix> = BTreeMap::new();
        while !r.done() {
            let name_len = r.u32("record name length")? as usize;
            let name = String::from_utf8(r.take(name_len, "record name")?.to_vec())
                .map_err(|_| Error::Checkpoint("record name is not valid UTF-8".into()))?;
            let rank = r.u32("record rank")? as usize;
            if rank != 2 {
                return Err(Error::Checkpoint(format!("record `{name}` has unsupported rank {rank}")));
            }
            let rows = r.u32("record dims")? as usize;
            let cols = r.u32("record dims")? as usize;
            let count = rows
                .checked_mul(cols)
                .filter(|n| n.checked_mul(4).is_some())
                .ok_or_else(|| Error::Checkpoint(format!("record `{name}` is implausibly large")))?;
            let data: Vec<f32> = r
                .take(count * 4, "record data")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let m = Matrix::from_vec(rows, cols, data)?;
            if records.insert(name.clone(), m).is_some() {
                return Err(Error::Checkpoint(format!("duplicate record `{name}`")));
            }
        }

        let mut params = ModelParameters::zeros(config)?;
        let field = |key: &str| -> Result<&str> {
            fields.get(key).copied().ok_or_else(|| Error::Checkpoint(format!("config blob lacks `{key}`")))
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Checkpoint(format!("bad value `{v}` for `{key}`")))
        }
        let mut take = |name: &str, shape: (usize, usize)| -> Result<Matrix> {
            let m = records.remove(name).ok_or_else(|| Error::Checkpoint(format!("missing record `{name}`")))?;
            if m.shape() != shape {
                return Err(Error::Checkpoint(format!(
                    "record `{name}` has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
            Ok(m)
        };
        for b in params.blocks_mut() {
            let shape = b.shape();
            b.value = take(&b.name, shape)?;
            b.adam_m = take(&format!("{}.adam_m", b.name), shape)?;
            b.adam_v = take(&format!("{}.adam_v", b.name), shape)?;
            let key = format!("step.{}", b.name);
            b.step_count = num(&key, field(&key)?)?;
        }
        let dim = params.normalizer.dim();
        params.normalizer.box_offset = take("normalizer.box_offset", (1, dim))?.into_vec();
        params.normalizer.box_scale = take("normalizer.box_scale", (1, dim))?.into_vec();
        params.normalizer.velocity_scale = take("normalizer.velocity_scale", (1, dim))?.into_vec();
        if let Some(extra) = records.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected record `{extra}`")));
        }

        let scheduler = PlateauScheduler {
            config: SchedulerConfig {
                factor: num("scheduler_factor", field("scheduler_factor")?)?,
                patience: num("scheduler_patience", field("scheduler_patience")?)?,
                min_lr: num("scheduler_min_lr", field("scheduler_min_lr")?)?,
            },
            learning_rate: num("learning_rate", field("learning_rate")?)?,
            best: num("scheduler_best", field("scheduler_best")?)?,
            bad_epochs: num("scheduler_bad_epochs", field("scheduler_bad_epochs")?)?,
        };
        let state = TrainingState {
            epochs_completed: num("epochs_completed", field("epochs_completed")?)?,
            scheduler,
            seed: num("seed", field("seed")?)?,
            rng_stream: num("rng_stream", field("rng_stream")?)?,
        };
        Ok(Checkpoint { params, state })
    }

    /// Writes to a sibling temporary file and renames it into place, so a
    /// failed write never leaves a partial checkpoint at `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }

    /// Loads and checks that the stored model matches `expected`.
    pub fn load_matching(path: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
        let ck = Checkpoint::load(path)?;
        if &ck.params.config != expected {
            return Err(Error::Config(format!(
                "checkpoint model does not match the configuration:\n  checkpoint: {}\n  expected:   {}",
                ck.params.config.to_text().trim().replace('\n', ", "),
                expected.to_text().trim().replace('\n', ", ")
            )));
        }
        Ok(ck)
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!(
                "file is truncated or corrupt: needed {n} bytes for {what} at offset {}, {} available",
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
