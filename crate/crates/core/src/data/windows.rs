//! Sliding-window sample generation and the windows CSV file.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::types::{BoundingBox, IntentionLabel, Provenance, SequenceWindow, Track, WindowConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Number of windows a track of `len` frames yields.
pub fn window_count(len: usize, config: &WindowConfig) -> usize {
    if len < config.span() {
        0
    } else {
        (len - config.span()) / config.stride + 1
    }
}

pub fn windows_for_track(track: &Track, config: &WindowConfig) -> Vec<SequenceWindow> {
    let (t_obs, span) = (config.t_obs, config.span());
    (0..window_count(track.len(), config))
        .map(|k| {
            let s = k * config.stride;
            SequenceWindow::new(
                track.boxes[s..s + t_obs].to_vec(),
                track.boxes[s + t_obs..s + span].to_vec(),
                track.labels[s + t_obs..s + span].to_vec(),
                Provenance {
                    video_id: track.video_id.clone(),
                    pedestrian_id: track.pedestrian_id.clone(),
                    start_frame: track.start_frame + s as u32,
                },
            )
            .expect("window config validated")
        })
        .collect()
}

/// Every contiguous span of `t_obs + t_pred` frames, advancing by `stride`.
/// Output follows track order, then start frame.
pub fn build_windows(tracks: &[Track], config: &WindowConfig) -> Result<Vec<SequenceWindow>> {
    build_windows_with(tracks, config, Execution::default())
}

pub fn build_windows_with(tracks: &[Track], config: &WindowConfig, exec: Execution) -> Result<Vec<SequenceWindow>> {
    config.validate()?;
    Ok(exec
        .map(tracks, |t| windows_for_track(t, config))
        .into_iter()
        .flatten()
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Validation(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub split: Split,
    pub window: SequenceWindow,
}

const FIXED_COLUMNS: [&str; 6] = ["split", "video_id", "ped_id", "start_frame", "t_obs", "t_pred"];

pub fn windows_header(t_obs: usize, t_pred: usize) -> Vec<String> {
    let mut h: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    for (prefix, n) in [("obs", t_obs), ("fut", t_pred)] {
        for k in 0..n {
            for c in ["x", "y", "w", "h"] {
                h.push(format!("{prefix}{k}_{c}"));
            }
        }
    }
    h.extend((0..t_pred).map(|k| format!("lab{k}")));
    h
}

/// Writes one row per window. All windows must share `t_obs` and `t_pred`;
/// an empty input writes a header for the given shape.
pub fn write_windows<W: Write>(out: W, windows: &[LabeledWindow], shape: (usize, usize)) -> Result<()> {
    let err = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(windows_header(shape.0, shape.1)).map_err(err)?;
    for lw in windows {
        let win = &lw.window;
        if (win.t_obs(), win.t_pred()) != shape {
            return Err(Error::Validation(format!(
                "window {} has shape {:?}, expected {shape:?}",
                win.provenance,
                (win.t_obs(), win.t_pred())
            )));
        }
        let mut row = vec![
            lw.split.to_string(),
            win.provenance.video_id.clone(),
            win.provenance.pedestrian_id.clone(),
            win.provenance.start_frame.to_string(),
            shape.0.to_string(),
            shape.1.to_string(),
        ];
        for b in win.obs_boxes.iter().chain(&win.future_boxes) {
            row.extend(b.to_array().iter().map(|v| v.to_string()));
        }
        row.extend(win.future_labels.iter().map(|l| l.as_u8().to_string()));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Validation(format!("csv write failed: {e}")))?;
    Ok(())
}

pub fn read_windows<R: Read>(input: R) -> Result<Vec<LabeledWindow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Err(Error::Parse { line: 1, message: "missing header".into() }),
        Some(h) => h.map_err(|e| Error::Parse { line: 1, message: e.to_string() })?,
    };
    let fields: Vec<&str> = header.iter().collect();
    let shape = parse_shape(&fields)?;
    if fields != windows_header(shape.0, shape.1) {
        return Err(Error::Parse {
            line: 1,
            message: "windows header does not match its t_obs/t_pred columns".into(),
        });
    }
    let (t_obs, t_pred) = shape;
    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let perr = |message: String| Error::Parse { line, message };
        if row[4].parse::<usize>().ok() != Some(t_obs) || row[5].parse::<usize>().ok() != Some(t_pred) {
            return Err(perr("row shape differs from header".into()));
        }
        let num = |i: usize| -> Result<f32> {
            row[i].parse::<f32>().map_err(|_| perr(format!("`{}` is not a number", &row[i])))
        };
        let mut boxes = Vec::with_capacity(t_obs + t_pred);
        for k in 0..t_obs + t_pred {
            let c = 6 + 4 * k;
            boxes.push(
                BoundingBox::validated(num(c)?, num(c + 1)?, num(c + 2)?, num(c + 3)?)
                    .map_err(|e| perr(e.to_string()))?,
            );
        }
        let first_label = 6 + 4 * (t_obs + t_pred);
        let labels = (0..t_pred)
            .map(|k| {
                let v: u8 = row[first_label + k].parse().map_err(|_| perr("bad label".into()))?;
                IntentionLabel::from_u8(v).map_err(|e| perr(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let future = boxes.split_off(t_obs);
        let provenance = Provenance {
            video_id: row[1].to_string(),
            pedestrian_id: row[2].to_string(),
            start_frame: row[3].parse().map_err(|_| perr("bad start_frame".into()))?,
        };
        out.push(LabeledWindow {
            split: row[0].parse().map_err(|e: Error| perr(e.to_string()))?,
            window: SequenceWindow::new(boxes, future, labels, provenance)?,
        });
    }
    Ok(out)
}

/// Returns the `(t_obs, t_pred)` declared by a windows file without loading
/// the rows.
pub fn read_windows_shape(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let header = reader
        .records()
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "missing header".into() })?
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    parse_shape(&header.iter().collect::<Vec<_>>())
}

fn parse_shape(fields: &[&str]) -> Result<(usize, usize)> {
    if fields.len() < FIXED_COLUMNS.len() || fields[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            message: format!("windows header must start with `{}`", FIXED_COLUMNS.join(",")),
        });
    }
    let t_pred = fields.iter().filter(|f| f.starts_with("lab")).count();
    let t_obs = fields.iter().filter(|f| f.starts_with("obs") && f.ends_with("_x")).count();
    Ok((t_obs, t_pred))
}

pub fn load_windows(path: impl AsRef<Path>) -> Result<Vec<LabeledWindow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_windows(file)
}
