//! Canonical track CSV ingestion.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use super::order::natural_cmp;
use super::types::{BoundingBox, IntentionLabel, Track, TrackRecord};
use crate::error::{Error, Result};

pub const TRACK_HEADER: [&str; 8] = [
    "video_id", "frame", "ped_id", "x_center", "y_center", "width", "height", "crossing",
];

pub fn load_tracks(path: impl AsRef<Path>) -> Result<Vec<Track>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tracks(file)
}

/// Parses, validates, sorts and groups track records. A missing frame splits
/// a pedestrian into separate tracks.
pub fn parse_tracks<R: Read>(input: R) -> Result<Vec<Track>> {
    let records = parse_records(input)?;
    Ok(group_tracks(records))
}

pub fn parse_records<R: Read>(input: R) -> Result<Vec<TrackRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::None)
        .from_reader(input);
    let mut rows = reader.records();

    match rows.next() {
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
        Some(header) => {
            let header = header.map_err(|e| csv_error(e, 1))?;
            let fields: Vec<&str> = header.iter().collect();
            if fields != TRACK_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{}`, got `{}`", TRACK_HEADER.join(","), fields.join(",")),
                });
            }
        }
    }

    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != TRACK_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", TRACK_HEADER.len(), row.len()),
            });
        }
        let num = |i: usize| -> Result<f32> {
            row[i].parse::<f32>().map_err(|_| Error::Parse {
                line,
                message: format!("field `{}` is not a number: `{}`", TRACK_HEADER[i], &row[i]),
            })
        };
        let frame = row[1].parse::<u32>().map_err(|_| Error::Parse {
            line,
            message: format!("frame `{}` is not a non-negative integer", &row[1]),
        })?;
        let bbox = BoundingBox::validated(num(3)?, num(4)?, num(5)?, num(6)?)
            .map_err(|e| Error::Validation(format!("line {line}: {e}")))?;
        let label = match &row[7] {
            "0" => IntentionLabel::NotCrossing,
            "1" => IntentionLabel::Crossing,
            other => {
                return Err(Error::Validation(format!(
                    "line {line}: crossing label `{other}` is not 0 or 1"
                )))
            }
        };
        records.push(TrackRecord {
            video_id: row[0].to_string(),
            frame,
            pedestrian_id: row[2].to_string(),
            bbox,
            label,
        });
    }

    let mut seen = HashSet::with_capacity(records.len());
    for r in &records {
        if !seen.insert((r.video_id.as_str(), r.pedestrian_id.as_str(), r.frame)) {
            return Err(Error::Validation(format!(
                "duplicate row for video {} pedestrian {} frame {}",
                r.video_id, r.pedestrian_id, r.frame
            )));
        }
    }
    Ok(records)
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub(crate) fn record_order(a: &TrackRecord, b: &TrackRecord) -> Ordering {
    natural_cmp(&a.video_id, &b.video_id)
        .then_with(|| natural_cmp(&a.pedestrian_id, &b.pedestrian_id))
        .then(a.frame.cmp(&b.frame))
}

/// Groups records into frame-contiguous tracks ordered by
/// (video, pedestrian, start frame).
pub fn group_tracks(mut records: Vec<TrackRecord>) -> Vec<Track> {
    records.sort_by(record_order);
    let mut tracks: Vec<Track> = Vec::new();
    let mut prev: Option<(String, String, u32)> = None;
    for r in records {
        let continues = matches!(&prev, Some((v, p, f))
            if *v == r.video_id && *p == r.pedestrian_id && r.frame == f + 1);
        prev = Some((r.video_id.clone(), r.pedestrian_id.clone(), r.frame));
        if continues {
            let t = tracks.last_mut().expect("continuing track exists");
            t.boxes.push(r.bbox);
            t.labels.push(r.label);
        } else {
            tracks.push(Track {
                video_id: r.video_id,
                pedestrian_id: r.pedestrian_id,
                start_frame: r.frame,
                boxes: vec![r.bbox],
                labels: vec![r.label],
            });
        }
    }
    tracks
}

/// Serializes tracks back to the canonical CSV format.
pub fn write_tracks<W: std::io::Write>(out: W, tracks: &[Track]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
    w.write_record(TRACK_HEADER).map_err(err)?;
    for t in tracks {
        for (k, (b, l)) in t.boxes.iter().zip(&t.labels).enumerate() {
            w.write_record([
                t.video_id.clone(),
                (t.start_frame + k as u32).to_string(),
                t.pedestrian_id.clone(),
                b.x_center.to_string(),
                b.y_center.to_string(),
                b.width.to_string(),
                b.height.to_string(),
                l.as_u8().to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::Validation(format!("csv write failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "video_id,frame,ped_id,x_center,y_center,width,height,crossing\n";

    fn rows(frames: &[u32]) -> String {
        let mut s = HEADER.to_string();
        for f in frames {
            s.push_str(&format!("v1,{f},p1,10.5,20,5,10,0\n"));
        }
        s
    }

    #[test]
    fn header_only_gives_no_tracks() {
        assert!(parse_tracks(HEADER.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn contiguous_rows_form_one_track() {
        let t = parse_tracks(rows(&[1, 2, 3]).as_bytes()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].len(), 3);
        assert_eq!(t[0].boxes[0], BoundingBox::new(10.5, 20.0, 5.0, 10.0));
    }

    #[test]
    fn frame_gap_splits_track() {
        let t = parse_tracks(rows(&[7, 1, 3, 2, 8]).as_bytes()).unwrap();
        let lens: Vec<usize> = t.iter().map(Track::len).collect();
        assert_eq!(lens, vec![3, 2]);
        assert_eq!(t[1].start_frame, 7);
    }

    #[test]
    fn malformed_row_reports_line() {
        let input = format!("{HEADER}v1,1,p1,1,2,3,4,0\nv1,2,p1,abc,2,3,4,0\n");
        match parse_tracks(input.as_bytes()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
        let short = format!("{HEADER}v1,1,p1,1,2,3\n");
        assert!(matches!(parse_tracks(short.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn validation_errors() {
        let zero_w = format!("{HEADER}v1,1,p1,1,2,0,4,0\n");
        assert!(matches!(parse_tracks(zero_w.as_bytes()), Err(Error::Validation(_))));
        let bad_label = format!("{HEADER}v1,1,p1,1,2,3,4,2\n");
        assert!(matches!(parse_tracks(bad_label.as_bytes()), Err(Error::Validation(_))));
        let dup = format!("{HEADER}v1,1,p1,1,2,3,4,0\nv1,1,p1,1,2,3,4,0\n");
        assert!(matches!(parse_tracks(dup.as_bytes()), Err(Error::Validation(_))));
        let bad_header = "video,frame,ped_id,x_center,y_center,width,height,crossing\n";
        assert!(matches!(parse_tracks(bad_header.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn pedestrians_and_videos_are_separated() {
        let input = format!(
            "{HEADER}v2,1,p1,1,1,1,1,0\nv1,2,p1,1,1,1,1,1\nv1,1,p2,1,1,1,1,0\nv1,1,p1,1,1,1,1,0\nv10,1,p1,1,1,1,1,0\n"
        );
        let t = parse_tracks(input.as_bytes()).unwrap();
        let ids: Vec<(&str, &str, usize)> =
            t.iter().map(|t| (t.video_id.as_str(), t.pedestrian_id.as_str(), t.len())).collect();
        assert_eq!(ids, vec![("v1", "p1", 2), ("v1", "p2", 1), ("v2", "p1", 1), ("v10", "p1", 1)]);
        assert_eq!(t[0].labels, vec![IntentionLabel::NotCrossing, IntentionLabel::Crossing]);
    }

    #[test]
    fn write_then_parse_round_trips() {
        let t = parse_tracks(rows(&[1, 2, 3, 9]).as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_tracks(&mut buf, &t).unwrap();
        assert_eq!(parse_tracks(buf.as_slice()).unwrap(), t);
    }
}
