use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use super::order::natural_cmp;
use super::types::{SequenceWindow, Track};
use crate::error::{Error, Result};

/// How videos are assigned to the training side of a split. Videos are first
/// put in natural order of their identifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRule {
    /// The first `n` videos train, the rest test.
    FirstVideos(usize),
    /// The first `floor(fraction * count)` videos train.
    TrainFraction(f64),
}

impl Default for SplitRule {
    fn default() -> Self {
        SplitRule::FirstVideos(300)
    }
}

impl fmt::Display for SplitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitRule::FirstVideos(n) => write!(f, "first:{n}"),
            SplitRule::TrainFraction(x) => write!(f, "fraction:{x}"),
        }
    }
}

impl FromStr for SplitRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("split rule `{s}` is not `first:<n>` or `fraction:<f>`"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "first" => Ok(SplitRule::FirstVideos(value.parse().map_err(|_| bad())?)),
            "fraction" => {
                let f: f64 = value.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&f) {
                    return Err(bad());
                }
                Ok(SplitRule::TrainFraction(f))
            }
            _ => Err(bad()),
        }
    }
}

impl SplitRule {
    fn train_count(&self, videos: usize) -> usize {
        match *self {
            SplitRule::FirstVideos(n) => n.min(videos),
            SplitRule::TrainFraction(f) => ((videos as f64) * f).floor() as usize,
        }
    }
}

/// Sorted distinct video identifiers.
pub fn video_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<String> = ids.collect::<BTreeSet<_>>().into_iter().map(String::from).collect();
    v.sort_by(|a, b| natural_cmp(a, b));
    v
}

/// Partitions items by their video so that no video lands on both sides.
pub fn partition_by_video<T: Clone>(
    items: &[T],
    video_of: impl Fn(&T) -> &str,
    rule: SplitRule,
) -> Result<(Vec<T>, Vec<T>)> {
    let videos = video_ids(items.iter().map(&video_of));
    let cut = rule.train_count(videos.len());
    let train_videos: HashSet<&str> = videos[..cut].iter().map(String::as_str).collect();
    let (train, test): (Vec<T>, Vec<T>) = items
        .iter()
        .cloned()
        .partition(|t| train_videos.contains(video_of(t)));

    let train_set: HashSet<&str> = train.iter().map(&video_of).collect();
    if let Some(v) = test.iter().map(&video_of).find(|v| train_set.contains(v)) {
        return Err(Error::Invariant(format!("video {v} appears in both splits")));
    }
    Ok((train, test))
}

pub fn split_by_video(tracks: &[Track], rule: SplitRule) -> Result<(Vec<Track>, Vec<Track>)> {
    partition_by_video(tracks, |t| t.video_id.as_str(), rule)
}

/// Holds out the last `fraction` of the training videos for validation.
/// Returns `(train, validation)`.
pub fn carve_validation(windows: &[SequenceWindow], fraction: f64) -> Result<(Vec<SequenceWindow>, Vec<SequenceWindow>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("validation fraction {fraction} must be in [0, 1)")));
    }
    let n = video_ids(windows.iter().map(|w| w.provenance.video_id.as_str())).len();
    let held_out = ((n as f64) * fraction).floor() as usize;
    partition_by_video(windows, |w| w.provenance.video_id.as_str(), SplitRule::FirstVideos(n - held_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::types::{BoundingBox, IntentionLabel};

    fn tracks(videos: usize, per_video: usize) -> Vec<Track> {
        (1..=videos)
            .flat_map(|v| {
                (0..per_video).map(move |p| Track {
                    video_id: format!("video_{v:04}"),
                    pedestrian_id: format!("p{p}"),
                    start_frame: 0,
                    boxes: vec![BoundingBox::new(1.0, 1.0, 1.0, 1.0)],
                    labels: vec![IntentionLabel::NotCrossing],
                })
            })
            .collect()
    }

    #[test]
    fn first_300_of_346() {
        let t = tracks(346, 2);
        let (train, test) = split_by_video(&t, SplitRule::FirstVideos(300)).unwrap();
        assert_eq!(video_ids(train.iter().map(|t| t.video_id.as_str())).len(), 300);
        let test_videos = video_ids(test.iter().map(|t| t.video_id.as_str()));
        assert_eq!(test_videos.len(), 46);
        assert_eq!(test_videos[0], "video_0301");
        assert_eq!(train.len() + test.len(), t.len());
    }

    #[test]
    fn single_video_never_straddles() {
        let t = tracks(1, 5);
        for rule in [SplitRule::FirstVideos(0), SplitRule::FirstVideos(1), SplitRule::TrainFraction(0.5)] {
            let (a, b) = split_by_video(&t, rule).unwrap();
            assert!(a.is_empty() || b.is_empty());
            assert_eq!(a.len() + b.len(), 5);
        }
    }

    #[test]
    fn parse_rules() {
        assert_eq!("first:300".parse::<SplitRule>().unwrap(), SplitRule::FirstVideos(300));
        assert_eq!("fraction:0.8".parse::<SplitRule>().unwrap(), SplitRule::TrainFraction(0.8));
        assert!("fraction:1.5".parse::<SplitRule>().is_err());
        assert!("300".parse::<SplitRule>().is_err());
    }
}
