//! Track ingestion, windowing, video-level splits and batching.

mod batch;
mod order;
mod split;
mod tracks;
mod types;
mod windows;

pub use batch::make_batches;
pub(crate) use batch::shuffled_batches;
pub use order::natural_cmp;
pub use split::{carve_validation, partition_by_video, split_by_video, video_ids, SplitRule};
pub use tracks::{group_tracks, load_tracks, parse_records, parse_tracks, write_tracks, TRACK_HEADER};
pub use types::{
    derive_velocities, integrate_boxes, BoundingBox, BoxVelocity, IntentionLabel, Provenance, SequenceWindow, Track,
    TrackRecord, WindowConfig,
};
pub use windows::{
    build_windows, build_windows_with, load_windows, read_windows, read_windows_shape, window_count,
    windows_for_track, windows_header, write_windows, LabeledWindow, Split,
};
