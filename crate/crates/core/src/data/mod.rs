//! Ingestion, windowing, splitting, normalization and noise injection.

mod edges;
mod noise;
mod norm;
mod series;
mod split;
mod windows;

pub use edges::{load_edges_csv, write_edges_csv, LoadedEdges};
pub use noise::inject_noise;
pub use norm::{zscore, Direction, NormStats};
pub use series::{load_series_csv, write_series_csv, SeriesTable};
pub use split::{nominal_counts, split_train_val_test, SplitAnchors};
pub use windows::{
    anchor_range, day_rows, hour_rows, make_channels, make_channels_from, valid_anchors, ChannelBatch,
};
