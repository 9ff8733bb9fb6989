//! Batch evaluation, heatmaps, run manifests and the bundled level suite.

mod config;
mod eval;
mod heatmap;
mod suite;

pub use config::{load_level_set, short_hash, Config, LevelSet, RunManifest};
pub use eval::{
    evaluate, evaluate_levels, outcomes_csv, run_drc, DrcReadout, LevelOutcome, SolveStats, Solver,
};
pub use heatmap::{diverging, dump_heatmap, heatmap_csv, heatmap_ppm, read_heatmap_csv};
pub use suite::{
    build_suite, bundled_suite, random_room, random_rooms, suite_index, suite_plan, suite_text,
    SuiteEntry, ROOMS_SEED, SUITE_SEED, SUITE_SIZE,
};

use crate::net::NetError;
use crate::sokoban::BoxobanError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("level set is empty")]
    EmptyLevels,
    #[error("solver and weights do not match: {0}")]
    Mismatch(String),
    #[error("channel {channel} out of range for {channels} channels")]
    Channel { channel: usize, channels: usize },
    #[error("csv line {line}: cannot read {text:?}")]
    Csv { line: usize, text: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Levels(#[from] BoxobanError),
    #[error(transparent)]
    Net(#[from] NetError),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

/// `f` over `items`, in parallel when the `parallel` feature is on, results in input order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}
