//! Sokoban planning laboratory.
//!
//! * [`sokoban`]: rules engine, level text format, BFS oracle, case-study generators.
//! * [`tensor`] and [`net`]: from-scratch DRC(D,N) ConvLSTM inference and weight files.
//! * [`planner`]: an explicit cellular planner (plan chains, stopping, backtracking,
//!   winner-takes-all, action readout) and its compilation into DRC weights.
//! * [`interp`]: ablations, interventions, steering, regressions and probes.
//! * [`harness`]: batch evaluation, heatmaps, manifests and the bundled level suite.

pub mod harness;
pub mod interp;
pub mod net;
pub mod planner;
pub mod sokoban;
pub mod stats;
pub mod tensor;

pub use sokoban::{Action, Level, Pos, StepOutcome, Tile};
pub use tensor::Tensor3;
