//! Interpretability tools over the DRC net and the planner: encoder simplification,
//! direct effects, ablations, interventions, weight steering, regressions and probes.
//!
//! Reports render as CSV with a fixed column order.

mod ablate;
mod effect;
mod encoder;
mod intervene;
mod probe;
mod regress;
mod spec;
mod steer;

pub use ablate::{
    channel_means, mean_ablation_edits, run_ablation, zero_kernels, AblationMode, AblationResult,
    AblationSpec, ChannelMeans, KernelSlice,
};
pub use effect::{
    contributions, direct_effect, reconstruct, Contribution, InputChannel, InputGroup,
};
pub use encoder::{combine_encoder, compose, two_stage_encoder, CombinedEncoder};
pub use intervene::{
    causal_intervene, intervene_net, intervention_score, protocol_edits, sample_transitions,
    transition_pool, Outcome, Protocol, ScoreReport, Transition,
};
pub use probe::{
    auc_probe, pooled_features, train_action_probe, AucReport, AucRow, LabelVariant, ProbeFit,
    ProbeTarget, TargetKind,
};
pub use regress::{
    episode_features, label_regression, offset_regression, CorrelationReport, CorrelationRow,
    FeatureSet, OffsetReport, OffsetRow, Recording, BASE_FEATURES, FUTURE_FEATURES, OFFSETS, RIDGE,
};
pub use spec::{parse_ablation, parse_intervention, resolve_channels};
pub use steer::{
    corridor_probe, largest_solvable_zigzag, net_propagation_distance, propagation_distance,
    steer_weights, Recurrent,
};

use crate::net::NetError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum InterpError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("no recording for layer {layer} tick {tick}")]
    MissingRecording { layer: usize, tick: usize },
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("mean source undefined for {0}")]
    UndefinedMean(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("factor must be positive, got {0}")]
    BadFactor(f32),
    #[error("bad spec: {0}")]
    Spec(String),
}
