//! Edge-type Markov chains: parameters, k-step transitions, the cascade
//! simulator and the trace/observation types it produces.

mod model;
mod simulate;
mod trace;

pub use model::{
    k_step_transition, validate_model, weibo_z4_file, ClassifierSection, Diagnostics, ModelError, ModelFile,
    ModelIssue, PowerCache, SpreadModel, StandardizeSection, Table, TransitionMatrix, ROW_SUM_TOLERANCE,
};
pub use simulate::{
    sample_synthetic_cascade, sample_trace, subsample, FeatureConfig, GrowthConfig, SimError, SyntheticCascade,
    Topology,
};
pub use trace::{read_traces, write_traces, Observation, ObservationStream, Trace, TraceError, TraceEvent};
