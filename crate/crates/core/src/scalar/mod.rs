//! Passive-scalar pair dispersion in synthetic incompressible 2D flows.

mod flow;
mod pairs;

pub use flow::{flow_velocity, FlowMode, FlowState, SyntheticFlow, SyntheticFlowConfig};
pub use pairs::{
    advance_pair, default_max_t, hitting_time, pair_correlation_estimate, separation_growth, ChiSpec, Direction, EnsembleSpec,
    HittingOutcome, HittingSpec, PairCorrelationEstimate, PairState,
};
