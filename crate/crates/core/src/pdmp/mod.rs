//! Generic controlled PDMP engine.
//!
//! A model is described by its local characteristics through [`PdmpModel`].
//! Between jumps the field follows the mild solution of
//! `ẋ = -c L x + b(x, mode, a)` with `L = -Δ`; jump times are drawn by
//! thinning against the declared rate bound, and jumps change only the mode.

mod dynkin;
mod flow;
mod model;
mod simulate;

pub use dynkin::{dynkin_residual, CylindricalTestFn, DynkinConfig};
pub use flow::{integrate_flow, lawson_rk4, FlowCache, Propagator};
pub use model::{AffineDrift, CostBounds, Drift, HybridState, PdmpModel, RankOneTerm};
pub use simulate::{
    estimate_cost, path_cost, sample_jump_target, sample_jump_time, simulate, write_trajectory_csv,
    ConstantPolicy, FnPolicy, OpenLoopPolicy, SimConfig, TrajSegment, Trajectory,
};

pub(crate) use simulate::{pick, thin_segment, SegmentSamples, TimeGrid};
