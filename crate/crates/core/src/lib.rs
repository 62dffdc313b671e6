//! Simulation and optimal control of piecewise deterministic Markov processes
//! whose continuous component lives in `L²(0,1)` with Dirichlet boundary.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: truncated sine-basis fields, norms and the heat semigroup.
//! * [`pdmp`]: the generic controlled PDMP engine (flows, thinning, simulation,
//!   cost estimation, Dynkin diagnostics).
//! * [`hh`]: the spatial Hodgkin–Huxley model with channelrhodopsin channels.
//! * [`toy`]: small enumeration-tractable models used as verification instruments.
//! * [`primal`]: value iteration of the one-jump Bellman operator and a
//!   brute-force oracle.
//! * [`randomization`]: the control-randomized process, intensity changes and
//!   dual value estimation.
//! * [`bsde`]: penalized BSDE solvers on the randomized process.
//!
//! Every stochastic routine takes an explicit seed; results are reproducible
//! bit-for-bit regardless of the rayon thread count.

pub mod bsde;
pub mod error;
pub mod hh;
pub mod optim;
pub mod pdmp;
pub mod primal;
pub mod quadrature;
pub mod randomization;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod toy;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use pdmp::{
    AffineDrift, ConstantPolicy, CostBounds, Drift, HybridState, OpenLoopPolicy, PdmpModel,
    SimConfig, Trajectory,
};
pub use spectral::{NormKind, SpectralField};
pub use stats::Estimate;
