//! Control randomization: the uncontrolled process `(X, I)` in which the
//! control `I` is itself a pure-jump process driven by a reference measure
//! `λ₀` on the control grid, intensity changes `ν` of its jumps, the
//! matching Doléans-Dade weights, and Monte Carlo estimation and
//! minimization of the dual cost.

mod dual;
mod nu;
mod xi;

pub use dual::{
    estimate_dual, minimize_over_nu, write_search_trace, DualMethod, NuSearch, NuSearchResult,
    TraceRow,
};
pub use nu::{ConstantNu, FnNu, Lambda0, NuPolicy, TabularNu};
pub(crate) use xi::simulate_xi_with_cache;
pub use xi::{doleans_weight, dual_cost, simulate_xi, JumpKind, XiJump, XiPath, XiSegment};
