//! Penalized BSDE on the randomized process `(X, I)`.
//!
//! With the Markovian identification `Y_s = vⁿ(s, X_s, I_s)` and
//! `Z_s(·, b) = vⁿ(s, X_s, b) − vⁿ(s, X_s, I_s)`, the compensator of the
//! control jumps cancels against the `∫Z λ₀ dr` term and one explicit step
//! of length `Δ` reads
//!
//! `vⁿ(s, x, a) = E[vⁿ(s+Δ, X_{s+Δ}, a)] + Δ f(x, a) − Δ n Σ_b λ₀(b) (vⁿ(a) − vⁿ(b))⁺`,
//!
//! where the expectation moves `X` only, with `I = a` frozen. The penalty
//! pulls every `vⁿ(·, a)` down towards `min_b vⁿ(·, b)`, so `vⁿ` decreases
//! in `n` and its limit no longer depends on `a`.

mod grid;
mod regression;
mod solution;

pub use grid::solve_penalized_grid;
pub use regression::{solve_penalized_regression, Basis, RegressionReport, StepFit};
pub use solution::{
    compare_to_primal, constraint_violation, PenalizedScheme, PenalizedSolution, PrimalComparison,
};

use crate::error::{Error, Result};
use crate::randomization::Lambda0;

/// Refuses steps that break the monotonicity of the explicit scheme.
pub(crate) fn check_stability(dt: f64, n: usize, lambda0: &Lambda0) -> Result<()> {
    let load = dt * (n as f64 + 1.0) * lambda0.total();
    if load >= 1.0 {
        return Err(Error::Unstable(format!(
            "time step {dt} with penalty {n} and reference mass {}: need dt (n+1) mass < 1, got {load}",
            lambda0.total()
        )));
    }
    Ok(())
}
