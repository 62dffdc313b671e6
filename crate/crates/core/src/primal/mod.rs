//! Value function by fixed-point iteration of the one-jump operator, with a
//! Monte Carlo check of the dynamic programming principle and a brute-force
//! oracle for toy models.

mod brute;
mod grid;
mod operator;

pub use brute::{brute_force_value, BruteForce, BruteQuad, BruteRow};
pub use grid::{Axis, LatticeSpec, ValueGrid};
pub use operator::{apply_t, dpp_residual, solve, QuadConfig};
