//! Small finite-mode models with a scalar field, used as verification
//! instruments for the solvers.
//!
//! The field is a single sine coefficient `x` with flow
//! `ẋ = −cπ² x + driftᵢ` in mode `i`, so it is solvable in closed form.
//! Rates and kernels do not depend on `x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdmp::{AffineDrift, CostBounds, Drift, PdmpModel};
use crate::spectral::SpectralField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyModel {
    pub diffusivity: f64,
    pub horizon: f64,
    pub controls: Vec<f64>,
    /// Constant forcing of the field per mode.
    pub drift: Vec<f64>,
    /// `rates[mode][j]`: jump rate in `mode` under `controls[j]`.
    pub rates: Vec<Vec<f64>>,
    /// `kernel[mode][target]`: post-jump distribution, independent of `a`.
    pub kernel: Vec<Vec<f64>>,
    /// Mode part of the running cost.
    pub mode_cost: Vec<f64>,
    /// Coefficient `q` of the field part `q x²` of the running cost.
    pub field_cost: f64,
    /// Coefficient of `a` in the running cost.
    pub control_cost: f64,
    pub terminal: Vec<f64>,
}

impl ToyModel {
    /// Two modes flipping into each other. Mode 0 is expensive; light
    /// speeds up the escape from mode 0 and the return from mode 1. The
    /// field cost keeps the flow visible in the value function, and
    /// `[0, 1]` is invariant for the flow.
    pub fn two_mode_switch() -> Self {
        ToyModel {
            diffusivity: 0.05,
            horizon: 1.0,
            controls: vec![0.0, 1.0],
            drift: vec![0.0, 0.3],
            rates: vec![vec![0.2, 0.5], vec![0.1, 0.4]],
            kernel: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            mode_cost: vec![1.0, 0.0],
            field_cost: 0.5,
            control_cost: 0.0,
            terminal: vec![0.5, 0.0],
        }
    }

    /// Two flipping modes with one control and a single jump rate.
    pub fn constant_rate(rate: f64, horizon: f64) -> Self {
        ToyModel {
            diffusivity: 0.0,
            horizon,
            controls: vec![0.0],
            drift: vec![0.0, 0.0],
            rates: vec![vec![rate], vec![rate]],
            kernel: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            mode_cost: vec![1.0, 0.0],
            field_cost: 0.0,
            control_cost: 0.0,
            terminal: vec![0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.drift.len();
        if n == 0 {
            return Err(Error::param("drift", "need at least one mode"));
        }
        if self.controls.is_empty() {
            return Err(Error::param("controls", "need at least one control"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::param("horizon", "must be positive"));
        }
        if !(self.diffusivity >= 0.0) {
            return Err(Error::param("diffusivity", "must be nonnegative"));
        }
        let rows_ok = |rows: &Vec<Vec<f64>>, width: usize| {
            rows.len() == n
                && rows
                    .iter()
                    .all(|r| r.len() == width && r.iter().all(|v| *v >= 0.0 && v.is_finite()))
        };
        if !rows_ok(&self.rates, self.controls.len()) {
            return Err(Error::param(
                "rates",
                "one nonnegative rate per (mode, control)",
            ));
        }
        if !rows_ok(&self.kernel, n) {
            return Err(Error::param(
                "kernel",
                "one nonnegative row of width |modes| per mode",
            ));
        }
        for (i, row) in self.kernel.iter().enumerate() {
            let has_rate = self.rates[i].iter().any(|r| *r > 0.0);
            if has_rate && (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::param(
                    "kernel",
                    format!("row {i} does not sum to one"),
                ));
            }
        }
        if self.mode_cost.len() != n || self.terminal.len() != n {
            return Err(Error::param("mode_cost", "one entry per mode"));
        }
        let costs = self.mode_cost.iter().chain(&self.terminal);
        if costs.copied().any(|c| c < 0.0) || self.field_cost < 0.0 || self.control_cost < 0.0 {
            return Err(Error::param("mode_cost", "costs must be nonnegative"));
        }
        Ok(())
    }

    pub fn mode_count(&self) -> usize {
        self.drift.len()
    }

    /// Decay rate `cπ²` of the field.
    pub fn decay(&self) -> f64 {
        self.diffusivity * PI * PI
    }

    /// Closed-form flow `x(s)` in `mode`.
    pub fn flow(&self, x: f64, mode: usize, s: f64) -> f64 {
        let k = self.decay();
        let b = self.drift[mode];
        if k == 0.0 {
            x + b * s
        } else {
            let e = (-k * s).exp();
            x * e + b / k * (1.0 - e)
        }
    }

    fn control_index(&self, a: f64) -> Option<usize> {
        self.controls.iter().position(|c| (c - a).abs() <= 1e-12)
    }

    pub fn rate_of(&self, mode: usize, a: f64) -> f64 {
        match self.control_index(a) {
            Some(j) => self.rates[mode][j],
            None => f64::NAN,
        }
    }

    pub fn running_cost_of(&self, x: f64, mode: usize, a: f64) -> f64 {
        self.mode_cost[mode] + self.field_cost * x * x + self.control_cost * a
    }

    /// Largest `|x|` reachable from `|x₀| ≤ start` within the horizon.
    pub fn field_reach(&self, start: f64) -> f64 {
        let b = self.drift.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let k = self.decay();
        if k == 0.0 {
            start + b * self.horizon
        } else {
            start.max(b / k).max(start + b * self.horizon.min(1.0 / k))
        }
    }
}

impl PdmpModel for ToyModel {
    type Mode = usize;

    fn field_modes(&self) -> usize {
        1
    }

    fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn controls(&self) -> &[f64] {
        &self.controls
    }

    fn rate_bound(&self) -> f64 {
        self.rates.iter().flatten().fold(0.0, |m, r| m.max(*r))
    }

    fn drift_control_free(&self) -> bool {
        true
    }

    fn drift(&self, mode: &usize, _a: f64) -> Drift {
        let constant = SpectralField::new(vec![self.drift[*mode]]).expect("finite drift");
        Drift::Affine(AffineDrift::new(constant, Vec::new()).expect("no terms"))
    }

    fn rate(&self, _x: &SpectralField, mode: &usize, a: f64) -> f64 {
        self.rate_of(*mode, a)
    }

    fn kernel(&self, _x: &SpectralField, mode: &usize, _a: f64) -> Result<Vec<(usize, f64)>> {
        let row: Vec<(usize, f64)> = self.kernel[*mode]
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .collect();
        if row.is_empty() {
            return Err(Error::EmptyKernel);
        }
        Ok(row)
    }

    fn running_cost(&self, x: &SpectralField, mode: &usize, a: f64) -> f64 {
        self.running_cost_of(x.coeffs()[0], *mode, a)
    }

    fn terminal_cost(&self, _x: &SpectralField, mode: &usize) -> f64 {
        self.terminal[*mode]
    }

    /// Valid on the reachable set from `|x₀| ≤ 1`.
    fn cost_bounds(&self) -> CostBounds {
        let r = self.field_reach(1.0);
        let a = self.controls.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        CostBounds {
            running: self.mode_cost.iter().fold(0.0f64, |m, c| m.max(*c))
                + self.field_cost * r * r
                + self.control_cost * a,
            terminal: self.terminal.iter().fold(0.0f64, |m, c| m.max(*c)),
        }
    }

    fn modes(&self) -> Option<Vec<usize>> {
        Some((0..self.mode_count()).collect())
    }

    fn mode_label(&self, mode: &usize) -> String {
        mode.to_string()
    }
}
