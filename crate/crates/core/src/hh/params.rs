use serde::{Deserialize, Serialize};

use super::channels::{ChannelConfig, ChannelState, Chr2Rates, Family};
use crate::error::{Error, Result};

/// Parameters of the spatial HH/ChR2 model.
///
/// Potentials are in mV relative to rest, conductances in mS/cm², rates in
/// 1/ms, time in ms. The defaults are user-chosen, not measured values: the
/// gating conductances are a tenth of the classical squid-axon ones so the
/// mollified coupling keeps the voltage inside the reversal range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HhParams {
    /// Membrane capacitance (μF/cm²); the diffusivity is `1/c_m`.
    pub c_m: f64,
    pub g_k: f64,
    pub g_na: f64,
    pub g_l: f64,
    pub g_chr2: f64,
    pub v_k: f64,
    pub v_na: f64,
    pub v_l: f64,
    pub v_chr2: f64,
    /// Relative conductance of the O2 state.
    pub rho: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub k_d1: f64,
    pub k_d2: f64,
    pub e12: f64,
    pub e21: f64,
    pub k_r: f64,
    /// Number of channel sites `N`; site `i` sits at `i/(N+1)`.
    pub sites: usize,
    /// Family per site. Empty means ChR2 for `N = 1`, else K, Na, ChR2 cycled.
    pub families: Vec<Family>,
    /// Mollifier half-width.
    pub gamma: f64,
    pub a_max: f64,
    /// Number of equally spaced light levels in `[0, a_max]`.
    pub control_levels: usize,
    pub kappa: f64,
    /// Sine coefficients of the reference potential; zero-padded to `modes`.
    pub v_ref: Vec<f64>,
    pub modes: usize,
    pub horizon: f64,
    pub panels: usize,
    /// Include the `m·h0 ↔ m·h1` flips of the sodium inactivation gate.
    pub h_gate_flips: bool,
    /// Width (mV) of the smooth clamp applied to the rate argument.
    pub clamp_margin: f64,
    /// Added to `max(|V₋|, |V₊|)` to get the cost clipping radius.
    pub cost_margin: f64,
}

impl Default for HhParams {
    fn default() -> Self {
        HhParams {
            c_m: 1.0,
            g_k: 3.6,
            g_na: 12.0,
            g_l: 0.03,
            g_chr2: 6.0,
            v_k: -12.0,
            v_na: 115.0,
            v_l: 10.6,
            v_chr2: 65.0,
            rho: 0.05,
            eps1: 0.5,
            eps2: 0.1,
            k_d1: 0.1,
            k_d2: 0.05,
            e12: 0.053,
            e21: 0.023,
            k_r: 0.004,
            sites: 1,
            families: Vec::new(),
            gamma: 0.1,
            a_max: 1.0,
            control_levels: 3,
            kappa: 0.01,
            v_ref: vec![10.0],
            modes: crate::spectral::DEFAULT_MODES,
            horizon: 5.0,
            panels: crate::spectral::DEFAULT_PANELS,
            h_gate_flips: true,
            clamp_margin: 10.0,
            cost_margin: 10.0,
        }
    }
}

impl HhParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c_m", self.c_m),
            ("gamma", self.gamma),
            ("a_max", self.a_max),
            ("horizon", self.horizon),
            ("clamp_margin", self.clamp_margin),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive and finite"));
            }
        }
        let nonneg = [
            ("g_k", self.g_k),
            ("g_na", self.g_na),
            ("g_l", self.g_l),
            ("g_chr2", self.g_chr2),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("k_d1", self.k_d1),
            ("k_d2", self.k_d2),
            ("e12", self.e12),
            ("e21", self.e21),
            ("k_r", self.k_r),
            ("kappa", self.kappa),
            ("cost_margin", self.cost_margin),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be nonnegative and finite"));
            }
        }
        for (name, v) in [
            ("v_k", self.v_k),
            ("v_na", self.v_na),
            ("v_l", self.v_l),
            ("v_chr2", self.v_chr2),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::param("rho", "must lie in [0, 1]"));
        }
        if self.sites == 0 {
            return Err(Error::param("sites", "need at least one channel site"));
        }
        if !self.families.is_empty() && self.families.len() != self.sites {
            return Err(Error::param("families", "length must equal sites"));
        }
        if self.modes == 0 {
            return Err(Error::param("modes", "need at least one mode"));
        }
        if self.panels < 2 || !self.panels.is_multiple_of(2) {
            return Err(Error::param("panels", "must be even and at least 2"));
        }
        if self.control_levels < 2 {
            return Err(Error::param("control_levels", "need at least 0 and a_max"));
        }
        if self.v_ref.len() > self.modes {
            return Err(Error::param("v_ref", "more coefficients than modes"));
        }
        if self.v_ref.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("v_ref", "coefficients must be finite"));
        }
        let edge = 1.0 / (self.sites as f64 + 1.0);
        if self.gamma >= edge {
            return Err(Error::param(
                "gamma",
                format!("must be below the site-to-boundary distance {edge}"),
            ));
        }
        Ok(())
    }

    pub fn site_families(&self) -> Vec<Family> {
        if !self.families.is_empty() {
            return self.families.clone();
        }
        if self.sites == 1 {
            return vec![Family::Chr2];
        }
        let cycle = [Family::Potassium, Family::Sodium, Family::Chr2];
        (0..self.sites).map(|i| cycle[i % 3]).collect()
    }

    pub fn site_positions(&self) -> Vec<f64> {
        let n = self.sites as f64;
        (1..=self.sites).map(|i| i as f64 / (n + 1.0)).collect()
    }

    /// `[V₋, V₊]`: the hull of the four reversal potentials and 0 (the
    /// Dirichlet boundary value).
    pub fn voltage_bounds(&self) -> (f64, f64) {
        let v = [self.v_k, self.v_na, self.v_l, self.v_chr2, 0.0];
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn controls(&self) -> Vec<f64> {
        let n = self.control_levels - 1;
        (0..=n).map(|j| self.a_max * j as f64 / n as f64).collect()
    }

    /// Closed K channels, inactivated-free Na (`m0h1`) and dark-adapted ChR2.
    pub fn resting_config(&self) -> ChannelConfig {
        ChannelConfig(
            self.site_families()
                .into_iter()
                .map(|f| match f {
                    Family::Potassium => ChannelState::N0,
                    Family::Sodium => ChannelState::M0H1,
                    Family::Chr2 => ChannelState::C1,
                })
                .collect(),
        )
    }

    pub(crate) fn chr2_rates(&self) -> Chr2Rates {
        Chr2Rates {
            eps1: self.eps1,
            eps2: self.eps2,
            k_d1: self.k_d1,
            k_d2: self.k_d2,
            e12: self.e12,
            e21: self.e21,
            k_r: self.k_r,
        }
    }
}
