use std::f64::consts::PI;

use super::channels::{transitions, ChannelConfig, ChannelState, Chr2Rates, Family};
use super::params::HhParams;
use crate::error::{Error, Result};
use crate::pdmp::{AffineDrift, CostBounds, Drift, PdmpModel, RankOneTerm};
use crate::spectral::{NormKind, SpectralField};

/// Unnormalized bump `M(z) = e^{−1/(1−z²)}` on `(−1, 1)`, zero outside.
pub fn mollifier_profile(z: f64) -> f64 {
    if z.abs() < 1.0 {
        (-1.0 / (1.0 - z * z)).exp()
    } else {
        0.0
    }
}

/// Electrode `φ_{zᵢ}(z) = γ⁻¹ M((z − zᵢ)/γ)` in the sine basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    pub center: f64,
    pub field: SpectralField,
    /// `‖φ_{zᵢ}‖_V`; `Φᵢ` is Lipschitz with this constant in the `‖·‖₋₁` norm.
    pub lipschitz: f64,
}

pub fn mollifier(center: f64, gamma: f64, modes: usize, panels: usize) -> Result<Mollifier> {
    if !(gamma > 0.0 && gamma < center.min(1.0 - center)) {
        return Err(Error::param(
            "gamma",
            format!("support of the electrode at {center} must lie inside (0, 1)"),
        ));
    }
    let field = SpectralField::project(
        |z| mollifier_profile((z - center) / gamma) / gamma,
        modes,
        panels,
    )?;
    let lipschitz = field.norm(NormKind::H1V);
    Ok(Mollifier {
        center,
        field,
        lipschitz,
    })
}

/// Identity on `[lo, hi]`, continued by `tanh` saturation of width `margin`.
fn smooth_clamp(u: f64, lo: f64, hi: f64, margin: f64) -> f64 {
    if u > hi {
        hi + margin * ((u - hi) / margin).tanh()
    } else if u < lo {
        lo - margin * ((lo - u) / margin).tanh()
    } else {
        u
    }
}

/// The spatial HH/ChR2 model as a controlled PDMP.
#[derive(Clone, Debug)]
pub struct HhModel {
    params: HhParams,
    families: Vec<Family>,
    electrodes: Vec<Mollifier>,
    controls: Vec<f64>,
    v_ref: SpectralField,
    chr2: Chr2Rates,
    bounds: (f64, f64),
    cost_radius: f64,
    rate_bound: f64,
}

pub fn build_model(params: &HhParams) -> Result<HhModel> {
    HhModel::new(params.clone())
}

impl HhModel {
    pub fn new(params: HhParams) -> Result<Self> {
        params.validate()?;
        let electrodes = params
            .site_positions()
            .into_iter()
            .map(|z| mollifier(z, params.gamma, params.modes, params.panels))
            .collect::<Result<Vec<_>>>()?;
        let mut v_ref = params.v_ref.clone();
        v_ref.resize(params.modes, 0.0);
        let bounds = params.voltage_bounds();
        let mut model = HhModel {
            families: params.site_families(),
            electrodes,
            controls: params.controls(),
            v_ref: SpectralField::new(v_ref)?,
            chr2: params.chr2_rates(),
            bounds,
            cost_radius: bounds.0.abs().max(bounds.1.abs()) + params.cost_margin,
            rate_bound: 0.0,
            params,
        };
        model.rate_bound = model.maximize_rates(4000) * 1.01;
        Ok(model)
    }

    pub fn params(&self) -> &HhParams {
        &self.params
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn electrodes(&self) -> &[Mollifier] {
        &self.electrodes
    }

    pub fn reference(&self) -> &SpectralField {
        &self.v_ref
    }

    /// `[V₋, V₊]`.
    pub fn voltage_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Range `[u_min, u_max]` of the clamped rate argument.
    pub fn rate_window(&self) -> (f64, f64) {
        let m = self.params.clamp_margin;
        (self.bounds.0 - m, self.bounds.1 + m)
    }

    pub fn cost_radius(&self) -> f64 {
        self.cost_radius
    }

    pub fn sites(&self) -> usize {
        self.electrodes.len()
    }

    /// `Φᵢ(v) = ⟨v, φ_{zᵢ}⟩`.
    pub fn phi_i(&self, v: &SpectralField, i: usize) -> Result<f64> {
        v.inner(&self.electrodes[i].field)
    }

    /// Checks that `d` has one state per site from that site's family.
    pub fn check_config(&self, d: &ChannelConfig) -> Result<()> {
        if d.sites().len() != self.sites() {
            return Err(Error::DimensionMismatch {
                expected: self.sites(),
                found: d.sites().len(),
            });
        }
        for (i, (s, f)) in d.sites().iter().zip(&self.families).enumerate() {
            if s.family() != *f {
                return Err(Error::param(
                    format!("config[{i}]"),
                    format!("{} is not a {f:?} state", s.label()),
                ));
            }
        }
        Ok(())
    }

    /// Per-site `(γᵢ, cᵢ)`: reversal-weighted and plain open conductance over `N`.
    fn site_conductance(&self, state: ChannelState) -> (f64, f64) {
        let p = &self.params;
        let mut g = vec![(p.g_l, p.v_l)];
        match state {
            ChannelState::N4 => g.push((p.g_k, p.v_k)),
            ChannelState::M3H1 => g.push((p.g_na, p.v_na)),
            ChannelState::O1 => g.push((p.g_chr2, p.v_chr2)),
            ChannelState::O2 => g.push((p.g_chr2 * p.rho, p.v_chr2)),
            _ => {}
        }
        let n = self.sites() as f64;
        let weighted = g.iter().map(|(c, v)| c * v).sum::<f64>() / n;
        let plain = g.iter().map(|(c, _)| c).sum::<f64>() / n;
        (weighted, plain)
    }

    /// `b_d(v) = Σᵢ (γᵢ − cᵢ Φᵢ(v)) φ_{zᵢ}`; independent of the control.
    pub fn affine_drift(&self, d: &ChannelConfig) -> AffineDrift {
        let mut constant = SpectralField::zeros(self.params.modes);
        let mut terms = Vec::new();
        for (state, e) in d.sites().iter().zip(&self.electrodes) {
            let (gamma, c) = self.site_conductance(*state);
            constant
                .axpy(gamma, &e.field)
                .expect("electrodes share the mode count");
            if c != 0.0 {
                terms.push(RankOneTerm {
                    weight: c,
                    probe: e.field.clone(),
                    emitter: e.field.clone(),
                });
            }
        }
        AffineDrift::new(constant, terms).expect("finite conductances")
    }

    /// Rate argument after the smooth clamp to the physiological window.
    pub fn clamp_potential(&self, u: f64) -> f64 {
        smooth_clamp(u, self.bounds.0, self.bounds.1, self.params.clamp_margin)
    }

    fn check_control(&self, a: f64) -> Result<()> {
        if !(0.0..=self.params.a_max).contains(&a) {
            return Err(Error::InvalidControl(a));
        }
        Ok(())
    }

    /// Outgoing rates of one channel at local potential `u` (clamped here).
    pub fn single_site_rates(
        &self,
        state: ChannelState,
        u: f64,
        a: f64,
    ) -> Result<Vec<(ChannelState, f64)>> {
        self.check_control(a)?;
        Ok(transitions(
            state,
            self.clamp_potential(u),
            a,
            &self.chr2,
            self.params.h_gate_flips,
        ))
    }

    fn site_rows(
        &self,
        v: &SpectralField,
        d: &ChannelConfig,
        a: f64,
    ) -> Vec<Vec<(ChannelState, f64)>> {
        d.sites()
            .iter()
            .zip(&self.electrodes)
            .map(|(s, e)| {
                let u = if s.family() == Family::Chr2 {
                    0.0
                } else {
                    crate::spectral::dot(v.coeffs(), e.field.coeffs())
                };
                transitions(
                    *s,
                    self.clamp_potential(u),
                    a,
                    &self.chr2,
                    self.params.h_gate_flips,
                )
            })
            .collect()
    }

    pub fn total_rate(&self, v: &SpectralField, d: &ChannelConfig, a: f64) -> Result<f64> {
        self.check_control(a)?;
        Ok(self
            .site_rows(v, d, a)
            .iter()
            .flatten()
            .map(|(_, r)| r)
            .sum())
    }

    /// Single-site flips with probabilities `σ/λ`.
    pub fn jump_kernel(
        &self,
        v: &SpectralField,
        d: &ChannelConfig,
        a: f64,
    ) -> Result<Vec<(ChannelConfig, f64)>> {
        self.check_control(a)?;
        let rows = self.site_rows(v, d, a);
        let total: f64 = rows.iter().flatten().map(|(_, r)| r).sum();
        if total <= 0.0 {
            return Err(Error::NoJump);
        }
        Ok(rows
            .into_iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.into_iter()
                    .map(move |(s, r)| (d.with_site(i, s), r / total))
            })
            .collect())
    }

    /// `f̃(v) = ‖ρ(v) − V_ref‖²` where `ρ` is the identity inside the cost
    /// radius and a smooth radial saturation outside.
    pub fn clipped_tracking_error(&self, v: &SpectralField) -> f64 {
        let r = v.norm(NormKind::L2);
        let rk = self.cost_radius;
        let m = self.params.cost_margin.max(1e-9);
        let s = if r > rk {
            (rk + m * ((r - rk) / m).tanh()) / r
        } else {
            1.0
        };
        v.coeffs()
            .iter()
            .zip(self.v_ref.coeffs())
            .map(|(x, y)| (s * x - y).powi(2))
            .sum()
    }

    pub fn running_cost_checked(&self, v: &SpectralField, a: f64) -> Result<f64> {
        self.check_control(a)?;
        Ok(self.params.kappa * self.clipped_tracking_error(v) + a)
    }

    /// Grid maximum over the clamp window of the worst single-site exit rate
    /// at full light, summed over sites.
    fn maximize_rates(&self, points: usize) -> f64 {
        let (lo, hi) = self.rate_window();
        let a = self.params.a_max;
        self.families
            .iter()
            .map(|f| {
                ChannelState::of_family(*f)
                    .iter()
                    .flat_map(|s| {
                        (0..=points).map(move |j| {
                            let u = lo + (hi - lo) * j as f64 / points as f64;
                            transitions(*s, u, a, &self.chr2, self.params.h_gate_flips)
                                .iter()
                                .map(|(_, r)| r)
                                .sum::<f64>()
                        })
                    })
                    .fold(0.0, f64::max)
            })
            .sum()
    }

    /// Every channel configuration, if there are at most `2¹⁶` of them.
    pub fn all_configs(&self) -> Option<Vec<ChannelConfig>> {
        let mut out = vec![Vec::new()];
        for f in &self.families {
            let states = ChannelState::of_family(*f);
            if out.len() * states.len() > 1 << 16 {
                return None;
            }
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    states.iter().map(move |s| {
                        let mut next = prefix.clone();
                        next.push(*s);
                        next
                    })
                })
                .collect();
        }
        Some(out.into_iter().map(ChannelConfig).collect())
    }

    /// Decay rate `π²/C_m` of the slowest heat mode.
    pub fn spectral_gap(&self) -> f64 {
        PI * PI / self.params.c_m
    }
}

impl PdmpModel for HhModel {
    type Mode = ChannelConfig;

    fn field_modes(&self) -> usize {
        self.params.modes
    }

    fn diffusivity(&self) -> f64 {
        1.0 / self.params.c_m
    }

    fn horizon(&self) -> f64 {
        self.params.horizon
    }

    fn controls(&self) -> &[f64] {
        &self.controls
    }

    fn rate_bound(&self) -> f64 {
        self.rate_bound
    }

    fn drift_control_free(&self) -> bool {
        true
    }

    fn drift(&self, mode: &ChannelConfig, _a: f64) -> Drift {
        Drift::Affine(self.affine_drift(mode))
    }

    fn rate(&self, x: &SpectralField, mode: &ChannelConfig, a: f64) -> f64 {
        self.site_rows(x, mode, a.clamp(0.0, self.params.a_max))
            .iter()
            .flatten()
            .map(|(_, r)| r)
            .sum()
    }

    fn kernel(
        &self,
        x: &SpectralField,
        mode: &ChannelConfig,
        a: f64,
    ) -> Result<Vec<(ChannelConfig, f64)>> {
        self.jump_kernel(x, mode, a)
    }

    fn running_cost(&self, x: &SpectralField, _mode: &ChannelConfig, a: f64) -> f64 {
        self.params.kappa * self.clipped_tracking_error(x) + a
    }

    fn terminal_cost(&self, _x: &SpectralField, _mode: &ChannelConfig) -> f64 {
        0.0
    }

    fn cost_bounds(&self) -> CostBounds {
        let r = self.cost_radius + self.params.cost_margin + self.v_ref.norm(NormKind::L2);
        CostBounds {
            running: self.params.kappa * r * r + self.params.a_max,
            terminal: 0.0,
        }
    }

    fn modes(&self) -> Option<Vec<ChannelConfig>> {
        self.all_configs()
    }

    fn mode_label(&self, mode: &ChannelConfig) -> String {
        mode.label()
    }
}
