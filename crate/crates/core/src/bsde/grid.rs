use rayon::prelude::*;

use super::check_stability;
use super::solution::{PenalizedScheme, PenalizedSolution};
use crate::error::{Error, Result};
use crate::pdmp::{integrate_flow, FlowCache, PdmpModel};
use crate::primal::{LatticeSpec, ValueGrid};
use crate::randomization::Lambda0;
use crate::spectral::SpectralField;

pub(crate) fn flow_by<Mo: PdmpModel>(
    model: &Mo,
    cache: &FlowCache<Mo::Mode>,
    x: &SpectralField,
    mode: &Mo::Mode,
    a: f64,
    dt: f64,
) -> Result<SpectralField> {
    match cache.propagator(model, mode, a) {
        Some(p) => {
            let y = p.advance(x, dt);
            if y.is_finite() {
                Ok(y)
            } else {
                Err(Error::FlowBlowUp { last_valid: 0.0 })
            }
        }
        None => {
            let path = integrate_flow(model, x, mode, &|_| a, dt, 8)?;
            Ok(path.into_iter().last().expect("nonempty path"))
        }
    }
}

/// Penalized value and penalty density at one state of slice `ti`, for
/// control index `j`: `(vⁿ − Δ n Σ λ₀ (vⁿ(a) − vⁿ(b))⁺, Kⁿ + Δ n Σ λ₀ (·)⁺)`.
fn penalized_at<M: Clone + Eq + std::hash::Hash>(
    values: &[ValueGrid<M>],
    mass: &[ValueGrid<M>],
    lambda0: &Lambda0,
    n: f64,
    dt: f64,
    t: f64,
    x: &SpectralField,
    mode: &M,
    j: usize,
) -> Result<(f64, f64)> {
    let v = values
        .iter()
        .map(|g| g.interpolate(t, x, mode))
        .collect::<Result<Vec<_>>>()?;
    let pen: f64 = v
        .iter()
        .zip(lambda0.weights())
        .map(|(vb, w)| w * (v[j] - vb).max(0.0))
        .sum::<f64>()
        * n;
    Ok((v[j] - dt * pen, mass[j].interpolate(t, x, mode)? + dt * pen))
}

/// Explicit backward scheme for `vⁿ` on a lattice, one grid per control.
///
/// Each step moves `X` by the one-jump expansion over `Δ`: no jump with
/// probability `e^{−λΔ}` (flow over `Δ`), otherwise one jump at the
/// midpoint, with rate, kernel and running cost read at the half-step flow.
/// The penalty is applied at the end of the step, which keeps the scheme
/// monotone in `vⁿ` and nonincreasing in `n` as long as `Δ n λ₀(A) ≤ 1`.
/// `lattice.time_steps` must equal `scheme.time_steps`.
pub fn solve_penalized_grid<Mo: PdmpModel>(
    model: &Mo,
    lambda0: &Lambda0,
    scheme: &PenalizedScheme,
    lattice: &LatticeSpec<Mo::Mode>,
) -> Result<PenalizedSolution<Mo::Mode>> {
    let controls = model.controls().to_vec();
    if lambda0.len() != controls.len() {
        return Err(Error::DimensionMismatch {
            expected: controls.len(),
            found: lambda0.len(),
        });
    }
    if lattice.time_steps != scheme.time_steps {
        return Err(Error::param(
            "time_steps",
            format!(
                "lattice has {} steps, scheme {}",
                lattice.time_steps, scheme.time_steps
            ),
        ));
    }
    let horizon = model.horizon();
    let mut values = Vec::with_capacity(controls.len());
    for _ in &controls {
        values.push(ValueGrid::zeros(lattice, horizon, model.field_modes())?);
    }
    let mut mass = values.clone();
    let times = values[0].times().to_vec();
    let dt = (horizon - lattice.start_time) / scheme.time_steps as f64;
    check_stability(dt, scheme.n_penalty, lambda0)?;
    let n = scheme.n_penalty as f64;
    let per_slice = values[0].modes().len() * values[0].points_per_slice();
    let na = controls.len();
    let last = times.len() - 1;

    let terminal: Vec<f64> = (0..per_slice)
        .into_par_iter()
        .map(|k| {
            let (_, mi, pi) = values[0].unflat(values[0].flat(last, 0, 0) + k);
            let g = &values[0];
            model.terminal_cost(&g.point_field(pi), &g.modes()[mi])
        })
        .collect();
    for g in values.iter_mut() {
        let base = g.flat(last, 0, 0);
        g.values_mut()[base..base + per_slice].copy_from_slice(&terminal);
    }

    let cache = FlowCache::new();
    for ti in (0..last).rev() {
        let t_next = times[ti + 1];
        let slice: Vec<(f64, f64)> = (0..per_slice * na)
            .into_par_iter()
            .map(|idx| {
                let (j, k) = (idx / per_slice, idx % per_slice);
                let g = &values[0];
                let (_, mi, pi) = g.unflat(g.flat(ti, 0, 0) + k);
                let (x, d, a) = (g.point_field(pi), &g.modes()[mi], controls[j]);
                let mid = flow_by(model, &cache, &x, d, a, 0.5 * dt)?;
                let end = flow_by(model, &cache, &mid, d, a, 0.5 * dt)?;
                let lambda = model.rate(&mid, d, a);
                let p = -(-lambda * dt).exp_m1();
                let stay = penalized_at(&values, &mass, lambda0, n, dt, t_next, &end, d, j)?;
                let (mut w, mut k_mass) = ((1.0 - p) * stay.0, (1.0 - p) * stay.1);
                if p > 0.0 {
                    for (y, q) in model.kernel(&mid, d, a)? {
                        let after = flow_by(model, &cache, &mid, &y, a, 0.5 * dt)?;
                        let (wy, ky) =
                            penalized_at(&values, &mass, lambda0, n, dt, t_next, &after, &y, j)?;
                        w += p * q * wy;
                        k_mass += p * q * ky;
                    }
                }
                Ok((w + dt * model.running_cost(&mid, d, a), k_mass))
            })
            .collect::<Result<Vec<_>>>()?;
        for j in 0..na {
            let base = values[j].flat(ti, 0, 0);
            for k in 0..per_slice {
                values[j].values_mut()[base + k] = slice[j * per_slice + k].0;
                mass[j].values_mut()[base + k] = slice[j * per_slice + k].1;
            }
        }
    }
    Ok(PenalizedSolution {
        n_penalty: scheme.n_penalty,
        controls,
        values,
        penalty_mass: mass,
        regression: None,
    })
}
