use rayon::prelude::*;

use super::grid::{LatticeSpec, ValueGrid};
use crate::error::{Error, Result};
use crate::pdmp::{
    integrate_flow, thin_segment, FlowCache, PdmpModel, SegmentSamples, SimConfig, TimeGrid,
};
use crate::quadrature::trapezoid;
use crate::rng;
use crate::spectral::SpectralField;
use crate::stats::Estimate;

/// Step of the backward Bellman ODE inside the one-jump operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    pub step: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { step: 0.01 }
    }
}

/// `(f, λ, ∫ψ dQ)` per control at one flow node.
type NodeData = Vec<(f64, f64, f64)>;

fn node_data<Mo: PdmpModel>(
    model: &Mo,
    psi: &ValueGrid<Mo::Mode>,
    time: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    controls: &[f64],
) -> Result<NodeData> {
    controls
        .iter()
        .map(|&a| {
            let f = model.running_cost(x, mode, a);
            let lambda = model.rate(x, mode, a);
            let mut mean = 0.0;
            if lambda > 0.0 {
                for (y, p) in model.kernel(x, mode, a)? {
                    mean += p * psi.interpolate(time, x, &y)?;
                }
            }
            Ok((f, lambda, mean))
        })
        .collect()
}

/// RK4 for `−w′ = min_a {f_a + λ_a (ψ̄_a − w)}` from `w(S) = w_end` back to
/// `s = 0`. `nodes[j]` holds the data at `s = j h/2`. Ties go to the lowest
/// control index.
fn bellman_backward(nodes: &[NodeData], h: f64, w_end: f64) -> f64 {
    let rhs = |j: usize, w: f64| {
        nodes[j]
            .iter()
            .map(|(f, l, m)| f + l * (m - w))
            .fold(f64::INFINITY, |acc, v| if v < acc { v } else { acc })
    };
    let steps = (nodes.len() - 1) / 2;
    let mut w = w_end;
    for n in (0..steps).rev() {
        let (lo, mid, hi) = (2 * n, 2 * n + 1, 2 * n + 2);
        let k1 = rhs(hi, w);
        let k2 = rhs(mid, w + 0.5 * h * k1);
        let k3 = rhs(mid, w + 0.5 * h * k2);
        let k4 = rhs(lo, w + h * k3);
        w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    w
}

fn flow_nodes<Mo: PdmpModel>(
    model: &Mo,
    cache: &FlowCache<Mo::Mode>,
    x: &SpectralField,
    mode: &Mo::Mode,
    a: f64,
    span: f64,
    steps: usize,
) -> Result<Vec<SpectralField>> {
    let dt = span / (2 * steps) as f64;
    match cache.propagator(model, mode, a) {
        Some(p) => {
            let mut out = Vec::with_capacity(2 * steps + 1);
            out.push(x.clone());
            for _ in 0..2 * steps {
                let next = p.advance(out.last().expect("nonempty"), dt);
                if !next.is_finite() {
                    return Err(Error::FlowBlowUp {
                        last_valid: (out.len() - 1) as f64 * dt,
                    });
                }
                out.push(next);
            }
            Ok(out)
        }
        None => integrate_flow(model, x, mode, &|_| a, span, 2 * steps),
    }
}

pub(crate) fn apply_with_cache<Mo: PdmpModel>(
    model: &Mo,
    cache: &FlowCache<Mo::Mode>,
    psi: &ValueGrid<Mo::Mode>,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    quad: &QuadConfig,
) -> Result<f64> {
    let span = model.horizon() - t;
    if span < -1e-12 {
        return Err(Error::param("t", "after the horizon"));
    }
    if span <= 0.0 {
        return Ok(model.terminal_cost(x, mode));
    }
    let steps = ((span / quad.step).ceil() as usize).max(1);
    let h = span / steps as f64;
    let controls = model.controls();
    let solve_for = |group: &[f64]| -> Result<f64> {
        let fields = flow_nodes(model, cache, x, mode, group[0], span, steps)?;
        let nodes = fields
            .iter()
            .enumerate()
            .map(|(j, y)| node_data(model, psi, t + 0.5 * h * j as f64, y, mode, group))
            .collect::<Result<Vec<_>>>()?;
        let end = fields.last().expect("nonempty");
        Ok(bellman_backward(&nodes, h, model.terminal_cost(end, mode)))
    };
    if model.drift_control_free() {
        solve_for(controls)
    } else {
        // Constant controls only: an upper bound on the inner infimum.
        let mut best = f64::INFINITY;
        for a in controls {
            let v = solve_for(std::slice::from_ref(a))?;
            if v < best {
                best = v;
            }
        }
        Ok(best)
    }
}

/// One application of the one-jump operator
/// `Tψ(t,x) = inf_u ∫₀^{T−t} χᵘ(s)(f + λ∫ψ(t+s,y)Q(dy)) ds + χᵘ(T−t) g`,
/// `χᵘ = e^{−∫λ}`.
///
/// With a control-free flow the infimum over open-loop controls is solved
/// exactly through the scalar Bellman ODE along the flow. Otherwise only
/// constant controls are compared and the result is an upper bound.
pub fn apply_t<Mo: PdmpModel>(
    model: &Mo,
    psi: &ValueGrid<Mo::Mode>,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    quad: &QuadConfig,
) -> Result<f64> {
    apply_with_cache(model, &FlowCache::new(), psi, t, x, mode, quad)
}

/// Fixed-point iteration `V_{n+1} = T V_n` from `V₀ ≡ 0` on the lattice
/// until the sup-norm change is at most `tol`. The residual history is
/// stored on the returned grid. Three consecutive increases of the residual
/// abort with [`Error::NonContraction`].
pub fn solve<Mo: PdmpModel>(
    model: &Mo,
    spec: &LatticeSpec<Mo::Mode>,
    tol: f64,
    max_iter: usize,
    quad: &QuadConfig,
) -> Result<ValueGrid<Mo::Mode>> {
    let mut grid = ValueGrid::zeros(spec, model.horizon(), model.field_modes())?;
    let cache = FlowCache::new();
    let last = grid.times().len() - 1;
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..max_iter {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (ti, mi, pi) = grid.unflat(idx);
                let x = grid.point_field(pi);
                let mode = &grid.modes()[mi];
                if ti == last {
                    Ok(model.terminal_cost(&x, mode))
                } else {
                    apply_with_cache(model, &cache, &grid, grid.times()[ti], &x, mode, quad)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let residual = values
            .iter()
            .zip(grid.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        grid.values_mut().copy_from_slice(&values);
        history.push(residual);
        let n = history.len();
        if n >= 4 && (n - 3..n).all(|i| history[i] > history[i - 1]) {
            return Err(Error::NonContraction(history));
        }
        if residual <= tol {
            grid.residuals = history;
            return Ok(grid);
        }
    }
    Err(Error::Unstable(format!(
        "value iteration did not reach tol {tol} in {max_iter} iterations; residuals {history:?}"
    )))
}

/// Monte Carlo check of the dynamic programming principle over the first
/// jump: `min_a E[∫_t^{T₁∧T} f ds + V(T₁∧T, X_{T₁∧T})] − V(t, x)` with the
/// first segment under the constant control `a`. The post-jump value is
/// averaged over the kernel. All controls share the random numbers of
/// stream `(seed, "dpp", i)`.
pub fn dpp_residual<Mo: PdmpModel>(
    grid: &ValueGrid<Mo::Mode>,
    model: &Mo,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    if n_paths < 2 {
        return Err(Error::param("n_paths", "need at least two paths"));
    }
    let sim = SimConfig::default();
    let cache = FlowCache::new();
    let horizon = model.horizon();
    let mut best: Option<Estimate> = None;
    for &a in model.controls() {
        let samples = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(seed, "dpp", i as u64);
                let mut rec = SegmentSamples::default();
                let end = thin_segment(
                    x,
                    t,
                    horizon,
                    model.rate_bound(),
                    TimeGrid {
                        origin: t,
                        step: sim.grid_step,
                    },
                    &mut |y, from, to| {
                        cache.advance(
                            model,
                            mode,
                            y,
                            from - t,
                            to - t,
                            &|_| a,
                            true,
                            sim.max_substep,
                        )
                    },
                    &mut |_, y| model.rate(y, mode, a),
                    &mut rng,
                    Some(&mut rec),
                )?;
                let f: Vec<f64> = rec
                    .fields
                    .iter()
                    .map(|y| model.running_cost(y, mode, a))
                    .collect();
                let running = trapezoid(&rec.times, &f);
                let tail = match end.event {
                    None => model.terminal_cost(&end.field, mode),
                    Some(tj) => {
                        let mut v = 0.0;
                        for (y, p) in model.kernel(&end.field, mode, a)? {
                            v += p * grid.interpolate(tj, &end.field, &y)?;
                        }
                        v
                    }
                };
                Ok(running + tail)
            })
            .collect::<Result<Vec<f64>>>()?;
        let est = Estimate::from_samples(&samples);
        if best.as_ref().is_none_or(|b| est.mean < b.mean) {
            best = Some(est);
        }
    }
    let best = best.ok_or_else(|| Error::param("controls", "empty control set"))?;
    let v = grid.interpolate(t, x, mode)?;
    Ok(Estimate {
        mean: best.mean - v,
        ..best
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primal::{brute_force_value, Axis, BruteQuad};
    use crate::toy::ToyModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lattice(time_steps: usize, points: usize, modes: usize) -> LatticeSpec<usize> {
        LatticeSpec {
            start_time: 0.0,
            time_steps,
            axes: vec![Axis::new(0.0, 1.0, points).unwrap()],
            modes: (0..modes).collect(),
        }
    }

    fn x(v: f64) -> SpectralField {
        SpectralField::new(vec![v]).unwrap()
    }

    fn indicator_toy(rate: f64, horizon: f64) -> ToyModel {
        ToyModel {
            horizon,
            ..ToyModel::constant_rate(rate, horizon)
        }
    }

    #[test]
    fn zero_costs_give_zero() {
        let mut toy = ToyModel::two_mode_switch();
        toy.mode_cost = vec![0.0, 0.0];
        toy.field_cost = 0.0;
        toy.terminal = vec![0.0, 0.0];
        let psi = ValueGrid::zeros(&lattice(4, 3, 2), 1.0, 1).unwrap();
        assert_eq!(
            apply_t(&toy, &psi, 0.2, &x(0.5), &0, &QuadConfig::default()).unwrap(),
            0.0
        );
        let v = solve(&toy, &lattice(4, 3, 2), 1e-12, 5, &QuadConfig::default()).unwrap();
        assert_eq!(v.residuals, vec![0.0]);
    }

    #[test]
    fn no_jumps_integrates_the_cost() {
        let mut toy = indicator_toy(0.0, 2.0);
        toy.mode_cost = vec![1.0, 1.0];
        let psi = ValueGrid::zeros(&lattice(4, 3, 2), 2.0, 1).unwrap();
        let v = apply_t(&toy, &psi, 0.0, &x(0.0), &1, &QuadConfig::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_jump_closed_form() {
        let toy = indicator_toy(1.0, 1.5);
        let psi = ValueGrid::zeros(&lattice(3, 2, 2), 1.5, 1).unwrap();
        for t in [0.0, 0.4, 1.2] {
            let v = apply_t(&toy, &psi, t, &x(0.0), &0, &QuadConfig::default()).unwrap();
            let exact = 1.0 - (-(1.5 - t)).exp();
            assert!((v - exact).abs() < 1e-10, "{t}: {v} vs {exact}");
        }
    }

    #[test]
    fn control_free_cost_gives_linear_value() {
        let mut toy = ToyModel::two_mode_switch();
        toy.mode_cost = vec![0.8, 0.8];
        toy.field_cost = 0.0;
        toy.terminal = vec![0.0, 0.0];
        let v = solve(&toy, &lattice(5, 3, 2), 1e-12, 50, &QuadConfig::default()).unwrap();
        for idx in 0..v.len() {
            let (ti, _, _) = v.unflat(idx);
            assert!((v.values()[idx] - 0.8 * (1.0 - v.times()[ti])).abs() < 1e-10);
        }
    }

    #[test]
    fn operator_is_monotone() {
        let toy = ToyModel::two_mode_switch();
        let spec = lattice(5, 6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let quad = QuadConfig::default();
        for _ in 0..20 {
            let mut lo = ValueGrid::zeros(&spec, 1.0, 1).unwrap();
            let mut hi = lo.clone();
            for (a, b) in lo.values_mut().iter_mut().zip(hi.values_mut()) {
                *a = rng.random_range(0.0..2.0);
                *b = *a + rng.random_range(0.0..0.5);
            }
            let t = rng.random_range(0.0..1.0);
            let y = x(rng.random_range(0.0..1.0));
            let m = rng.random_range(0..2);
            let tl = apply_t(&toy, &lo, t, &y, &m, &quad).unwrap();
            let th = apply_t(&toy, &hi, t, &y, &m, &quad).unwrap();
            assert!(tl <= th + 1e-12);
        }
    }

    #[test]
    fn toy_value_iteration_matches_brute_force() {
        let toy = ToyModel::two_mode_switch();
        let v = solve(&toy, &lattice(20, 21, 2), 1e-10, 60, &QuadConfig::default()).unwrap();
        let oracle = brute_force_value(&toy, 4, BruteQuad::default(), 1e-3).unwrap();
        let bound = toy.cost_bounds().value_bound(1.0);
        let mut worst: f64 = 0.0;
        for idx in 0..v.len() {
            let (ti, mi, pi) = v.unflat(idx);
            let xv = v.features(pi)[0];
            let val = v.values()[idx];
            assert!((0.0..=bound).contains(&val));
            worst = worst.max((val - oracle.value(v.times()[ti], xv, mi)).abs());
        }
        assert!(worst <= 1e-3, "sup error {worst}");
        let r = &v.residuals;
        let n = r.len();
        assert!(n >= 6);
        assert!((n - 5..n).all(|i| r[i] < r[i - 1]));
    }

    #[test]
    fn dpp_holds_on_the_toy() {
        let toy = ToyModel::two_mode_switch();
        let tol = 1e-8;
        let v = solve(&toy, &lattice(20, 21, 2), tol, 60, &QuadConfig::default()).unwrap();
        for (t, m) in [(0.0, 0usize), (0.5, 1)] {
            let r = dpp_residual(&v, &toy, t, &x(0.5), &m, 2000, 7).unwrap();
            assert!(r.mean.abs() <= 3.0 * r.stderr + 2.0 * tol + 1e-3, "{r:?}");
        }
    }

    #[test]
    fn deterministic_dpp_residual_is_interpolation_error() {
        let mut toy = ToyModel::two_mode_switch();
        toy.rates = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let v = solve(&toy, &lattice(20, 21, 2), 1e-12, 10, &QuadConfig::default()).unwrap();
        let r = dpp_residual(&v, &toy, 0.0, &x(0.5), &1, 10, 3).unwrap();
        assert_eq!(r.stderr, 0.0);
        assert!(r.mean.abs() < 1e-4);
    }
}
