use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use super::flow::FlowCache;
use super::model::PdmpModel;
use crate::error::{Error, Result};
use crate::quadrature::trapezoid;
use crate::rng;
use crate::spectral::{PointEvaluator, SpectralField};
use crate::stats::Estimate;

/// Open-loop control re-anchored at every jump: the control applied at time
/// `s` in a segment that started at `T_n` from `(x_n, d_n)` is
/// `control(s - T_n, x_n, d_n)`.
pub trait OpenLoopPolicy<M>: Sync {
    fn control(&self, elapsed: f64, field: &crate::SpectralField, mode: &M) -> f64;

    /// True when the control does not vary with elapsed time.
    fn is_constant(&self) -> bool {
        false
    }
}

/// The constant control `a`.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub f64);

impl<M> OpenLoopPolicy<M> for ConstantPolicy {
    fn control(&self, _: f64, _: &SpectralField, _: &M) -> f64 {
        self.0
    }

    fn is_constant(&self) -> bool {
        true
    }
}

/// Policy backed by a closure.
pub struct FnPolicy<F>(pub F);

impl<M, F> OpenLoopPolicy<M> for FnPolicy<F>
where
    F: Fn(f64, &SpectralField, &M) -> f64 + Sync,
{
    fn control(&self, elapsed: f64, field: &SpectralField, mode: &M) -> f64 {
        (self.0)(elapsed, field, mode)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Recording step of the global time sub-grid (ms).
    pub grid_step: f64,
    /// Largest substep of the stepped integrator for non-affine drifts.
    pub max_substep: f64,
    /// Jumps allowed before the path is declared explosive.
    pub jump_cap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grid_step: 0.01,
            max_substep: 0.001,
            jump_cap: 1_000_000,
        }
    }
}

/// Uniform recording grid `origin + k·step`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TimeGrid {
    pub origin: f64,
    pub step: f64,
}

impl TimeGrid {
    /// First grid time strictly after `t` (up to a tolerance).
    fn next_after(&self, t: f64) -> f64 {
        let k = ((t - self.origin) / self.step + 1e-9).floor() + 1.0;
        self.origin + k * self.step
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct SegmentSamples {
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
}

/// Outcome of a thinned segment.
pub(crate) struct SegmentEnd {
    /// Time of the accepted event, `None` when the segment reached `t_end`.
    pub event: Option<f64>,
    pub field: SpectralField,
}

/// Runs one flow segment from `(t0, x0)` and draws the first event of a point
/// process with intensity `rate(t, x)` by thinning against `bound`. Fields are
/// recorded at `t0`, on every grid point before the event, and at the event
/// (or `t_end`).
pub(crate) fn thin_segment<R: Rng>(
    x0: &SpectralField,
    t0: f64,
    t_end: f64,
    bound: f64,
    grid: TimeGrid,
    advance: &mut dyn FnMut(&SpectralField, f64, f64) -> Result<SpectralField>,
    rate: &mut dyn FnMut(f64, &SpectralField) -> f64,
    rng: &mut R,
    mut record: Option<&mut SegmentSamples>,
) -> Result<SegmentEnd> {
    if let Some(r) = record.as_deref_mut() {
        r.times.push(t0);
        r.fields.push(x0.clone());
    }
    let clock = if bound > 0.0 {
        Some(Exp::new(bound).map_err(|e| Error::param("rate_bound", e.to_string()))?)
    } else {
        None
    };
    let mut t = t0;
    let mut x = x0.clone();
    let mut next_grid = grid.next_after(t0);
    loop {
        let candidate = match &clock {
            Some(c) => t + c.sample(rng),
            None => f64::INFINITY,
        };
        let stop = candidate.min(t_end);
        while next_grid < stop - 1e-12 {
            x = advance(&x, t, next_grid)?;
            t = next_grid;
            if let Some(r) = record.as_deref_mut() {
                r.times.push(t);
                r.fields.push(x.clone());
            }
            next_grid = grid.next_after(t);
        }
        x = advance(&x, t, stop)?;
        t = stop;
        if candidate >= t_end {
            if let Some(r) = record.as_deref_mut() {
                r.times.push(t);
                r.fields.push(x.clone());
            }
            return Ok(SegmentEnd {
                event: None,
                field: x,
            });
        }
        let lambda = rate(t, &x);
        if lambda > bound * (1.0 + 1e-9) {
            return Err(Error::RateBoundViolated {
                rate: lambda,
                bound,
            });
        }
        if rng.random::<f64>() * bound < lambda {
            if let Some(r) = record.as_deref_mut() {
                r.times.push(t);
                r.fields.push(x.clone());
            }
            return Ok(SegmentEnd {
                event: Some(t),
                field: x,
            });
        }
    }
}

/// One inter-jump piece of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajSegment<M> {
    pub mode: M,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
    pub controls: Vec<f64>,
}

/// A simulated path on `[t, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<M> {
    pub start_time: f64,
    pub segments: Vec<TrajSegment<M>>,
    pub jump_times: Vec<f64>,
    pub jump_marks: Vec<M>,
}

impl<M> Trajectory<M> {
    pub fn terminal_field(&self) -> &SpectralField {
        self.segments
            .last()
            .and_then(|s| s.fields.last())
            .expect("trajectory has at least one sample")
    }

    pub fn terminal_mode(&self) -> &M {
        &self.segments.last().expect("trajectory has a segment").mode
    }

    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }

    /// All `(time, field, mode, control)` samples in order.
    pub fn samples(&self) -> impl Iterator<Item = (f64, &SpectralField, &M, f64)> {
        self.segments.iter().flat_map(|s| {
            s.times
                .iter()
                .zip(&s.fields)
                .zip(&s.controls)
                .map(move |((t, x), a)| (*t, x, &s.mode, *a))
        })
    }
}

/// Time to the next jump from `(x, mode)` under `control(elapsed)`, or `None`
/// when no jump occurs within `horizon_remaining`.
pub fn sample_jump_time<Mo: PdmpModel, R: Rng>(
    model: &Mo,
    x: &SpectralField,
    mode: &Mo::Mode,
    control: &dyn Fn(f64) -> f64,
    rng: &mut R,
    horizon_remaining: f64,
) -> Result<Option<f64>> {
    let cache = FlowCache::new();
    let cfg = SimConfig::default();
    let grid = TimeGrid {
        origin: 0.0,
        step: f64::INFINITY,
    };
    let end = thin_segment(
        x,
        0.0,
        horizon_remaining,
        model.rate_bound(),
        grid,
        &mut |y, from, to| cache.advance(model, mode, y, from, to, control, false, cfg.max_substep),
        &mut |s, y| model.rate(y, mode, control(s)),
        rng,
        None,
    )?;
    Ok(end.event)
}

/// Draws the post-jump mode from the kernel row at `(x, mode, a)`.
pub fn sample_jump_target<Mo: PdmpModel, R: Rng>(
    model: &Mo,
    x: &SpectralField,
    mode: &Mo::Mode,
    a: f64,
    rng: &mut R,
) -> Result<Mo::Mode> {
    let row = model.kernel(x, mode, a)?;
    pick(&row, rng)
}

pub(crate) fn pick<M: Clone, R: Rng>(row: &[(M, f64)], rng: &mut R) -> Result<M> {
    let last = row.last().ok_or(Error::EmptyKernel)?;
    let total: f64 = row.iter().map(|(_, p)| p).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (m, p) in row {
        acc += p;
        if u < acc {
            return Ok(m.clone());
        }
    }
    Ok(last.0.clone())
}

pub(crate) fn simulate_with_cache<Mo, P, R>(
    model: &Mo,
    cache: &FlowCache<Mo::Mode>,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    policy: &P,
    rng: &mut R,
    cfg: &SimConfig,
) -> Result<Trajectory<Mo::Mode>>
where
    Mo: PdmpModel,
    P: OpenLoopPolicy<Mo::Mode> + ?Sized,
    R: Rng,
{
    let horizon = model.horizon();
    if t > horizon {
        return Err(Error::param(
            "t",
            format!("start {t} after horizon {horizon}"),
        ));
    }
    if x.modes() != model.field_modes() {
        return Err(Error::DimensionMismatch {
            expected: model.field_modes(),
            found: x.modes(),
        });
    }
    let grid = TimeGrid {
        origin: t,
        step: cfg.grid_step,
    };
    let mut traj = Trajectory {
        start_time: t,
        segments: Vec::new(),
        jump_times: Vec::new(),
        jump_marks: Vec::new(),
    };
    let (mut tn, mut xn, mut dn) = (t, x.clone(), mode.clone());
    loop {
        let anchor_x = xn.clone();
        let anchor_d = dn.clone();
        let control = |elapsed: f64| policy.control(elapsed, &anchor_x, &anchor_d);
        let a0 = control(0.0);
        if !model.is_control(a0) {
            return Err(Error::InvalidControl(a0));
        }
        let mut samples = SegmentSamples::default();
        let seg_start = tn;
        let end = thin_segment(
            &xn,
            tn,
            horizon,
            model.rate_bound(),
            grid,
            &mut |y, from, to| {
                cache.advance(
                    model,
                    &anchor_d,
                    y,
                    from - seg_start,
                    to - seg_start,
                    &control,
                    policy.is_constant(),
                    cfg.max_substep,
                )
            },
            &mut |s, y| model.rate(y, &anchor_d, control(s - seg_start)),
            rng,
            Some(&mut samples),
        )?;
        let controls = samples
            .times
            .iter()
            .map(|s| control(s - seg_start))
            .collect();
        traj.segments.push(TrajSegment {
            mode: dn.clone(),
            times: samples.times,
            fields: samples.fields,
            controls,
        });
        match end.event {
            None => return Ok(traj),
            Some(tj) => {
                if traj.jump_times.len() >= cfg.jump_cap {
                    return Err(Error::JumpCapExceeded(cfg.jump_cap));
                }
                let a = control(tj - seg_start);
                let next = sample_jump_target(model, &end.field, &dn, a, rng)?;
                traj.jump_times.push(tj);
                traj.jump_marks.push(next.clone());
                tn = tj;
                xn = end.field;
                dn = next;
            }
        }
    }
}

/// Simulates the controlled PDMP from `(t, x, mode)` up to the horizon.
pub fn simulate<Mo, P, R>(
    model: &Mo,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    policy: &P,
    rng: &mut R,
    cfg: &SimConfig,
) -> Result<Trajectory<Mo::Mode>>
where
    Mo: PdmpModel,
    P: OpenLoopPolicy<Mo::Mode> + ?Sized,
    R: Rng,
{
    simulate_with_cache(model, &FlowCache::new(), t, x, mode, policy, rng, cfg)
}

/// `∫ f(X_s, α_s) ds + g(X_T)` with the trapezoid rule on the recorded samples.
pub fn path_cost<Mo: PdmpModel>(model: &Mo, traj: &Trajectory<Mo::Mode>) -> f64 {
    let running: f64 = traj
        .segments
        .iter()
        .map(|seg| {
            let f: Vec<f64> = seg
                .fields
                .iter()
                .zip(&seg.controls)
                .map(|(x, a)| model.running_cost(x, &seg.mode, *a))
                .collect();
            trapezoid(&seg.times, &f)
        })
        .sum();
    running + model.terminal_cost(traj.terminal_field(), traj.terminal_mode())
}

/// Monte Carlo estimate of `J(t, x, α)` over `n_paths` independent paths.
/// Path `i` uses stream `(seed, "estimate_cost", i)`.
pub fn estimate_cost<Mo, P>(
    model: &Mo,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    policy: &P,
    n_paths: usize,
    seed: u64,
    cfg: &SimConfig,
) -> Result<Estimate>
where
    Mo: PdmpModel,
    P: OpenLoopPolicy<Mo::Mode> + ?Sized,
{
    if n_paths < 2 {
        return Err(Error::param("n_paths", "need at least two paths"));
    }
    let cache = FlowCache::new();
    let costs = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, "estimate_cost", i as u64);
            let traj = simulate_with_cache(model, &cache, t, x, mode, policy, &mut rng, cfg)?;
            Ok(path_cost(model, &traj))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&costs))
}

/// Writes `time,mode,v_0,…,v_R,control` rows, with the field sampled on
/// `resolution + 1` equispaced points of `[0, 1]`.
pub fn write_trajectory_csv<Mo: PdmpModel, W: Write>(
    model: &Mo,
    traj: &Trajectory<Mo::Mode>,
    resolution: usize,
    out: W,
) -> Result<()> {
    let eval = PointEvaluator::uniform(model.field_modes(), resolution.max(1));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string(), "mode".to_string()];
    header.extend(eval.nodes().iter().map(|z| format!("v@{z:.4}")));
    header.push("control".to_string());
    w.write_record(&header)?;
    for (t, x, mode, a) in traj.samples() {
        let mut row = vec![format!("{t:.6}"), model.mode_label(mode)];
        row.extend(eval.eval(x).into_iter().map(|v| format!("{v:.9e}")));
        row.push(format!("{a}"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
