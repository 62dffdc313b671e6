//! The six subcommands. Each returns a JSON result object that is wrapped
//! into `summary.json` together with the run header.

use std::fmt::Display;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use pdmp_control::bsde::{
    compare_to_primal, constraint_violation, solve_penalized_grid, solve_penalized_regression,
    PenalizedSolution,
};
use pdmp_control::hh::HhModel;
use pdmp_control::optim::NelderMead;
use pdmp_control::pdmp::{path_cost, simulate as simulate_path, write_trajectory_csv};
use pdmp_control::primal::{
    brute_force_value, dpp_residual, solve, BruteQuad, QuadConfig, ValueGrid,
};
use pdmp_control::randomization::{
    estimate_dual, minimize_over_nu, simulate_xi, write_search_trace, DualMethod, NuSearch,
    NuSearchResult, TabularNu,
};
use pdmp_control::rng::{derive_seed, stream};
use pdmp_control::toy::ToyModel;
use pdmp_control::{ConstantPolicy, Estimate, PdmpModel, SpectralField};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{BsdeSolver, BuiltModel, Config};
use crate::output::{sha256_hex, Outputs, RunManifest, MANIFEST, SUMMARY};
use crate::{CliError, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Value,
    Dual,
    Bsde,
    Crosscheck,
    Track,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Value => "value",
            Command::Dual => "dual",
            Command::Bsde => "bsde",
            Command::Crosscheck => "crosscheck",
            Command::Track => "track",
        }
    }
}

/// Command-line overrides of config values.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

/// Loads `config`, runs `command` into the existing directory `out` and
/// writes `summary.json` and `manifest.json`.
pub fn run_file(
    command: Command,
    config: &Path,
    out: &Path,
    overrides: &Overrides,
) -> Result<RunManifest, CliError> {
    let (mut cfg, bytes) = Config::load(config)?;
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(p) = overrides.paths {
        cfg.paths = p;
    }
    run(command, &cfg, &sha256_hex(&bytes), out)
}

pub fn run(
    command: Command,
    cfg: &Config,
    config_hash: &str,
    out: &Path,
) -> Result<RunManifest, CliError> {
    let mut outputs = Outputs::new(out)?;
    let model = cfg.build()?;
    let result = match (&model, command) {
        (BuiltModel::Toy(m), _) => {
            let mode = start_mode(cfg, 0usize)?;
            match command {
                Command::Track => {
                    return Err(CliError::Config("track: requires an [hh] model".into()))
                }
                Command::Crosscheck => crosscheck(cfg, m, mode, Some(m), &mut outputs)?,
                _ => generic(command, cfg, m, mode, &mut outputs)?,
            }
        }
        (BuiltModel::Hh(m), _) => {
            let m = m.as_ref();
            let mode = start_mode(cfg, m.params().resting_config())?;
            match command {
                Command::Track => track(cfg, m, mode, &mut outputs)?,
                Command::Crosscheck => crosscheck(cfg, m, mode, None, &mut outputs)?,
                _ => generic(command, cfg, m, mode, &mut outputs)?,
            }
        }
    };
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command.name(),
        "config_hash": config_hash,
        "seed": cfg.seed,
        "manifest": MANIFEST,
        "result": result,
    });
    outputs.write_json(SUMMARY, &summary)?;
    outputs.finish(command.name(), config_hash, cfg.seed)
}

fn start_mode<M: FromStr>(cfg: &Config, default: M) -> Result<M, CliError> {
    match &cfg.start.mode {
        Some(label) => label
            .parse()
            .map_err(|_| CliError::Config(format!("start.mode: unknown mode `{label}`"))),
        None => Ok(default),
    }
}

fn generic<Mo>(
    command: Command,
    cfg: &Config,
    model: &Mo,
    mode: Mo::Mode,
    out: &mut Outputs,
) -> Result<Value, CliError>
where
    Mo: PdmpModel,
    Mo::Mode: Display + FromStr,
{
    match command {
        Command::Simulate => simulate(cfg, model, mode, out),
        Command::Value => value(cfg, model, mode, out),
        Command::Dual => dual(cfg, model, mode, out),
        Command::Bsde => bsde(cfg, model, mode, out),
        Command::Crosscheck | Command::Track => unreachable!("dispatched by model"),
    }
}

fn enumerated<Mo: PdmpModel>(model: &Mo, what: &str) -> Result<Vec<Mo::Mode>, CliError> {
    model.modes().ok_or_else(|| {
        CliError::Config(format!("{what}: the model has too many modes to enumerate"))
    })
}

fn simulate<Mo>(
    cfg: &Config,
    model: &Mo,
    mode: Mo::Mode,
    out: &mut Outputs,
) -> Result<Value, CliError>
where
    Mo: PdmpModel,
    Mo::Mode: Display + FromStr,
{
    let x0 = cfg.start_field(model.field_modes());
    let t0 = cfg.start.time;
    let sim = cfg.sim.to_sim();
    let policy = ConstantPolicy(cfg.start.control);
    let keep = cfg.sim.trajectories;
    let runs = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, "simulate", i as u64);
            let traj = simulate_path(model, t0, &x0, &mode, &policy, &mut rng, &sim)?;
            Ok((
                path_cost(model, &traj),
                traj.jump_times.len(),
                (i < keep).then_some(traj),
            ))
        })
        .collect::<Result<Vec<_>, pdmp_control::Error>>()?;
    let mut files = Vec::new();
    for (i, (_, _, traj)) in runs.iter().enumerate() {
        if let Some(traj) = traj {
            let name = format!("trajectory_{i:03}.csv");
            let mut w = out.create(&name)?;
            write_trajectory_csv(model, traj, cfg.sim.resolution, &mut w)?;
            w.flush()?;
            files.push(name);
        }
    }
    let costs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let jumps: Vec<f64> = runs.iter().map(|r| r.1 as f64).collect();
    let jump_est = Estimate::from_samples(&jumps);
    // The jump count is dominated by a Poisson variable of mean M·(T − t).
    let bound_mean = model.rate_bound() * (model.horizon() - t0);
    let bound = bound_mean + 3.0 * (bound_mean / cfg.paths as f64).sqrt();
    Ok(json!({
        "paths": cfg.paths,
        "cost": Estimate::from_samples(&costs),
        "mode_jumps": jump_est,
        "rate_bound": model.rate_bound(),
        "poisson_mean_bound": bound_mean,
        "jumps_within_rate_bound": jump_est.mean <= bound,
        "trajectories": files,
    }))
}

fn value_grid<Mo: PdmpModel>(cfg: &Config, model: &Mo) -> Result<ValueGrid<Mo::Mode>, CliError> {
    let spec = cfg.lattice_spec(enumerated(model, "value")?)?;
    let quad = QuadConfig {
        step: cfg.value.quad_step,
    };
    Ok(solve(
        model,
        &spec,
        cfg.value.tol,
        cfg.value.max_iter,
        &quad,
    )?)
}

fn value<Mo>(cfg: &Config, model: &Mo, mode: Mo::Mode, out: &mut Outputs) -> Result<Value, CliError>
where
    Mo: PdmpModel,
    Mo::Mode: Display + FromStr,
{
    let grid = value_grid(cfg, model)?;
    grid.write_csv(out.create("value.csv")?)?;
    grid.write_sidecar(out.create("value_grid.json")?)?;
    let x0 = cfg.start_field(model.field_modes());
    Ok(json!({
        "iterations": grid.residuals.len(),
        "residuals": grid.residuals,
        "start_value": grid.interpolate(cfg.start.time, &x0, &mode).ok(),
        "lattice_values": grid.len(),
    }))
}

#[derive(Serialize)]
struct NuRow {
    mode: String,
    control: f64,
    nu: f64,
}

fn nu_rows<Mo>(model: &Mo, nu: &TabularNu<Mo::Mode>) -> Vec<NuRow>
where
    Mo: PdmpModel,
    Mo::Mode: Display,
{
    nu.modes()
        .iter()
        .flat_map(|d| {
            model
                .controls()
                .iter()
                .enumerate()
                .map(move |(b, a)| NuRow {
                    mode: d.to_string(),
                    control: *a,
                    nu: nu.value(d, b),
                })
        })
        .collect()
}

fn write_nu_csv(rows: &[NuRow], out: &mut Outputs, name: &str) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out.create(name)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn dual_search<Mo: PdmpModel>(
    cfg: &Config,
    model: &Mo,
    mode: &Mo::Mode,
    purpose: &str,
) -> Result<NuSearchResult<Mo::Mode>, CliError> {
    let d = &cfg.dual;
    let lambda0 = cfg.lambda0(model.controls().len())?;
    let family = TabularNu::new(
        enumerated(model, "dual")?,
        model.controls().len(),
        (d.nu_min, d.nu_max),
    )?;
    let search = NuSearch {
        n_paths: d.paths.unwrap_or(cfg.paths),
        seed: derive_seed(cfg.seed, purpose, 0),
        fresh_seed: derive_seed(cfg.seed, purpose, 1),
        method: d.method,
        optimizer: NelderMead {
            step: d.step,
            max_evaluations: d.max_evaluations,
            ..NelderMead::default()
        },
        start: None,
        sim: cfg.sim.to_sim(),
    };
    let x0 = cfg.start_field(model.field_modes());
    Ok(minimize_over_nu(
        model,
        &lambda0,
        &family,
        cfg.start.time,
        &x0,
        mode,
        cfg.start.control,
        &search,
    )?)
}

fn dual<Mo>(cfg: &Config, model: &Mo, mode: Mo::Mode, out: &mut Outputs) -> Result<Value, CliError>
where
    Mo: PdmpModel,
    Mo::Mode: Display + FromStr,
{
    let res = dual_search(cfg, model, &mode, "dual")?;
    let mut w = out.create("dual_trace.csv")?;
    write_search_trace(&res.trace, &mut w)?;
    w.flush()?;
    let rows = nu_rows(model, &res.nu);
    write_nu_csv(&rows, out, "dual_nu.csv")?;
    Ok(json!({
        "method": cfg.dual.method,
        "evaluations": res.trace.len(),
        "exhausted": res.exhausted,
        "search_estimate": res.estimate,
        "fresh_estimate": res.fresh,
        "nu": rows,
    }))
}

fn penalized<Mo: PdmpModel>(
    cfg: &Config,
    model: &Mo,
    n: usize,
) -> Result<PenalizedSolution<Mo::Mode>, CliError> {
    let lambda0 = cfg.lambda0(model.controls().len())?;
    let spec = cfg.lattice_spec(enumerated(model, "bsde")?)?;
    let scheme = cfg.scheme(n)?;
    Ok(match cfg.bsde.solver {
        BsdeSolver::Grid => solve_penalized_grid(model, &lambda0, &scheme, &spec)?,
        BsdeSolver::Regression => solve_penalized_regression(
            model,
            &lambda0,
            &scheme,
            &spec,
            derive_seed(cfg.seed, "bsde", n as u64),
        )?,
    })
}

/// `max (vⁿ⁺ − vⁿ)` over lattice states and controls.
fn ladder_increase<M: Clone + Eq + std::hash::Hash>(
    prev: &PenalizedSolution<M>,
    next: &PenalizedSolution<M>,
) -> Result<f64, CliError> {
    let mut worst = f64::NEG_INFINITY;
    for (t, x, d) in next.lattice_states() {
        for (a, b) in prev
            .values_at(t, &x, &d)?
            .iter()
            .zip(next.values_at(t, &x, &d)?)
        {
            worst = worst.max(b - a);
        }
    }
    Ok(worst)
}

/// Rung reports, the largest increase along the ladder and the last solution.
type Ladder<M> = (Vec<Value>, f64, PenalizedSolution<M>);

/// Runs the penalty ladder, writing one CSV per rung.
fn ladder<Mo>(
    cfg: &Config,
    model: &Mo,
    mode: &Mo::Mode,
    out: &mut Outputs,
) -> Result<Ladder<Mo::Mode>, CliError>
where
    Mo: PdmpModel,
    Mo::Mode: Display + FromStr,
{
    let x0 = cfg.start_field(model.field_modes());
    let mut rungs = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut prev: Option<PenalizedSolution<Mo::Mode>> = None;
    for &n in &cfg.bsde.penalties {
        let sol = penalized(cfg, model, n)?;
        let mut w = out.create(&format!("bsde_n{n}.csv"))?;
        sol.write_csv(&mut w)?;
        w.flush()?;
        let states = sol.lattice_states();
        let increase = match &prev {
            Some(p) => Some(ladder_increase(p, &sol)?),
            None => None,
        };
        if let Some(i) = increase {
            worst = worst.max(i);
        }
        let mass: Option<Vec<f64>> = if sol.penalty_mass.is_empty() {
            None
        } else {
            sol.penalty_mass
                .iter()
                .map(|g| g.interpolate(cfg.start.time, &x0, mode))
                .collect::<Result<_, _>>()
                .ok()
        };
        rungs.push(json!({
            "n": n,
            "sup_norm": sol.sup_norm(),
            "constraint_violation": constraint_violation(&sol, &states)?,
            "increase_from_previous": increase,
            "start_values": sol.values_at(cfg.start.time, &x0, mode).ok(),
            "start_penalty_mass": mass,
            "regression": sol.regression.as_ref().map(|r| json!({
                "penalty_mass": r.penalty_mass,
                "ridge_steps": r.ridge_steps(),
                "residual_rms": r.steps.iter().map(|s| s.residual_rms).collect::<Vec<_>>(),
            })),
        }));
        prev = Some(sol);
    }
    let last = prev.expect("validated nonempty ladder");
    Ok((rungs, worst, last))
}

fn bsde<Mo>(cfg: &Config, model: &Mo, mode: Mo::Mode, out: &mut Outputs) -> Result<Value, CliError>
where
    Mo: PdmpModel,
    Mo::Mode: Display + FromStr,
{
    let (rungs, worst, _) = ladder(cfg, model, &mode, out)?;
    Ok(json!({
        "solver": cfg.bsde.solver,
        "controls": model.controls(),
        "max_ladder_increase": (worst > f64::NEG_INFINITY).then_some(worst),
        "rungs": rungs,
    }))
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Check {
            name,
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

fn crosscheck<Mo>(
    cfg: &Config,
    model: &Mo,
    mode: Mo::Mode,
    toy: Option<&ToyModel>,
    out: &mut Outputs,
) -> Result<Value, CliError>
where
    Mo: PdmpModel,
    Mo::Mode: Display + FromStr,
{
    let c = &cfg.crosscheck;
    let x0 = cfg.start_field(model.field_modes());
    let t0 = cfg.start.time;
    let grid = value_grid(cfg, model)?;
    grid.write_csv(out.create("value.csv")?)?;
    let v0 = grid.interpolate(t0, &x0, &mode)?;
    let mut checks = Vec::new();

    if let Some(toy) = toy {
        let oracle = brute_force_value(toy, c.oracle_jump_cap, BruteQuad::default(), c.value_tol)?;
        let mut worst: f64 = 0.0;
        for idx in 0..grid.len() {
            let (ti, mi, pi) = grid.unflat(idx);
            let o = oracle.value(grid.times()[ti], grid.features(pi)[0], mi);
            worst = worst.max((grid.values()[idx] - o).abs());
        }
        checks.push(Check::at_most("value_vs_oracle", worst, c.value_tol));
    }

    let dpp = dpp_residual(
        &grid,
        model,
        t0,
        &x0,
        &mode,
        c.dpp_paths,
        derive_seed(cfg.seed, "dpp", 0),
    )?;
    checks.push(Check::at_most(
        "dpp_residual",
        dpp.mean.abs(),
        3.0 * dpp.stderr + 2.0 * c.value_tol,
    ));

    let (_, worst, sol) = ladder(cfg, model, &mode, out)?;
    if cfg.bsde.penalties.len() > 1 {
        checks.push(Check::at_most("ladder_increase", worst, c.ladder_tol));
    }
    let cmp = compare_to_primal(&sol, &grid, &sol.lattice_states())?;
    checks.push(Check::at_most("bsde_vs_value", cmp.sup_error, c.bsde_tol));
    checks.push(Check::at_most(
        "control_spread",
        cmp.control_spread,
        c.spread_tol,
    ));

    let res = dual_search(cfg, model, &mode, "crosscheck_dual")?;
    checks.push(Check {
        name: "dual_upper_bound",
        value: res.fresh.mean - v0,
        tolerance: -3.0 * res.fresh.stderr,
        pass: res.fresh.mean >= v0 - 3.0 * res.fresh.stderr,
    });

    let pass = checks.iter().all(|c| c.pass);
    let report = json!({
        "start_value": {
            "primal": v0,
            "bsde": sol.values_at(t0, &x0, &mode)?,
            "dual": res.fresh,
        },
        "dpp": dpp,
        "bsde_comparison": {
            "n": sol.n_penalty,
            "sup_error": cmp.sup_error,
            "mean_error": cmp.mean_error,
            "control_spread": cmp.control_spread,
            "samples": cmp.samples,
        },
        "checks": checks,
        "verdict": if pass { "PASS" } else { "FAIL" },
    });
    out.write_json("crosscheck.json", &report)?;
    Ok(report)
}

/// Per-grid-node sums of `‖v − V_ref‖²` over one path.
fn error_series<'a>(
    samples: impl Iterator<Item = (f64, &'a SpectralField)>,
    reference: &SpectralField,
    t0: f64,
    step: f64,
    nodes: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; nodes];
    for (t, x) in samples {
        let k = (t - t0) / step;
        let kr = k.round();
        if (k - kr).abs() < 1e-6 && (kr as usize) < nodes {
            let e: f64 = x
                .coeffs()
                .iter()
                .zip(reference.coeffs())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            out[kr as usize] = e;
        }
    }
    out
}

fn mean_series(paths: Vec<Vec<f64>>, nodes: usize) -> Vec<f64> {
    let n = paths.len() as f64;
    let mut acc = vec![0.0; nodes];
    for p in &paths {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / n).collect()
}

fn track(
    cfg: &Config,
    model: &HhModel,
    mode: <HhModel as PdmpModel>::Mode,
    out: &mut Outputs,
) -> Result<Value, CliError> {
    let tr = &cfg.track;
    let n = tr.paths.unwrap_or(cfg.paths);
    let sim = cfg.sim.to_sim();
    let t0 = cfg.start.time;
    let x0 = cfg.start_field(model.field_modes());
    let a_max = model.params().a_max;
    let controls = model.controls().to_vec();
    let lambda0 = cfg.lambda0(controls.len())?;
    if cfg.start.control != 0.0 {
        return Err(CliError::Config(
            "start.control: track starts in the dark (0)".into(),
        ));
    }

    let cost_seed = derive_seed(cfg.seed, "track_cost", 0);
    let cost = |a: f64| {
        pdmp_control::pdmp::estimate_cost(
            model,
            t0,
            &x0,
            &mode,
            &ConstantPolicy(a),
            n,
            cost_seed,
            &sim,
        )
    };
    let zero = cost(0.0)?;
    let full = cost(a_max)?;

    let family = TabularNu::new(
        enumerated(model, "track")?,
        controls.len(),
        (tr.nu_min, tr.nu_max),
    )?;
    let search = NuSearch {
        n_paths: n,
        seed: derive_seed(cfg.seed, "track_search", 0),
        fresh_seed: derive_seed(cfg.seed, "track_search", 1),
        method: DualMethod::Direct,
        optimizer: NelderMead {
            max_evaluations: tr.max_evaluations,
            step: tr.step,
            ..NelderMead::default()
        },
        start: None,
        sim,
    };
    let mut res = minimize_over_nu(model, &lambda0, &family, t0, &x0, &mode, 0.0, &search)?;
    // The table closest to the dark policy competes on the same random
    // numbers, so a search that finds nothing better falls back to it.
    let dark_params: Vec<f64> = family
        .modes()
        .iter()
        .flat_map(|_| {
            controls
                .iter()
                .map(|a| if *a > 0.0 { tr.nu_min.ln() } else { 0.0 })
        })
        .collect();
    let dark = family.with_params(&dark_params)?;
    let dual = |nu: &TabularNu<_>, seed: u64| {
        estimate_dual(
            model,
            &lambda0,
            nu,
            t0,
            &x0,
            &mode,
            0.0,
            n,
            seed,
            DualMethod::Direct,
            &sim,
        )
    };
    let dark_search = dual(&dark, search.seed)?;
    let fallback = dark_search.mean < res.estimate.mean;
    if fallback {
        res.fresh = dual(&dark, search.fresh_seed)?;
        res.estimate = dark_search;
        res.nu = dark;
    }
    let tol = 3.0 * zero.combined_stderr(&res.fresh);
    let not_worse = res.fresh.mean <= zero.mean + tol;

    let mut w = csv::Writer::from_writer(out.create("track_costs.csv")?);
    w.write_record(["policy", "mean", "stderr", "paths"])?;
    for (name, e) in [("zero", zero), ("full", full), ("optimized", res.fresh)] {
        w.write_record([
            name.to_string(),
            format!("{:.9e}", e.mean),
            format!("{:.9e}", e.stderr),
            e.n.to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);
    let rows = nu_rows(model, &res.nu);
    write_nu_csv(&rows, out, "track_nu.csv")?;

    let step = sim.grid_step;
    let nodes = ((model.horizon() - t0) / step).round() as usize + 1;
    let reference = model.reference();
    let constant_series = |a: f64, purpose: &str| -> Result<Vec<f64>, CliError> {
        let paths = (0..tr.series_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(cfg.seed, purpose, i as u64);
                let traj =
                    simulate_path(model, t0, &x0, &mode, &ConstantPolicy(a), &mut rng, &sim)?;
                Ok(error_series(
                    traj.samples().map(|(t, x, _, _)| (t, x)),
                    reference,
                    t0,
                    step,
                    nodes,
                ))
            })
            .collect::<Result<Vec<_>, pdmp_control::Error>>()?;
        Ok(mean_series(paths, nodes))
    };
    let zero_series = constant_series(0.0, "track_series_zero")?;
    let full_series = constant_series(a_max, "track_series_full")?;
    let nu_paths = (0..tr.series_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, "track_series_nu", i as u64);
            let path = simulate_xi(
                model,
                &lambda0,
                Some(&res.nu),
                t0,
                &x0,
                &mode,
                0.0,
                &mut rng,
                &sim,
            )?;
            let samples = path
                .segments
                .iter()
                .flat_map(|s| s.times.iter().copied().zip(&s.fields));
            Ok(error_series(samples, reference, t0, step, nodes))
        })
        .collect::<Result<Vec<_>, pdmp_control::Error>>()?;
    let nu_series = mean_series(nu_paths, nodes);
    let mut w = csv::Writer::from_writer(out.create("track_series.csv")?);
    w.write_record(["time", "zero", "full", "optimized"])?;
    for k in 0..nodes {
        w.write_record([
            format!("{:.6}", t0 + k as f64 * step),
            format!("{:.9e}", zero_series[k]),
            format!("{:.9e}", full_series[k]),
            format!("{:.9e}", nu_series[k]),
        ])?;
    }
    w.flush()?;

    Ok(json!({
        "paths": n,
        "zero": zero,
        "full": full,
        "optimized": res.fresh,
        "optimized_search_estimate": res.estimate,
        "evaluations": res.trace.len(),
        "exhausted": res.exhausted,
        "dark_fallback": fallback,
        "optimized_not_worse_than_zero": not_worse,
        "tolerance": tol,
        "nu": rows,
    }))
}
