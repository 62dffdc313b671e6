//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line with
//! its measured quantities and runtime; any failure makes the process exit
//! nonzero.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{admissible_start, ks_uniform, random_field, HazardModel};
use pdmp_control::bsde::{
    compare_to_primal, solve_penalized_grid, PenalizedScheme, PenalizedSolution,
};
use pdmp_control::hh::{HhModel, HhParams};
use pdmp_control::optim::NelderMead;
use pdmp_control::pdmp::{integrate_flow, lawson_rk4, sample_jump_time, FlowCache};
use pdmp_control::primal::{
    brute_force_value, dpp_residual, solve, Axis, BruteQuad, LatticeSpec, QuadConfig, ValueGrid,
};
use pdmp_control::randomization::{
    doleans_weight, estimate_dual, minimize_over_nu, simulate_xi, ConstantNu, DualMethod, FnNu,
    Lambda0, NuPolicy, NuSearch, TabularNu,
};
use pdmp_control::spectral::PointEvaluator;
use pdmp_control::toy::ToyModel;
use pdmp_control::{rng, Estimate, NormKind, PdmpModel, SimConfig, SpectralField};
use rand::Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn field(v: f64) -> SpectralField {
    SpectralField::new(vec![v]).unwrap()
}

fn semigroup_contraction() -> Outcome {
    let mut r = rng::stream(101, "semigroup", 0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let v = random_field(&mut r, 32, 10.0);
        for t in [0.01, 0.1, 1.0] {
            let s = v.semigroup(t, 1.0).map_err(|e| e.to_string())?;
            let factor = (-t * std::f64::consts::PI.powi(2)).exp();
            for kind in [NormKind::L2, NormKind::Minus1] {
                worst = worst.max(s.norm(kind) - factor * v.norm(kind));
            }
        }
    }
    check(worst <= 1e-12, format!("max excess {worst:.3e}"))
}

fn flow_integrators_agree() -> Outcome {
    let model = HhModel::new(HhParams::default()).map_err(|e| e.to_string())?;
    let (lo, hi) = model.voltage_bounds();
    let mut r = rng::stream(102, "flow", 0);
    let mut worst: f64 = 0.0;
    for d in model.all_configs().unwrap() {
        let drift = model.affine_drift(&d);
        for _ in 0..3 {
            let x = admissible_start(&mut r, 32, lo, hi);
            let exact =
                integrate_flow(&model, &x, &d, &|_| 0.0, 1.0, 10).map_err(|e| e.to_string())?;
            let rk = lawson_rk4(&|_, y| drift.apply(y), model.diffusivity(), &x, 1.0, 32_000)
                .map_err(|e| e.to_string())?;
            for (k, e) in exact.iter().enumerate() {
                worst = worst.max(e.sub(&rk[3200 * k]).unwrap().norm(NormKind::L2));
            }
        }
    }
    check(worst <= 1e-6, format!("sup L2 difference {worst:.3e}"))
}

fn voltage_invariance() -> Outcome {
    let params = HhParams {
        sites: 3,
        ..HhParams::default()
    };
    let model = HhModel::new(params.clone()).map_err(|e| e.to_string())?;
    let fine = HhModel::new(HhParams {
        modes: 2 * params.modes,
        ..params
    })
    .map_err(|e| e.to_string())?;
    let (lo, hi) = model.voltage_bounds();
    let configs = model.all_configs().unwrap();
    let (ev, ev2) = (
        PointEvaluator::uniform(32, 200),
        PointEvaluator::uniform(64, 200),
    );
    let (cache, cache2) = (FlowCache::new(), FlowCache::new());
    let a_max = model.params().a_max;
    let mut r = rng::stream(103, "invariance", 0);
    let mut tail: f64 = 0.0;
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in configs.iter().step_by(configs.len() / 5).take(5) {
        for a in [0.0, a_max] {
            let p = cache.propagator(&model, d, a).ok_or("no propagator")?;
            let p2 = cache2.propagator(&fine, d, a).ok_or("no propagator")?;
            for _ in 0..200 {
                let x = admissible_start(&mut r, 32, lo, hi);
                for s in 0..=25 {
                    let t = model.horizon() * s as f64 / 25.0;
                    let coarse = ev.eval(&p.advance(&x, t));
                    let refined = ev2.eval(&p2.advance(&x.resized(64), t));
                    for (u, w) in coarse.iter().zip(&refined) {
                        tail = tail.max((u - w).abs());
                        vmin = vmin.min(*u);
                        vmax = vmax.max(*u);
                    }
                }
            }
        }
    }
    let tau = tail + 1e-3;
    check(
        vmin >= lo - tau && vmax <= hi + tau,
        format!("range [{vmin:.4}, {vmax:.4}] vs [{lo}, {hi}], tau {tau:.2e}"),
    )
}

fn jump_law() -> Outcome {
    let toy = ToyModel::constant_rate(2.0, 50.0);
    let mut r = rng::stream(104, "exp", 0);
    let mut u = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let t = sample_jump_time(&toy, &field(0.0), &0, &|_| 0.0, &mut r, 50.0)
            .map_err(|e| e.to_string())?
            .ok_or("censored exponential draw")?;
        u.push(1.0 - (-2.0 * t).exp());
    }
    let p_exp = ks_uniform(u);

    let model = HazardModel::new(2.0);
    let cdf = |s: f64| 1.0 - (-0.5 * s * s).exp();
    let mut r = rng::stream(104, "hazard", 0);
    let mut fill = rng::stream(104, "censor", 0);
    let mut u = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let s = sample_jump_time(&model, &field(0.0), &0, &|_| 0.0, &mut r, 2.0)
            .map_err(|e| e.to_string())?;
        u.push(match s {
            Some(s) => cdf(s),
            None => cdf(2.0) + (1.0 - cdf(2.0)) * fill.random::<f64>(),
        });
    }
    let p_hazard = ks_uniform(u);
    check(
        p_exp > 0.01 && p_hazard > 0.01,
        format!("KS p exponential {p_exp:.3}, time-varying {p_hazard:.3}"),
    )
}

fn toy_nus() -> Vec<Box<dyn NuPolicy<usize>>> {
    vec![
        Box::new(ConstantNu(0.3)),
        Box::new(ConstantNu(2.5)),
        Box::new(FnNu {
            rule: |s: f64, x: &SpectralField, mode: &usize, _: usize, b: usize| {
                0.4 + x.coeffs()[0].clamp(0.0, 1.0) + 0.3 * (b + mode) as f64 * (1.0 - s).max(0.0)
            },
            bounds: (0.4, 2.0),
        }),
    ]
}

fn unit_mean() -> Outcome {
    let toy = ToyModel::two_mode_switch();
    let lambda0 = Lambda0::new(vec![1.5, 1.5]).unwrap();
    let x = field(0.2);
    let sim = SimConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, nu) in toy_nus().iter().enumerate() {
        let weights = (0..10_000u64)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(105 + k as u64, "weight", i);
                let path = simulate_xi(&toy, &lambda0, None, 0.0, &x, &0, 0.0, &mut r, &sim)?;
                doleans_weight(&path, nu.as_ref(), &lambda0)
            })
            .collect::<pdmp_control::Result<Vec<f64>>>()
            .map_err(|e| e.to_string())?;
        let e = Estimate::from_samples(&weights);
        ok &= (e.mean - 1.0).abs() <= 3.0 * e.stderr;
        parts.push(format!("{:.4}±{:.4}", e.mean, e.stderr));
    }
    check(ok, format!("E[L] = {}", parts.join(", ")))
}

fn equivalent<Mo: PdmpModel>(
    model: &Mo,
    lambda0: &Lambda0,
    nu: &dyn NuPolicy<Mo::Mode>,
    x: &SpectralField,
    mode: &Mo::Mode,
    n: usize,
    seed: u64,
) -> Result<(bool, String), String> {
    let a = model.controls()[0];
    let sim = SimConfig::default();
    let est = |method, seed| {
        estimate_dual(model, lambda0, nu, 0.0, x, mode, a, n, seed, method, &sim)
            .map_err(|e| e.to_string())
    };
    let direct = est(DualMethod::Direct, seed)?;
    let weighted = est(DualMethod::Weighted, seed + 1)?;
    let tol = 3.0 * direct.combined_stderr(&weighted);
    let diff = (direct.mean - weighted.mean).abs();
    Ok((diff <= tol, format!("{diff:.3}/{tol:.3}")))
}

fn estimator_equivalence() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let toy = ToyModel::two_mode_switch();
    let lambda0 = Lambda0::new(vec![1.0, 1.0]).unwrap();
    for (k, nu) in toy_nus().iter().enumerate() {
        let (pass, s) = equivalent(
            &toy,
            &lambda0,
            nu.as_ref(),
            &field(0.3),
            &0,
            10_000,
            106 + 2 * k as u64,
        )?;
        ok &= pass;
        parts.push(format!("toy {s}"));
    }
    let model = HhModel::new(HhParams::default()).map_err(|e| e.to_string())?;
    let lambda0 = Lambda0::uniform(model.controls().len()).unwrap();
    let d = model.params().resting_config();
    let x = SpectralField::zeros(model.params().modes);
    let top = model.controls().len() - 1;
    let nus: Vec<Box<dyn NuPolicy<_>>> = vec![
        Box::new(ConstantNu(0.7)),
        Box::new(ConstantNu(1.4)),
        Box::new(FnNu {
            rule: move |_: f64, _: &SpectralField, _: &_, _: usize, b: usize| {
                if b == top {
                    1.5
                } else {
                    0.8
                }
            },
            bounds: (0.8, 1.5),
        }),
    ];
    for (k, nu) in nus.iter().enumerate() {
        let (pass, s) = equivalent(
            &model,
            &lambda0,
            nu.as_ref(),
            &x,
            &d,
            3000,
            116 + 2 * k as u64,
        )?;
        ok &= pass;
        parts.push(format!("hh {s}"));
    }
    check(
        ok,
        format!("|direct − weighted| / 3 s.e.: {}", parts.join(", ")),
    )
}

/// The toy lattice shared by the primal and BSDE criteria.
fn toy_lattice() -> LatticeSpec<usize> {
    LatticeSpec {
        start_time: 0.0,
        time_steps: 60,
        axes: vec![Axis::new(0.0, 1.0, 21).unwrap()],
        modes: vec![0, 1],
    }
}

struct ToySolutions {
    grid: ValueGrid<usize>,
    ladder: Vec<PenalizedSolution<usize>>,
}

const PENALTIES: [usize; 5] = [1, 2, 5, 10, 50];

fn toy_value_grid(toy: &ToyModel) -> Result<ValueGrid<usize>, String> {
    solve(toy, &toy_lattice(), 1e-8, 60, &QuadConfig::default()).map_err(|e| e.to_string())
}

fn toy_ladder(toy: &ToyModel) -> Result<Vec<PenalizedSolution<usize>>, String> {
    let lambda0 = Lambda0::uniform(toy.controls().len()).unwrap();
    PENALTIES
        .iter()
        .map(|&n| {
            let scheme = PenalizedScheme {
                n_penalty: n,
                time_steps: 60,
                ..PenalizedScheme::default()
            };
            solve_penalized_grid(toy, &lambda0, &scheme, &toy_lattice()).map_err(|e| e.to_string())
        })
        .collect()
}

fn primal_oracle(toy: &ToyModel, grid: &ValueGrid<usize>) -> Outcome {
    let oracle =
        brute_force_value(toy, 4, BruteQuad::default(), 1e-3).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for idx in 0..grid.len() {
        let (ti, mi, pi) = grid.unflat(idx);
        let o = oracle.value(grid.times()[ti], grid.features(pi)[0], mi);
        worst = worst.max((grid.values()[idx] - o).abs());
    }
    // Geometric decay: every residual above round-off shrinks by a factor < 1.
    let h = &grid.residuals;
    let ratio = h
        .windows(2)
        .filter(|w| w[0] > 1e-13)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    check(
        worst <= 1e-3 && ratio < 1.0 && h.len() >= 2,
        format!(
            "sup error {worst:.2e}, {} iterations, max residual ratio {ratio:.3}",
            h.len()
        ),
    )
}

fn dpp(toy: &ToyModel, grid: &ValueGrid<usize>) -> Outcome {
    let e =
        dpp_residual(grid, toy, 0.0, &field(0.4), &0, 10_000, 108).map_err(|e| e.to_string())?;
    let tol = 3.0 * e.stderr + 2.0 * 1e-3;
    check(
        e.mean.abs() <= tol,
        format!("residual {:.2e}, tolerance {tol:.2e}", e.mean),
    )
}

fn ladder_monotone(s: &ToySolutions) -> Outcome {
    let states = s.ladder[0].lattice_states();
    let mut worst = f64::NEG_INFINITY;
    for pair in s.ladder.windows(2) {
        for (t, x, d) in &states {
            let lo = pair[0].values_at(*t, x, d).map_err(|e| e.to_string())?;
            let hi = pair[1].values_at(*t, x, d).map_err(|e| e.to_string())?;
            for (a, b) in lo.iter().zip(&hi) {
                worst = worst.max(b - a);
            }
        }
    }
    check(
        worst <= 1e-3,
        format!("largest increase {worst:.2e} over {} states", states.len()),
    )
}

fn feynman_kac(s: &ToySolutions) -> Outcome {
    let sol = s.ladder.last().unwrap();
    let cmp = compare_to_primal(sol, &s.grid, &sol.lattice_states()).map_err(|e| e.to_string())?;
    check(
        cmp.sup_error <= 5e-2 && cmp.control_spread <= 2e-2,
        format!(
            "n = {}: sup error {:.3e}, control spread {:.3e}",
            sol.n_penalty, cmp.sup_error, cmp.control_spread
        ),
    )
}

fn dual_bound(toy: &ToyModel) -> Outcome {
    let lambda0 = Lambda0::uniform(toy.controls().len()).unwrap();
    let oracle =
        brute_force_value(toy, 4, BruteQuad::default(), 1e-3).map_err(|e| e.to_string())?;
    let v = oracle.value(0.0, 0.4, 0);
    let family = TabularNu::new(vec![0, 1], 2, (0.05, 20.0)).map_err(|e| e.to_string())?;
    let search = NuSearch {
        n_paths: 4000,
        seed: 111,
        fresh_seed: 112,
        method: DualMethod::Direct,
        optimizer: NelderMead {
            max_evaluations: 60,
            ..NelderMead::default()
        },
        start: None,
        sim: SimConfig::default(),
    };
    let res = minimize_over_nu(toy, &lambda0, &family, 0.0, &field(0.4), &0, 0.0, &search)
        .map_err(|e| e.to_string())?;
    let f = res.fresh;
    check(
        f.mean >= v - 3.0 * f.stderr,
        format!(
            "dual {:.4}±{:.4}, oracle {v:.4}, gap {:.4}",
            f.mean,
            f.stderr,
            f.mean - v
        ),
    )
}

fn run_track(config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_pdmp-control"))
        .arg("track")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!(
            "track exited with {}: {}",
            status.status,
            String::from_utf8_lossy(&status.stderr)
        ))
    }
}

fn costs(dir: &Path) -> Result<Vec<(String, f64, f64)>, String> {
    let mut rd = csv::Reader::from_path(dir.join("track_costs.csv")).map_err(|e| e.to_string())?;
    rd.records()
        .map(|r| {
            let r = r.map_err(|e| e.to_string())?;
            let num = |i: usize| r[i].parse::<f64>().map_err(|e| e.to_string());
            Ok((r[0].to_string(), num(1)?, num(2)?))
        })
        .collect()
}

fn tracking_demo() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/hh_track.toml");
    let (a, b) = (
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    );
    run_track(&config, a.path())?;
    run_track(&config, b.path())?;

    let table = costs(a.path())?;
    let get = |name: &str| {
        table
            .iter()
            .find(|r| r.0 == name)
            .cloned()
            .ok_or(format!("no {name} row"))
    };
    let (zero, full, opt) = (get("zero")?, get("full")?, get("optimized")?);
    let tol = 3.0 * (zero.2.powi(2) + opt.2.powi(2)).sqrt();

    let mut files: Vec<String> = std::fs::read_dir(a.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    files.sort();
    let mut differing = Vec::new();
    for f in files.iter().filter(|f| *f != "manifest.json") {
        let x = std::fs::read(a.path().join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| e.to_string())?;
        if x != y {
            differing.push(f.clone());
        }
    }
    check(
        opt.1 <= zero.1 + tol && differing.is_empty(),
        format!(
            "a≡0 {:.3}, a≡a_max {:.3}±{:.3}, optimized {:.3}±{:.3}; {} files compared, differing {differing:?}",
            zero.1,
            full.1,
            full.2,
            opt.1,
            opt.2,
            files.len() - 1
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) => (took <= budget, d),
            Err(d) => (false, d),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {detail} ({:.1}s, budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
    };
    let secs = Duration::from_secs;
    report(
        1,
        "semigroup contraction",
        secs(1),
        &mut semigroup_contraction,
    );
    report(
        2,
        "flow integrator cross-oracle",
        secs(10),
        &mut flow_integrators_agree,
    );
    report(3, "voltage invariance", secs(60), &mut voltage_invariance);
    report(4, "jump-law correctness", secs(10), &mut jump_law);
    report(5, "Doleans exponential unit mean", secs(60), &mut unit_mean);
    report(
        6,
        "direct and weighted estimators agree",
        secs(120),
        &mut estimator_equivalence,
    );

    let toy = ToyModel::two_mode_switch();
    let mut grid = None;
    report(
        7,
        "value iteration matches brute force",
        secs(60),
        &mut || {
            let g = toy_value_grid(&toy)?;
            let out = primal_oracle(&toy, &g);
            grid = Some(g);
            out
        },
    );
    let grid = grid.unwrap_or_else(|| toy_value_grid(&toy).expect("value grid"));
    report(8, "DPP residual", secs(60), &mut || dpp(&toy, &grid));
    let mut ladder = None;
    report(9, "penalization ladder is monotone", secs(120), &mut || {
        let l = ToySolutions {
            grid: grid.clone(),
            ladder: toy_ladder(&toy)?,
        };
        let out = ladder_monotone(&l);
        ladder = Some(l);
        out
    });
    report(
        10,
        "Feynman-Kac cross-check",
        secs(120),
        &mut || match &ladder {
            Some(l) => feynman_kac(l),
            None => Err("ladder unavailable".into()),
        },
    );
    report(11, "dual upper bound", secs(120), &mut || dual_bound(&toy));
    report(12, "HH tracking demo", secs(600), &mut tracking_demo);

    println!("{} of 12 criteria passed", 12 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
