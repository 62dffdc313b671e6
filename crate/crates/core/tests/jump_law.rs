mod common;

use common::{chi_square_p, ks_uniform, poisson_bins, HazardModel};
use pdmp_control::pdmp::{
    dynkin_residual, estimate_cost, path_cost, sample_jump_target, sample_jump_time, simulate,
    write_trajectory_csv, CostBounds, CylindricalTestFn, Drift, DynkinConfig, PdmpModel,
};
use pdmp_control::primal::{brute_force_value, BruteQuad};
use pdmp_control::toy::ToyModel;
use pdmp_control::{rng, ConstantPolicy, Error, Result, SimConfig, SpectralField};
use rand::Rng;

fn x0(v: f64) -> SpectralField {
    SpectralField::new(vec![v]).unwrap()
}

#[test]
fn constant_rate_jump_times_are_exponential() {
    let toy = ToyModel::constant_rate(2.0, 50.0);
    let n = 10_000;
    let mut r = rng::stream(7, "exp", 0);
    let times: Vec<f64> = (0..n)
        .map(|_| {
            sample_jump_time(&toy, &x0(0.0), &0, &|_| 0.0, &mut r, 50.0)
                .unwrap()
                .unwrap()
        })
        .collect();
    let mean = times.iter().sum::<f64>() / n as f64;
    let sd = (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!(
        (mean - 0.5).abs() < 3.0 * sd / (n as f64).sqrt(),
        "mean {mean}"
    );
    let p = ks_uniform(times.iter().map(|t| 1.0 - (-2.0 * t).exp()).collect());
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn time_varying_hazard_matches_closed_form() {
    // Survival e^{−s²/2} on [0, 2]; censored draws are spread uniformly over
    // the remaining probability so the mapped sample is uniform under the null.
    let model = HazardModel::new(2.0);
    let cdf = |s: f64| 1.0 - (-0.5 * s * s).exp();
    let mut r = rng::stream(8, "hazard", 0);
    let mut fill = rng::stream(8, "censor", 0);
    let u: Vec<f64> = (0..10_000)
        .map(
            |_| match sample_jump_time(&model, &x0(0.0), &0, &|_| 0.0, &mut r, 2.0).unwrap() {
                Some(s) => cdf(s),
                None => cdf(2.0) + (1.0 - cdf(2.0)) * fill.random::<f64>(),
            },
        )
        .collect();
    let p = ks_uniform(u);
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn no_rate_means_no_jump() {
    let toy = ToyModel::constant_rate(0.0, 1.0);
    let mut r = rng::stream(1, "none", 0);
    for _ in 0..100 {
        assert!(sample_jump_time(&toy, &x0(0.3), &0, &|_| 0.0, &mut r, 1.0)
            .unwrap()
            .is_none());
    }
    let traj = simulate(
        &toy,
        0.0,
        &x0(0.3),
        &0,
        &ConstantPolicy(0.0),
        &mut r,
        &SimConfig::default(),
    )
    .unwrap();
    assert_eq!(traj.segments.len(), 1);
    assert_eq!(traj.jump_count(), 0);
    let est = estimate_cost(
        &toy,
        0.0,
        &x0(0.3),
        &0,
        &ConstantPolicy(0.0),
        10,
        3,
        &SimConfig::default(),
    )
    .unwrap();
    assert_eq!(est.stderr, 0.0);
    assert!((est.mean - 1.0).abs() < 1e-12);
}

#[test]
fn two_point_kernel_frequencies() {
    let toy = ToyModel {
        diffusivity: 0.0,
        horizon: 1.0,
        controls: vec![0.0],
        drift: vec![0.0; 3],
        rates: vec![vec![1.0]; 3],
        kernel: vec![
            vec![0.0, 0.3, 0.7],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ],
        mode_cost: vec![0.0; 3],
        field_cost: 0.0,
        control_cost: 0.0,
        terminal: vec![0.0; 3],
    };
    toy.validate().unwrap();
    let n = 10_000;
    let mut r = rng::stream(2, "kernel", 0);
    let hits = (0..n)
        .filter(|_| sample_jump_target(&toy, &x0(0.0), &0, 0.0, &mut r).unwrap() == 1)
        .count();
    let p = hits as f64 / n as f64;
    let se = (0.3f64 * 0.7 / n as f64).sqrt();
    assert!((p - 0.3).abs() < 3.0 * se, "frequency {p}");
    assert_eq!(
        sample_jump_target(&toy, &x0(0.0), &1, 0.0, &mut r).unwrap(),
        0
    );
}

#[test]
fn jump_counts_are_poisson() {
    let toy = ToyModel::constant_rate(1.5, 2.0);
    let n = 10_000;
    let bins = 12;
    let mut observed = vec![0.0; bins];
    for i in 0..n {
        let mut r = rng::stream(4, "counts", i);
        let traj = simulate(
            &toy,
            0.0,
            &x0(0.0),
            &0,
            &ConstantPolicy(0.0),
            &mut r,
            &SimConfig::default(),
        )
        .unwrap();
        observed[traj.jump_count().min(bins - 1)] += 1.0;
        assert!(traj.jump_times.windows(2).all(|w| w[0] < w[1]));
        assert!(traj.jump_times.iter().all(|t| *t > 0.0 && *t <= 2.0));
    }
    let expected: Vec<f64> = poisson_bins(3.0, bins)
        .iter()
        .map(|p| p * n as f64)
        .collect();
    let p = chi_square_p(&observed, &expected);
    assert!(p > 0.01, "chi-square p = {p}");
}

/// Forwards to the hazard model but declares a rate bound that is too small.
struct Misdeclared(HazardModel);

impl PdmpModel for Misdeclared {
    type Mode = usize;
    fn field_modes(&self) -> usize {
        1
    }
    fn diffusivity(&self) -> f64 {
        self.0.diffusivity()
    }
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }
    fn controls(&self) -> &[f64] {
        self.0.controls()
    }
    fn rate_bound(&self) -> f64 {
        0.5
    }
    fn drift_control_free(&self) -> bool {
        true
    }
    fn drift(&self, m: &usize, a: f64) -> Drift {
        self.0.drift(m, a)
    }
    fn rate(&self, x: &SpectralField, m: &usize, a: f64) -> f64 {
        self.0.rate(x, m, a)
    }
    fn kernel(&self, x: &SpectralField, m: &usize, a: f64) -> Result<Vec<(usize, f64)>> {
        self.0.kernel(x, m, a)
    }
    fn running_cost(&self, _: &SpectralField, _: &usize, _: f64) -> f64 {
        0.0
    }
    fn terminal_cost(&self, _: &SpectralField, _: &usize) -> f64 {
        0.0
    }
    fn cost_bounds(&self) -> CostBounds {
        self.0.cost_bounds()
    }
}

#[test]
fn misdeclared_rate_bound_is_a_hard_error() {
    let model = Misdeclared(HazardModel::new(2.0));
    let mut violations = 0;
    for i in 0..20 {
        let mut r = rng::stream(5, "misdeclared", i);
        match simulate(
            &model,
            0.0,
            &x0(0.0),
            &0,
            &ConstantPolicy(0.0),
            &mut r,
            &SimConfig::default(),
        ) {
            Err(Error::RateBoundViolated { rate, bound }) => {
                assert!(rate > bound);
                violations += 1;
            }
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => {}
        }
    }
    assert!(violations > 0);
}

#[test]
fn jump_cap_guards_explosion() {
    let toy = ToyModel::constant_rate(5.0, 10.0);
    let cfg = SimConfig {
        jump_cap: 3,
        ..SimConfig::default()
    };
    let mut r = rng::stream(6, "cap", 0);
    let out = simulate(&toy, 0.0, &x0(0.0), &0, &ConstantPolicy(0.0), &mut r, &cfg);
    assert!(matches!(out, Err(Error::JumpCapExceeded(3))));
}

#[test]
fn simulation_is_a_pure_function_of_the_seed() {
    let toy = ToyModel::two_mode_switch();
    let run = || {
        let mut r = rng::stream(9, "pure", 3);
        simulate(
            &toy,
            0.0,
            &x0(0.4),
            &0,
            &ConstantPolicy(1.0),
            &mut r,
            &SimConfig::default(),
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_trajectory_csv(&toy, &a, 8, &mut ca).unwrap();
    write_trajectory_csv(&toy, &b, 8, &mut cb).unwrap();
    assert_eq!(ca, cb);
    assert!(String::from_utf8(ca)
        .unwrap()
        .starts_with("time,mode,v@0.0000"));
}

#[test]
fn path_cost_of_a_unit_running_cost() {
    let mut toy = ToyModel::constant_rate(1.0, 2.0);
    toy.mode_cost = vec![1.0, 1.0];
    let mut r = rng::stream(10, "unit", 0);
    let traj = simulate(
        &toy,
        0.0,
        &x0(0.0),
        &0,
        &ConstantPolicy(0.0),
        &mut r,
        &SimConfig::default(),
    )
    .unwrap();
    assert!((path_cost(&toy, &traj) - 2.0).abs() < 1e-9);
}

#[test]
fn estimated_cost_matches_the_brute_force_oracle() {
    // A constant control on the switching toy is the one-control restriction.
    let toy = ToyModel::two_mode_switch();
    let mut frozen = toy.clone();
    frozen.controls = vec![1.0];
    frozen.rates = toy.rates.iter().map(|r| vec![r[1]]).collect();
    let oracle = brute_force_value(&frozen, 5, BruteQuad::default(), 1e-4).unwrap();
    let est = estimate_cost(
        &toy,
        0.0,
        &x0(0.5),
        &0,
        &ConstantPolicy(1.0),
        10_000,
        11,
        &SimConfig::default(),
    )
    .unwrap();
    let exact = oracle.value(0.0, 0.5, 0);
    assert!(
        (est.mean - exact).abs() <= 3.0 * est.stderr + 1e-3,
        "{} ± {} vs {exact}",
        est.mean,
        est.stderr
    );
}

struct Constant;

impl CylindricalTestFn<usize> for Constant {
    fn arity(&self) -> usize {
        1
    }
    fn value(&self, _: f64, _: &[f64], _: &usize) -> f64 {
        3.0
    }
    fn time_derivative(&self, _: f64, _: &[f64], _: &usize) -> f64 {
        0.0
    }
    fn gradient(&self, _: f64, _: &[f64], _: &usize) -> Vec<f64> {
        vec![0.0]
    }
}

struct Clock;

impl CylindricalTestFn<usize> for Clock {
    fn arity(&self) -> usize {
        1
    }
    fn value(&self, s: f64, _: &[f64], _: &usize) -> f64 {
        s
    }
    fn time_derivative(&self, _: f64, _: &[f64], _: &usize) -> f64 {
        1.0
    }
    fn gradient(&self, _: f64, _: &[f64], _: &usize) -> Vec<f64> {
        vec![0.0]
    }
}

#[test]
fn dynkin_residual_vanishes_for_trivial_test_functions() {
    let toy = ToyModel::two_mode_switch();
    let cfg = DynkinConfig {
        stop_time: 1.0,
        radius: 10.0,
        n_paths: 200,
        seed: 12,
    };
    let sim = SimConfig::default();
    let r = dynkin_residual(
        &toy,
        &Constant,
        0.0,
        &x0(0.5),
        &0,
        &ConstantPolicy(0.0),
        &cfg,
        &sim,
    )
    .unwrap();
    assert_eq!(r.mean, 0.0);
    let still = ToyModel::constant_rate(0.0, 1.0);
    let r = dynkin_residual(
        &still,
        &Clock,
        0.2,
        &x0(0.5),
        &0,
        &ConstantPolicy(0.0),
        &cfg,
        &sim,
    )
    .unwrap();
    assert!(r.mean.abs() < 1e-12);
}
