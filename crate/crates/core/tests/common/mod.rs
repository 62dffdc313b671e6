//! Statistical oracles and small reference models shared by the
//! integration tests.
#![allow(dead_code)]

use pdmp_control::pdmp::{AffineDrift, CostBounds, Drift, PdmpModel};
use pdmp_control::spectral::{PointEvaluator, SpectralField};
use pdmp_control::Result;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Asymptotic Kolmogorov p-value of the one-sample statistic `d` for `n`
/// samples, with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of samples already mapped through the hypothesised
/// CDF, so that they are uniform under the null.
pub fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    ks_p_value(d, u.len())
}

/// Pearson chi-square p-value. Adjacent bins are pooled until each has an
/// expected count of at least 5.
pub fn chi_square_p(observed: &[f64], expected: &[f64]) -> f64 {
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (oi, ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= 5.0 {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    let stat: f64 = pooled.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (pooled.len() as f64 - 1.0).max(1.0);
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Poisson probabilities `P(N = k)`, `k < bins − 1`, with the last bin
/// holding the tail.
pub fn poisson_bins(mean: f64, bins: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(bins);
    let mut p = (-mean).exp();
    let mut acc = 0.0;
    for k in 0..bins - 1 {
        out.push(p);
        acc += p;
        p *= mean / (k + 1) as f64;
    }
    out.push((1.0 - acc).max(0.0));
    out
}

/// Single-mode model whose rate along the flow from `x = 0` equals the
/// elapsed time: `ẋ = −π² x + γ`, `λ(x) = −ln(1 − π² x/γ)/π²`. The jump
/// time from the origin has survival `e^{−s²/2}`. Jumps return to the same
/// mode and leave the field unchanged.
pub struct HazardModel {
    pub gamma: f64,
    pub horizon: f64,
    controls: Vec<f64>,
}

impl HazardModel {
    pub fn new(horizon: f64) -> Self {
        HazardModel {
            gamma: 1.0,
            horizon,
            controls: vec![0.0],
        }
    }
}

impl PdmpModel for HazardModel {
    type Mode = usize;

    fn field_modes(&self) -> usize {
        1
    }
    fn diffusivity(&self) -> f64 {
        1.0
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn controls(&self) -> &[f64] {
        &self.controls
    }
    fn rate_bound(&self) -> f64 {
        self.horizon * 1.01
    }
    fn drift_control_free(&self) -> bool {
        true
    }
    fn drift(&self, _: &usize, _: f64) -> Drift {
        Drift::Affine(
            AffineDrift::new(SpectralField::new(vec![self.gamma]).unwrap(), Vec::new()).unwrap(),
        )
    }
    fn rate(&self, x: &SpectralField, _: &usize, _: f64) -> f64 {
        let pi2 = std::f64::consts::PI.powi(2);
        let r = 1.0 - pi2 * x.coeffs()[0] / self.gamma;
        (-r.max(1e-300).ln() / pi2).max(0.0)
    }
    fn kernel(&self, _: &SpectralField, _: &usize, _: f64) -> Result<Vec<(usize, f64)>> {
        Ok(vec![(0, 1.0)])
    }
    fn running_cost(&self, _: &SpectralField, _: &usize, _: f64) -> f64 {
        0.0
    }
    fn terminal_cost(&self, _: &SpectralField, _: &usize) -> f64 {
        0.0
    }
    fn cost_bounds(&self) -> CostBounds {
        CostBounds {
            running: 0.0,
            terminal: 0.0,
        }
    }
}

/// Random band-limited field with sine modes `1..=6` and decaying spectrum,
/// scaled so that its values on a fine grid lie in `[lo, hi]`. The scale
/// factor is drawn uniformly up to the largest admissible one, so some
/// starts touch the bounds.
pub fn admissible_start<R: Rng>(rng: &mut R, modes: usize, lo: f64, hi: f64) -> SpectralField {
    let mut c = vec![0.0; modes];
    for (k, ck) in c.iter_mut().enumerate().take(6.min(modes)) {
        *ck = (2.0 * rng.random::<f64>() - 1.0) / (k + 1) as f64;
    }
    let v = SpectralField::new(c).unwrap();
    let (vmin, vmax) = PointEvaluator::uniform(modes, 400).range(&v);
    let mut scale = f64::INFINITY;
    if vmax > 0.0 {
        scale = scale.min(hi / vmax);
    }
    if vmin < 0.0 {
        scale = scale.min(lo / vmin);
    }
    v.scale(scale * rng.random::<f64>())
}

/// Random field with independent coefficients of magnitude `≤ amp / k`.
pub fn random_field<R: Rng>(rng: &mut R, modes: usize, amp: f64) -> SpectralField {
    SpectralField::new(
        (0..modes)
            .map(|k| amp * (2.0 * rng.random::<f64>() - 1.0) / (k + 1) as f64)
            .collect(),
    )
    .unwrap()
}
