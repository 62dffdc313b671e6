use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pdmp::PdmpModel;
use crate::quadrature::gauss_legendre;
use crate::toy::ToyModel;

/// Quadrature for the brute-force oracle: composite Gauss–Legendre on every
/// inter-jump interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BruteQuad {
    pub panels: usize,
    pub order: usize,
}

impl Default for BruteQuad {
    fn default() -> Self {
        BruteQuad {
            panels: 1,
            order: 6,
        }
    }
}

/// Expected cost of the toy model expanded over at most `jump_cap` jumps,
/// minimized over one constant control per inter-jump segment.
///
/// With `V₋₁ ≡ 0`,
/// `V_k(t,x,d) = min_a ∫₀^{T−t} e^{−λs}(f(φ_s) + λ Σ Q V_{k−1}(t+s, φ_s, ·)) ds + e^{−λ(T−t)} g`,
/// evaluated with nested quadrature and the closed-form flow. This equals
/// the value function up to the truncation bound whenever the optimal
/// feedback is constant between jumps, which holds for every toy whose
/// costs do not depend on the control.
#[derive(Clone, Debug)]
pub struct BruteForce {
    toy: ToyModel,
    cap: usize,
    nodes: Vec<(f64, f64)>,
    truncation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BruteRow {
    pub t: f64,
    pub x: f64,
    pub mode: usize,
    pub value: f64,
}

/// `P(N ≥ n)` for `N ~ Poisson(mu)`.
fn poisson_tail(mu: f64, n: usize) -> f64 {
    let mut term = (-mu).exp();
    let mut below = 0.0;
    for k in 0..n {
        below += term;
        term *= mu / (k + 1) as f64;
    }
    (1.0 - below).max(0.0)
}

/// Builds the oracle; errors when the bound on the contribution of paths
/// with more than `jump_cap` jumps exceeds `tol`.
pub fn brute_force_value(
    toy: &ToyModel,
    jump_cap: usize,
    quad: BruteQuad,
    tol: f64,
) -> Result<BruteForce> {
    toy.validate()?;
    if quad.panels == 0 || quad.order == 0 {
        return Err(Error::param("quad", "need at least one panel and node"));
    }
    let (x, w) = gauss_legendre(quad.order);
    let width = 1.0 / quad.panels as f64;
    let nodes = (0..quad.panels)
        .flat_map(|p| {
            let mid = (p as f64 + 0.5) * width;
            x.iter()
                .zip(&w)
                .map(move |(xi, wi)| (mid + 0.5 * width * xi, 0.5 * width * wi))
                .collect::<Vec<_>>()
        })
        .collect();
    let mu = toy.rate_bound() * toy.horizon;
    let truncation = toy.cost_bounds().value_bound(toy.horizon) * poisson_tail(mu, jump_cap + 1);
    if truncation > tol {
        return Err(Error::JumpCapTooSmall {
            cap: jump_cap,
            bound: truncation,
            tol,
        });
    }
    Ok(BruteForce {
        toy: toy.clone(),
        cap: jump_cap,
        nodes,
        truncation,
    })
}

impl BruteForce {
    /// Upper bound on `|V − V_cap|` from the ignored jump counts.
    pub fn truncation_bound(&self) -> f64 {
        self.truncation
    }

    pub fn jump_cap(&self) -> usize {
        self.cap
    }

    pub fn value(&self, t: f64, x: f64, mode: usize) -> f64 {
        self.level(t, x, mode, self.cap)
    }

    fn level(&self, t: f64, x: f64, d: usize, k: usize) -> f64 {
        let toy = &self.toy;
        let span = toy.horizon - t;
        if span <= 0.0 {
            return toy.terminal[d];
        }
        let mut best = f64::INFINITY;
        for (j, &a) in toy.controls.iter().enumerate() {
            let lambda = toy.rates[d][j];
            let mut acc = 0.0;
            for &(u, w) in &self.nodes {
                let s = u * span;
                let y = toy.flow(x, d, s);
                let mut integrand = toy.running_cost_of(y, d, a);
                if k > 0 && lambda > 0.0 {
                    let next: f64 = toy.kernel[d]
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| **p > 0.0)
                        .map(|(e, p)| p * self.level(t + s, y, e, k - 1))
                        .sum();
                    integrand += lambda * next;
                }
                acc += w * span * (-lambda * s).exp() * integrand;
            }
            acc += (-lambda * span).exp() * toy.terminal[d];
            if acc < best {
                best = acc;
            }
        }
        best
    }

    /// Values on the product of `times`, `xs` and all modes, row order
    /// time, then x, then mode.
    pub fn table(&self, times: &[f64], xs: &[f64]) -> Vec<BruteRow> {
        let modes = self.toy.mode_count();
        let jobs: Vec<(f64, f64, usize)> = times
            .iter()
            .flat_map(|&t| {
                xs.iter()
                    .flat_map(move |&x| (0..modes).map(move |m| (t, x, m)))
            })
            .collect();
        jobs.into_par_iter()
            .map(|(t, x, mode)| BruteRow {
                t,
                x,
                mode,
                value: self.value(t, x, mode),
            })
            .collect()
    }
}
