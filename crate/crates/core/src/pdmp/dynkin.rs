use rayon::prelude::*;

use super::flow::FlowCache;
use super::model::PdmpModel;
use super::simulate::{simulate_with_cache, OpenLoopPolicy, SimConfig};
use crate::error::{Error, Result};
use crate::quadrature::trapezoid;
use crate::rng;
use crate::spectral::{laplacian_eigenvalue, SpectralField};
use crate::stats::Estimate;

/// Smooth test function `ψ(s, x_1..x_m, mode)` depending on the first `m`
/// sine coefficients, with analytic derivatives.
pub trait CylindricalTestFn<M>: Sync {
    /// Number of coefficients `m` the function reads.
    fn arity(&self) -> usize;
    fn value(&self, s: f64, coeffs: &[f64], mode: &M) -> f64;
    fn time_derivative(&self, s: f64, coeffs: &[f64], mode: &M) -> f64;
    /// `∂ψ/∂x_k`, `k = 1..=m`.
    fn gradient(&self, s: f64, coeffs: &[f64], mode: &M) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug)]
pub struct DynkinConfig {
    /// Deterministic stopping time `T'` (absolute).
    pub stop_time: f64,
    /// Paths are stopped at the first recorded sample with `‖X‖ > radius`.
    pub radius: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Extended generator `∂ψ/∂t + ⟨b − cLx, Dψ⟩ + λ ∫(ψ(y) − ψ(x)) Q(dy)`.
fn generator<Mo, F>(
    model: &Mo,
    psi: &F,
    s: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    a: f64,
) -> Result<f64>
where
    Mo: PdmpModel,
    F: CylindricalTestFn<Mo::Mode> + ?Sized,
{
    let m = psi.arity();
    let coeffs = &x.coeffs()[..m];
    let grad = psi.gradient(s, coeffs, mode);
    let b = model.drift(mode, a).eval(x);
    let c = model.diffusivity();
    let transport: f64 = (0..m)
        .map(|k| (b.coeffs()[k] - c * laplacian_eigenvalue(k + 1) * coeffs[k]) * grad[k])
        .sum();
    let lambda = model.rate(x, mode, a);
    let jump = if lambda > 0.0 {
        let here = psi.value(s, coeffs, mode);
        model
            .kernel(x, mode, a)?
            .iter()
            .map(|(y, p)| p * (psi.value(s, coeffs, y) - here))
            .sum::<f64>()
            * lambda
    } else {
        0.0
    };
    Ok(psi.time_derivative(s, coeffs, mode) + transport + jump)
}

/// Monte Carlo residual of the Dynkin formula
/// `E[ψ(τ, X_τ)] − ψ(t, x) − E[∫_t^τ 𝓛ψ(r, X_r) dr]`, which vanishes for an
/// exact simulation. `τ` is the last recorded sample not after `stop_time`
/// and before the first exit from the ball of radius `radius`; put
/// `stop_time` on the recording grid for an exact deterministic stop. The
/// time integral uses the trapezoid rule on the recorded samples.
pub fn dynkin_residual<Mo, F, P>(
    model: &Mo,
    psi: &F,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    policy: &P,
    dcfg: &DynkinConfig,
    sim: &SimConfig,
) -> Result<Estimate>
where
    Mo: PdmpModel,
    F: CylindricalTestFn<Mo::Mode> + ?Sized,
    P: OpenLoopPolicy<Mo::Mode> + ?Sized,
{
    if psi.arity() > model.field_modes() {
        return Err(Error::param(
            "arity",
            "test function reads more modes than the field has",
        ));
    }
    if dcfg.stop_time > model.horizon() || dcfg.stop_time < t {
        return Err(Error::param("stop_time", "must lie in [t, T]"));
    }
    let m = psi.arity();
    let start = psi.value(t, &x.coeffs()[..m], mode);
    let cache = FlowCache::new();
    let residuals = (0..dcfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(dcfg.seed, "dynkin", i as u64);
            let traj = simulate_with_cache(model, &cache, t, x, mode, policy, &mut rng, sim)?;
            let mut integral = 0.0;
            let mut last = start;
            'segments: for seg in &traj.segments {
                let mut times = Vec::new();
                let mut values = Vec::new();
                for ((s, y), a) in seg.times.iter().zip(&seg.fields).zip(&seg.controls) {
                    if *s > dcfg.stop_time + 1e-12 {
                        break;
                    }
                    times.push(*s);
                    values.push(generator(model, psi, *s, y, &seg.mode, *a)?);
                    last = psi.value(*s, &y.coeffs()[..m], &seg.mode);
                    if y.norm(crate::NormKind::L2) > dcfg.radius {
                        integral += trapezoid(&times, &values);
                        break 'segments;
                    }
                }
                integral += trapezoid(&times, &values);
                if seg
                    .times
                    .last()
                    .is_some_and(|s| *s > dcfg.stop_time + 1e-12)
                {
                    break;
                }
            }
            Ok(last - start - integral)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&residuals))
}
