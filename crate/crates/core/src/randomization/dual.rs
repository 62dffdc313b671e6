use std::cell::RefCell;
use std::hash::Hash;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nu::{Lambda0, NuPolicy, TabularNu};
use super::xi::{doleans_weight, dual_cost, simulate_xi_with_cache};
use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::pdmp::{FlowCache, PdmpModel, SimConfig};
use crate::rng;
use crate::spectral::SpectralField;
use crate::stats::Estimate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualMethod {
    /// Simulate under `ν`.
    Direct,
    /// Simulate under the reference law and weight by the Doléans-Dade
    /// exponential.
    Weighted,
}

/// Monte Carlo estimate of the dual cost `J(t, x, a, ν)`. Path `i` uses
/// stream `(seed, "xi", i)` for either method, so `ν ≡ 1` gives identical
/// samples under both.
pub fn estimate_dual<Mo: PdmpModel>(
    model: &Mo,
    lambda0: &Lambda0,
    nu: &dyn NuPolicy<Mo::Mode>,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    a: f64,
    n_paths: usize,
    seed: u64,
    method: DualMethod,
    cfg: &SimConfig,
) -> Result<Estimate> {
    Ok(Estimate::from_samples(&dual_samples(
        model, lambda0, nu, t, x, mode, a, n_paths, seed, method, cfg,
    )?))
}

pub(crate) fn dual_samples<Mo: PdmpModel>(
    model: &Mo,
    lambda0: &Lambda0,
    nu: &dyn NuPolicy<Mo::Mode>,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    a: f64,
    n_paths: usize,
    seed: u64,
    method: DualMethod,
    cfg: &SimConfig,
) -> Result<Vec<f64>> {
    if n_paths < 2 {
        return Err(Error::param("n_paths", "need at least two paths"));
    }
    let cache = FlowCache::new();
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, "xi", i as u64);
            match method {
                DualMethod::Direct => {
                    let path = simulate_xi_with_cache(
                        model,
                        &cache,
                        lambda0,
                        Some(nu),
                        t,
                        x,
                        mode,
                        a,
                        &mut rng,
                        cfg,
                    )?;
                    Ok(dual_cost(model, &path))
                }
                DualMethod::Weighted => {
                    let path = simulate_xi_with_cache(
                        model, &cache, lambda0, None, t, x, mode, a, &mut rng, cfg,
                    )?;
                    Ok(dual_cost(model, &path) * doleans_weight(&path, nu, lambda0)?)
                }
            }
        })
        .collect()
}

/// Settings of the search over a tabular `ν` family.
#[derive(Clone, Debug)]
pub struct NuSearch {
    pub n_paths: usize,
    /// Seed of the common random numbers shared by all evaluations.
    pub seed: u64,
    /// Seed of the independent re-estimate of the winner.
    pub fresh_seed: u64,
    pub method: DualMethod,
    pub optimizer: NelderMead,
    /// Starting `log ν`; zeros (`ν ≡ 1`) when absent.
    pub start: Option<Vec<f64>>,
    pub sim: SimConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub params: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug)]
pub struct NuSearchResult<M: Eq + Hash> {
    pub nu: TabularNu<M>,
    /// Estimate of the winner on the search's random numbers (biased low).
    pub estimate: Estimate,
    /// Estimate of the winner on fresh random numbers.
    pub fresh: Estimate,
    pub trace: Vec<TraceRow>,
    /// True when the evaluation budget ran out before the simplex converged.
    pub exhausted: bool,
}

/// Nelder–Mead over the `log ν` table of `family`, minimizing the dual cost
/// estimate with common random numbers. Every `ν` in the family is a
/// randomized admissible control, so the result is an upper bound on the
/// value up to Monte Carlo error.
pub fn minimize_over_nu<Mo: PdmpModel>(
    model: &Mo,
    lambda0: &Lambda0,
    family: &TabularNu<Mo::Mode>,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    a: f64,
    search: &NuSearch,
) -> Result<NuSearchResult<Mo::Mode>> {
    let start = search
        .start
        .clone()
        .unwrap_or_else(|| family.params().to_vec());
    let trace: RefCell<Vec<TraceRow>> = RefCell::new(Vec::new());
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let objective = |theta: &[f64]| -> f64 {
        if failure.borrow().is_some() {
            return f64::INFINITY;
        }
        let est = family.with_params(theta).and_then(|nu| {
            estimate_dual(
                model,
                lambda0,
                &nu,
                t,
                x,
                mode,
                a,
                search.n_paths,
                search.seed,
                search.method,
                &search.sim,
            )
        });
        match est {
            Ok(e) => {
                let mut tr = trace.borrow_mut();
                let iteration = tr.len();
                tr.push(TraceRow {
                    iteration,
                    params: theta.to_vec(),
                    mean: e.mean,
                    stderr: e.stderr,
                });
                e.mean
            }
            Err(err) => {
                *failure.borrow_mut() = Some(err);
                f64::INFINITY
            }
        }
    };
    let min = search.optimizer.minimize(objective, &start);
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    let trace = trace.into_inner();
    let best = trace
        .iter()
        .min_by(|p, q| p.mean.total_cmp(&q.mean))
        .cloned()
        .ok_or_else(|| Error::param("budget", "no evaluations"))?;
    let nu = family.with_params(&best.params)?;
    let fresh = estimate_dual(
        model,
        lambda0,
        &nu,
        t,
        x,
        mode,
        a,
        search.n_paths,
        search.fresh_seed,
        search.method,
        &search.sim,
    )?;
    Ok(NuSearchResult {
        nu,
        estimate: Estimate {
            mean: best.mean,
            stderr: best.stderr,
            n: search.n_paths,
        },
        fresh,
        exhausted: min.evaluations >= search.optimizer.max_evaluations,
        trace,
    })
}

/// CSV rows `iteration,theta_0..theta_k,mean,stderr`.
pub fn write_search_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = rows.first().map_or(0, |r| r.params.len());
    let mut header = vec!["iteration".to_string()];
    header.extend((0..dim).map(|k| format!("theta_{k}")));
    header.extend(["mean".to_string(), "stderr".to_string()]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.iteration.to_string()];
        rec.extend(r.params.iter().map(|p| format!("{p:.9}")));
        rec.push(format!("{:.12e}", r.mean));
        rec.push(format!("{:.12e}", r.stderr));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
