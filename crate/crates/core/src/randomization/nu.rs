use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

/// Finite reference measure on the control grid; every point has positive
/// mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambda0 {
    weights: Vec<f64>,
}

impl Lambda0 {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::param(
                "lambda0",
                "weights must be positive and finite",
            ));
        }
        Ok(Lambda0 { weights })
    }

    /// Mass `1/n` on each of `n` controls.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("lambda0", "empty control grid"));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `λ₀(A)`.
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Intensity change `ν(s, x, d, I, b)` of the control jumps towards
/// candidate `b`, in feedback form. Controls are passed as grid indices.
pub trait NuPolicy<M>: Sync {
    fn nu(&self, s: f64, field: &SpectralField, mode: &M, current: usize, candidate: usize) -> f64;

    /// `[ν_min, ν_max]`.
    fn bounds(&self) -> (f64, f64);

    /// A bound on the values actually taken, used for thinning.
    fn sup(&self) -> f64 {
        self.bounds().1
    }
}

/// `ν ≡ c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantNu(pub f64);

impl<M> NuPolicy<M> for ConstantNu {
    fn nu(&self, _: f64, _: &SpectralField, _: &M, _: usize, _: usize) -> f64 {
        self.0
    }

    fn bounds(&self) -> (f64, f64) {
        (self.0, self.0)
    }
}

/// Closure-backed `ν` with declared bounds.
pub struct FnNu<F> {
    pub rule: F,
    pub bounds: (f64, f64),
}

impl<M, F> NuPolicy<M> for FnNu<F>
where
    F: Fn(f64, &SpectralField, &M, usize, usize) -> f64 + Sync,
{
    fn nu(&self, s: f64, field: &SpectralField, mode: &M, current: usize, candidate: usize) -> f64 {
        (self.rule)(s, field, mode, current, candidate)
    }

    fn bounds(&self) -> (f64, f64) {
        self.bounds
    }
}

/// `ν(d, b) = clamp(exp θ_{d,b}, ν_min, ν_max)`, one parameter per
/// (mode, candidate control). Modes outside the table get `ν = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularNu<M: Eq + Hash> {
    modes: Vec<M>,
    index: HashMap<M, usize>,
    controls: usize,
    log_nu: Vec<f64>,
    bounds: (f64, f64),
}

impl<M: Clone + Eq + Hash> TabularNu<M> {
    pub fn new(modes: Vec<M>, controls: usize, bounds: (f64, f64)) -> Result<Self> {
        let (lo, hi) = bounds;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            return Err(Error::param(
                "nu_bounds",
                "need 0 < nu_min <= 1 <= nu_max < inf",
            ));
        }
        if controls == 0 || modes.is_empty() {
            return Err(Error::param("nu", "empty table"));
        }
        let index: HashMap<M, usize> = modes
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        Ok(TabularNu {
            log_nu: vec![0.0; modes.len() * controls],
            modes,
            index,
            controls,
            bounds,
        })
    }

    /// Number of free parameters.
    pub fn dim(&self) -> usize {
        self.log_nu.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.log_nu
    }

    pub fn modes(&self) -> &[M] {
        &self.modes
    }

    pub fn controls(&self) -> usize {
        self.controls
    }

    pub fn with_params(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: theta.len(),
            });
        }
        Ok(TabularNu {
            log_nu: theta.to_vec(),
            ..self.clone()
        })
    }

    pub fn value(&self, mode: &M, candidate: usize) -> f64 {
        let raw = match self.index.get(mode) {
            Some(i) => self.log_nu[i * self.controls + candidate].exp(),
            None => 1.0,
        };
        raw.clamp(self.bounds.0, self.bounds.1)
    }
}

impl<M: Clone + Eq + Hash + Sync> NuPolicy<M> for TabularNu<M> {
    fn nu(&self, _: f64, _: &SpectralField, mode: &M, _: usize, candidate: usize) -> f64 {
        self.value(mode, candidate)
    }

    fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn sup(&self) -> f64 {
        self.log_nu
            .iter()
            .map(|t| t.exp().clamp(self.bounds.0, self.bounds.1))
            .fold(1.0, f64::max)
    }
}
