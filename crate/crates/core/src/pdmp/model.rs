use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{axpy, dot, laplacian_eigenvalue, SpectralField};

/// Uniform bounds on the running and terminal costs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBounds {
    pub running: f64,
    pub terminal: f64,
}

impl CostBounds {
    /// A-priori bound `‖f‖∞ T + ‖g‖∞` on any value function of the model.
    pub fn value_bound(&self, horizon: f64) -> f64 {
        self.running * horizon + self.terminal
    }
}

/// `x ↦ weight · ⟨x, probe⟩ · emitter`, subtracted from the drift.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneTerm {
    pub weight: f64,
    pub probe: SpectralField,
    pub emitter: SpectralField,
}

/// Affine drift `x ↦ constant − Σ wᵢ ⟨x, probeᵢ⟩ emitterᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineDrift {
    constant: SpectralField,
    terms: Vec<RankOneTerm>,
}

impl AffineDrift {
    pub fn new(constant: SpectralField, terms: Vec<RankOneTerm>) -> Result<Self> {
        let k = constant.modes();
        for t in &terms {
            if !t.weight.is_finite() {
                return Err(Error::param("weight", "rank-one weight must be finite"));
            }
            for f in [&t.probe, &t.emitter] {
                if f.modes() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        found: f.modes(),
                    });
                }
            }
        }
        Ok(AffineDrift { constant, terms })
    }

    pub fn zero(modes: usize) -> Self {
        AffineDrift {
            constant: SpectralField::zeros(modes),
            terms: Vec::new(),
        }
    }

    pub fn constant(&self) -> &SpectralField {
        &self.constant
    }

    pub fn terms(&self) -> &[RankOneTerm] {
        &self.terms
    }

    pub fn modes(&self) -> usize {
        self.constant.modes()
    }

    pub fn apply(&self, x: &SpectralField) -> SpectralField {
        let mut out = self.constant.clone();
        for t in &self.terms {
            let s = t.weight * dot(x.coeffs(), t.probe.coeffs());
            axpy(out.coeffs_mut(), -s, t.emitter.coeffs());
        }
        out
    }

    /// True when every rank-one term has identical probe and emitter, so the
    /// linear part of the flow is symmetric.
    pub fn is_symmetric(&self) -> bool {
        self.terms.iter().all(|t| t.probe == t.emitter)
    }

    /// Matrix of `x ↦ -c L x − Σ wᵢ ⟨x, probeᵢ⟩ emitterᵢ` in the sine basis.
    pub fn linear_matrix(&self, diffusivity: f64) -> DMatrix<f64> {
        let k = self.modes();
        let mut a = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            a[(i, i)] = -diffusivity * laplacian_eigenvalue(i + 1);
        }
        for t in &self.terms {
            let e = t.emitter.coeffs();
            let p = t.probe.coeffs();
            for i in 0..k {
                if e[i] == 0.0 {
                    continue;
                }
                for j in 0..k {
                    a[(i, j)] -= t.weight * e[i] * p[j];
                }
            }
        }
        a
    }
}

/// Drift `b(·, mode, a)` of the flow between jumps.
#[derive(Clone)]
pub enum Drift {
    Affine(AffineDrift),
    Nonlinear(Arc<dyn Fn(&SpectralField) -> SpectralField + Send + Sync>),
}

impl Drift {
    pub fn eval(&self, x: &SpectralField) -> SpectralField {
        match self {
            Drift::Affine(d) => d.apply(x),
            Drift::Nonlinear(f) => f(x),
        }
    }
}

impl Debug for Drift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Drift::Affine(d) => f.debug_tuple("Affine").field(d).finish(),
            Drift::Nonlinear(_) => f.write_str("Nonlinear(..)"),
        }
    }
}

/// State of the PDMP: field, discrete mode and time since the last jump.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState<M> {
    pub field: SpectralField,
    pub mode: M,
    pub clock: f64,
}

impl<M> HybridState<M> {
    pub fn new(field: SpectralField, mode: M) -> Self {
        HybridState {
            field,
            mode,
            clock: 0.0,
        }
    }
}

/// Local characteristics, costs and control set of a controlled PDMP.
///
/// Implementations must keep `rate ≤ rate_bound()` everywhere and return
/// kernel rows summing to one. Jumps leave the field unchanged.
pub trait PdmpModel: Sync {
    type Mode: Clone + Eq + Hash + Debug + Send + Sync;

    /// Number of retained sine modes `K`.
    fn field_modes(&self) -> usize;
    /// Diffusivity `c` in front of `Δ`.
    fn diffusivity(&self) -> f64;
    fn horizon(&self) -> f64;
    fn controls(&self) -> &[f64];
    fn rate_bound(&self) -> f64;
    /// True iff the drift ignores the control.
    fn drift_control_free(&self) -> bool;
    fn drift(&self, mode: &Self::Mode, a: f64) -> Drift;
    fn rate(&self, x: &SpectralField, mode: &Self::Mode, a: f64) -> f64;
    /// Successor modes with their probabilities.
    fn kernel(
        &self,
        x: &SpectralField,
        mode: &Self::Mode,
        a: f64,
    ) -> Result<Vec<(Self::Mode, f64)>>;
    fn running_cost(&self, x: &SpectralField, mode: &Self::Mode, a: f64) -> f64;
    fn terminal_cost(&self, x: &SpectralField, mode: &Self::Mode) -> f64;
    fn cost_bounds(&self) -> CostBounds;

    /// The full mode set, when it is finite and small enough to enumerate.
    fn modes(&self) -> Option<Vec<Self::Mode>> {
        None
    }

    fn mode_label(&self, mode: &Self::Mode) -> String {
        format!("{mode:?}")
    }

    fn is_control(&self, a: f64) -> bool {
        self.controls().iter().any(|c| (c - a).abs() <= 1e-12)
    }
}
