use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::model::{AffineDrift, Drift, PdmpModel};
use crate::error::{Error, Result};
use crate::spectral::{apply_semigroup_in_place, axpy, SpectralField};

/// Exact propagator of an affine flow `ẋ = A x + b`.
#[derive(Clone, Debug)]
pub enum Propagator {
    /// Symmetric `A = U diag(μ) Uᵀ`; any step costs two matrix-vector products.
    Spectral {
        basis: DMatrix<f64>,
        eigenvalues: DVector<f64>,
        forcing: DVector<f64>,
    },
    /// General `A`: dense exponential of the augmented `(K+1)` generator per step.
    Dense { generator: DMatrix<f64> },
}

fn augmented_generator(drift: &AffineDrift, diffusivity: f64) -> DMatrix<f64> {
    let k = drift.modes();
    let a = drift.linear_matrix(diffusivity);
    let mut g = DMatrix::<f64>::zeros(k + 1, k + 1);
    g.view_mut((0, 0), (k, k)).copy_from(&a);
    for i in 0..k {
        g[(i, k)] = drift.constant().coeffs()[i];
    }
    g
}

/// `(e^z − 1)/z`, continuous at 0.
fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

impl Propagator {
    pub fn for_affine(drift: &AffineDrift, diffusivity: f64) -> Self {
        if drift.is_symmetric() {
            let a = drift.linear_matrix(diffusivity);
            let eig = SymmetricEigen::new(a);
            let b = DVector::from_column_slice(drift.constant().coeffs());
            let forcing = eig.eigenvectors.transpose() * b;
            Propagator::Spectral {
                basis: eig.eigenvectors,
                eigenvalues: eig.eigenvalues,
                forcing,
            }
        } else {
            Propagator::Dense {
                generator: augmented_generator(drift, diffusivity),
            }
        }
    }

    /// Field after time `dt` starting from `x`.
    pub fn advance(&self, x: &SpectralField, dt: f64) -> SpectralField {
        if dt == 0.0 {
            return x.clone();
        }
        match self {
            Propagator::Spectral {
                basis,
                eigenvalues,
                forcing,
            } => {
                let xv = DVector::from_column_slice(x.coeffs());
                let mut y = basis.tr_mul(&xv);
                for j in 0..y.len() {
                    let z = eigenvalues[j] * dt;
                    y[j] = z.exp() * y[j] + dt * phi1(z) * forcing[j];
                }
                SpectralField::from_vec_unchecked((basis * y).as_slice().to_vec())
            }
            Propagator::Dense { generator } => {
                let step = (generator * dt).exp();
                apply_augmented(&step, x)
            }
        }
    }
}

fn apply_augmented(step: &DMatrix<f64>, x: &SpectralField) -> SpectralField {
    let k = x.modes();
    let mut xa = DVector::<f64>::zeros(k + 1);
    xa.rows_mut(0, k).copy_from_slice(x.coeffs());
    xa[k] = 1.0;
    let y = step * xa;
    SpectralField::from_vec_unchecked(y.rows(0, k).as_slice().to_vec())
}

/// Thread-safe cache of affine propagators keyed by mode (and by control
/// when the drift depends on it).
pub struct FlowCache<M> {
    map: RwLock<HashMap<(M, u64), Arc<Propagator>>>,
}

impl<M: Clone + Eq + Hash> Default for FlowCache<M> {
    fn default() -> Self {
        FlowCache {
            map: RwLock::new(HashMap::new()),
        }
    }
}

impl<M: Clone + Eq + Hash> FlowCache<M> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Propagator for `(mode, a)`, or `None` when the drift is not affine.
    pub fn propagator<Mo>(&self, model: &Mo, mode: &M, a: f64) -> Option<Arc<Propagator>>
    where
        Mo: PdmpModel<Mode = M> + ?Sized,
    {
        let key_a = if model.drift_control_free() {
            0
        } else {
            a.to_bits()
        };
        let key = (mode.clone(), key_a);
        if let Some(p) = self.map.read().expect("flow cache poisoned").get(&key) {
            return Some(p.clone());
        }
        let Drift::Affine(drift) = model.drift(mode, a) else {
            return None;
        };
        let p = Arc::new(Propagator::for_affine(&drift, model.diffusivity()));
        self.map
            .write()
            .expect("flow cache poisoned")
            .entry(key)
            .or_insert(p)
            .clone()
            .into()
    }

    /// Advances `x` from elapsed time `from` to `to` under the control path
    /// `control(elapsed)`. Uses the exact propagator when the drift is affine
    /// and the control is frozen or irrelevant, Lawson RK4 otherwise.
    pub(crate) fn advance<Mo>(
        &self,
        model: &Mo,
        mode: &M,
        x: &SpectralField,
        from: f64,
        to: f64,
        control: &dyn Fn(f64) -> f64,
        control_is_constant: bool,
        max_step: f64,
    ) -> Result<SpectralField>
    where
        Mo: PdmpModel<Mode = M> + ?Sized,
    {
        let dt = to - from;
        if dt <= 0.0 {
            return Ok(x.clone());
        }
        if model.drift_control_free() || control_is_constant {
            if let Some(p) = self.propagator(model, mode, control(from)) {
                let y = p.advance(x, dt);
                if !y.is_finite() {
                    return Err(Error::FlowBlowUp { last_valid: from });
                }
                return Ok(y);
            }
        }
        let substeps = ((dt / max_step).ceil() as usize).max(1);
        let path = lawson_rk4(
            &|s, y| model.drift(mode, control(from + s)).eval(y),
            model.diffusivity(),
            x,
            dt,
            substeps,
        )?;
        Ok(path.into_iter().last().expect("nonempty path"))
    }
}

/// Duhamel integrator: exact semigroup for `-cL` and classical RK4 in the
/// integrating-factor (Lawson) form for the drift. `drift(s, x)` receives the
/// elapsed time. Returns `substeps + 1` samples on a uniform grid of `[0, span]`.
pub fn lawson_rk4(
    drift: &dyn Fn(f64, &SpectralField) -> SpectralField,
    diffusivity: f64,
    x0: &SpectralField,
    span: f64,
    substeps: usize,
) -> Result<Vec<SpectralField>> {
    if !(span >= 0.0) {
        return Err(Error::param("span", "must be nonnegative"));
    }
    let substeps = substeps.max(1);
    let h = span / substeps as f64;
    let half = |v: &SpectralField| {
        let mut w = v.clone();
        apply_semigroup_in_place(w.coeffs_mut(), 0.5 * h, diffusivity);
        w
    };
    let full = |v: &SpectralField| {
        let mut w = v.clone();
        apply_semigroup_in_place(w.coeffs_mut(), h, diffusivity);
        w
    };
    let mut out = Vec::with_capacity(substeps + 1);
    out.push(x0.clone());
    let mut x = x0.clone();
    for n in 0..substeps {
        let s = n as f64 * h;
        let sx_half = half(&x);
        let k1 = drift(s, &x);
        let mut y2 = sx_half.clone();
        axpy(y2.coeffs_mut(), 0.5 * h, half(&k1).coeffs());
        let k2 = drift(s + 0.5 * h, &y2);
        let mut y3 = sx_half.clone();
        axpy(y3.coeffs_mut(), 0.5 * h, k2.coeffs());
        let k3 = drift(s + 0.5 * h, &y3);
        let mut y4 = full(&x);
        axpy(y4.coeffs_mut(), h, half(&k3).coeffs());
        let k4 = drift(s + h, &y4);

        let mut next = full(&x);
        axpy(next.coeffs_mut(), h / 6.0, full(&k1).coeffs());
        let mut mid = k2;
        axpy(mid.coeffs_mut(), 1.0, k3.coeffs());
        axpy(next.coeffs_mut(), h / 3.0, half(&mid).coeffs());
        axpy(next.coeffs_mut(), h / 6.0, k4.coeffs());
        if !next.is_finite() {
            return Err(Error::FlowBlowUp { last_valid: s });
        }
        x = next;
        out.push(x.clone());
    }
    Ok(out)
}

/// Flow `φ(s, x)` on a uniform grid of `[0, span]` with `substeps` steps.
///
/// Affine, control-free drifts use the dense exponential of the augmented
/// `(K+1)`-dimensional affine system (scaling and squaring); everything else
/// goes through [`lawson_rk4`].
pub fn integrate_flow<Mo: PdmpModel + ?Sized>(
    model: &Mo,
    x0: &SpectralField,
    mode: &Mo::Mode,
    control: &dyn Fn(f64) -> f64,
    span: f64,
    substeps: usize,
) -> Result<Vec<SpectralField>> {
    if !(span >= 0.0) {
        return Err(Error::param("span", "must be nonnegative"));
    }
    if x0.modes() != model.field_modes() {
        return Err(Error::DimensionMismatch {
            expected: model.field_modes(),
            found: x0.modes(),
        });
    }
    let substeps = substeps.max(1);
    if model.drift_control_free() {
        if let Drift::Affine(drift) = model.drift(mode, control(0.0)) {
            let h = span / substeps as f64;
            let step = (augmented_generator(&drift, model.diffusivity()) * h).exp();
            let mut out = Vec::with_capacity(substeps + 1);
            out.push(x0.clone());
            let mut x = x0.clone();
            for n in 0..substeps {
                x = apply_augmented(&step, &x);
                if !x.is_finite() {
                    return Err(Error::FlowBlowUp {
                        last_valid: n as f64 * h,
                    });
                }
                out.push(x.clone());
            }
            return Ok(out);
        }
    }
    lawson_rk4(
        &|s, y| model.drift(mode, control(s)).eval(y),
        model.diffusivity(),
        x0,
        span,
        substeps,
    )
}
