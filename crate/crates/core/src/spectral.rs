//! Truncated sine-series representation of `E = L²(0,1)` with Dirichlet boundary.
//!
//! A field is the coefficient vector against `f_k(z) = √2 sin(kπz)`, `k = 1..=K`.
//! The Laplacian is diagonal in this basis with eigenvalues `-k²π²`, so the
//! heat semigroup and the weighted norms are exact on the truncation.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::simpson;

/// Default number of retained sine modes.
pub const DEFAULT_MODES: usize = 32;
/// Default number of Simpson panels used by [`SpectralField::project`].
pub const DEFAULT_PANELS: usize = 512;

/// `k²π²` for the 1-based mode `k`.
#[inline]
pub fn laplacian_eigenvalue(k: usize) -> f64 {
    let kp = k as f64 * PI;
    kp * kp
}

/// Which norm of `E` to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    /// `‖v‖ = (Σ c_k²)^{1/2}`.
    L2,
    /// `‖v‖₋₁ = ‖(I-Δ)^{-1/2} v‖`.
    Minus1,
    /// `‖v‖_V = ‖(I-Δ)^{1/2} v‖`.
    H1V,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoefficient { index });
        }
        Ok(SpectralField { coeffs })
    }

    /// Builds a field without the finiteness check. Hot paths only.
    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        SpectralField { coeffs }
    }

    pub fn zeros(modes: usize) -> Self {
        SpectralField {
            coeffs: vec![0.0; modes],
        }
    }

    /// The basis element `f_k` (1-based `k`) in a `modes`-dimensional space.
    pub fn basis(modes: usize, k: usize) -> Self {
        assert!(k >= 1 && k <= modes, "basis index {k} outside 1..={modes}");
        let mut f = Self::zeros(modes);
        f.coeffs[k - 1] = 1.0;
        f
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check_dim(&self, other: &SpectralField) -> Result<()> {
        if self.modes() != other.modes() {
            return Err(Error::DimensionMismatch {
                expected: self.modes(),
                found: other.modes(),
            });
        }
        Ok(())
    }

    /// Projects `f` onto the first `modes` basis functions using composite
    /// Simpson quadrature with `panels` (even) panels.
    pub fn project<F: Fn(f64) -> f64>(f: F, modes: usize, panels: usize) -> Result<Self> {
        if panels < 2 || !panels.is_multiple_of(2) {
            return Err(Error::param("panels", "must be an even number >= 2"));
        }
        let samples: Vec<(f64, f64)> = (0..=panels)
            .map(|i| {
                let z = i as f64 / panels as f64;
                (z, f(z))
            })
            .collect();
        if let Some(&(z, value)) = samples.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteSample { z, value });
        }
        let mut integrand = vec![0.0; panels + 1];
        let coeffs = (1..=modes)
            .map(|k| {
                for (slot, &(z, v)) in integrand.iter_mut().zip(&samples) {
                    *slot = v * SQRT_2 * (k as f64 * PI * z).sin();
                }
                simpson(&integrand, 1.0)
            })
            .collect();
        Ok(SpectralField { coeffs })
    }

    /// Point value `Σ c_k √2 sin(kπz)`.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::OutOfDomain(z));
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * SQRT_2 * ((i + 1) as f64 * PI * z).sin())
            .sum())
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        let weight = |k: usize| match kind {
            NormKind::L2 => 1.0,
            NormKind::Minus1 => 1.0 / (1.0 + laplacian_eigenvalue(k)),
            NormKind::H1V => 1.0 + laplacian_eigenvalue(k),
        };
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| weight(i + 1) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Heat semigroup `S(r)` for the operator `-cΔ`: `c_k ↦ e^{-c r k²π²} c_k`.
    pub fn semigroup(&self, r: f64, diffusivity: f64) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(Error::param(
                "r",
                format!("time must be nonnegative, got {r}"),
            ));
        }
        if !(diffusivity > 0.0) {
            return Err(Error::param(
                "diffusivity",
                format!("must be positive, got {diffusivity}"),
            ));
        }
        let mut out = self.clone();
        apply_semigroup_in_place(&mut out.coeffs, r, diffusivity);
        Ok(out)
    }

    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_dim(other)?;
        Ok(dot(&self.coeffs, &other.coeffs))
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        self.check_dim(other)?;
        Ok(SpectralField {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        self.check_dim(other)?;
        Ok(SpectralField {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        SpectralField {
            coeffs: self.coeffs.iter().map(|c| s * c).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &SpectralField) -> Result<()> {
        self.check_dim(other)?;
        axpy(&mut self.coeffs, s, &other.coeffs);
        Ok(())
    }

    /// Copy restricted (or zero-padded) to `modes` coefficients.
    pub fn resized(&self, modes: usize) -> Self {
        let mut coeffs = vec![0.0; modes];
        let n = modes.min(self.modes());
        coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        SpectralField { coeffs }
    }

    /// `‖·‖_V` norm of the coefficients above `modes`; used to report truncation tails.
    pub fn h1_tail(&self, modes: usize) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(modes)
            .map(|(i, c)| (1.0 + laplacian_eigenvalue(i + 1)) * c * c)
            .sum::<f64>()
            .sqrt()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub(crate) fn apply_semigroup_in_place(coeffs: &mut [f64], r: f64, diffusivity: f64) {
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c *= (-diffusivity * r * laplacian_eigenvalue(i + 1)).exp();
    }
}

/// Precomputed `√2 sin(kπ z_j)` table for repeated pointwise evaluation on a fixed z-grid.
#[derive(Clone, Debug)]
pub struct PointEvaluator {
    z: Vec<f64>,
    table: Vec<f64>,
    modes: usize,
}

impl PointEvaluator {
    /// Evaluator on `points + 1` equispaced nodes of `[0, 1]`.
    pub fn uniform(modes: usize, points: usize) -> Self {
        let z: Vec<f64> = (0..=points).map(|j| j as f64 / points as f64).collect();
        Self::new(modes, z)
    }

    pub fn new(modes: usize, z: Vec<f64>) -> Self {
        let mut table = Vec::with_capacity(z.len() * modes);
        for &zj in &z {
            for k in 1..=modes {
                table.push(SQRT_2 * (k as f64 * PI * zj).sin());
            }
        }
        PointEvaluator { z, table, modes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.z
    }

    /// Values of `v` at every node.
    pub fn eval(&self, v: &SpectralField) -> Vec<f64> {
        let m = self.modes.min(v.modes());
        self.table
            .chunks_exact(self.modes)
            .map(|row| dot(&row[..m], &v.coeffs[..m]))
            .collect()
    }

    /// `(min, max)` of `v` over the nodes.
    pub fn range(&self, v: &SpectralField) -> (f64, f64) {
        self.eval(v)
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            })
    }
}
