use std::fmt::Display;
use std::hash::Hash;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::regression::{Basis, RegressionReport};
use crate::error::{Error, Result};
use crate::primal::ValueGrid;
use crate::spectral::SpectralField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenalizedScheme {
    /// Penalization parameter `n`.
    pub n_penalty: usize,
    /// Backward steps between the lattice start time and the horizon.
    pub time_steps: usize,
    /// Basis of the regression solver; ignored by the grid solver.
    pub basis: Basis,
    /// Simulated paths of the regression solver.
    pub paths: usize,
    /// Ridge added to ill-conditioned normal equations.
    pub ridge: f64,
}

impl Default for PenalizedScheme {
    fn default() -> Self {
        PenalizedScheme {
            n_penalty: 10,
            time_steps: 100,
            basis: Basis::CellPolynomial { degree: 3 },
            paths: 20_000,
            ridge: 1e-8,
        }
    }
}

/// `vⁿ(t, x, d, a)` as one value grid per control, with diagnostics.
#[derive(Clone, Debug)]
pub struct PenalizedSolution<M> {
    pub n_penalty: usize,
    pub controls: Vec<f64>,
    pub values: Vec<ValueGrid<M>>,
    /// Expected penalty mass `E[Kⁿ_T − Kⁿ_t]` per lattice point (grid solver).
    pub penalty_mass: Vec<ValueGrid<M>>,
    pub regression: Option<RegressionReport>,
}

impl<M: Clone + Eq + Hash> PenalizedSolution<M> {
    fn control_index(&self, a: f64) -> Result<usize> {
        self.controls
            .iter()
            .position(|c| (c - a).abs() <= 1e-12)
            .ok_or(Error::InvalidControl(a))
    }

    pub fn value(&self, t: f64, x: &SpectralField, mode: &M, a: f64) -> Result<f64> {
        self.values[self.control_index(a)?].interpolate(t, x, mode)
    }

    /// `vⁿ` at `(t, x, d)` for every control.
    pub fn values_at(&self, t: f64, x: &SpectralField, mode: &M) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|g| g.interpolate(t, x, mode))
            .collect()
    }

    /// `max |vⁿ|` over the lattice.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|g| g.values().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lattice samples `(t, x, d)` of the solution's own grid.
    pub fn lattice_states(&self) -> Vec<(f64, SpectralField, M)> {
        let g = &self.values[0];
        (0..g.len())
            .map(|idx| {
                let (ti, mi, pi) = g.unflat(idx);
                (g.times()[ti], g.point_field(pi), g.modes()[mi].clone())
            })
            .collect()
    }
}

impl<M: Clone + Eq + Hash + Display + FromStr> PenalizedSolution<M> {
    /// CSV rows `time,x1..xm,mode,a,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let g0 = &self.values[0];
        let mut header = vec!["time".to_string()];
        header.extend((1..=g0.axes().len()).map(|k| format!("x{k}")));
        header.extend(["mode", "a", "value"].map(String::from));
        w.write_record(&header)?;
        for idx in 0..g0.len() {
            let (ti, mi, pi) = g0.unflat(idx);
            for (a, g) in self.controls.iter().zip(&self.values) {
                let mut row = vec![format!("{}", g0.times()[ti])];
                row.extend(g0.features(pi).iter().map(|f| format!("{f}")));
                row.push(g0.modes()[mi].to_string());
                row.push(format!("{a}"));
                row.push(format!("{:.12e}", g.values()[idx]));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `max_{a,b} [vⁿ(s,x,b) − vⁿ(s,x,a)]⁻` over the sample states, i.e. the
/// largest spread of `vⁿ` across controls.
pub fn constraint_violation<M: Clone + Eq + Hash>(
    sol: &PenalizedSolution<M>,
    samples: &[(f64, SpectralField, M)],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (t, x, d) in samples {
        let v = sol.values_at(*t, x, d)?;
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.max(hi - lo);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimalComparison {
    /// `sup |vⁿ(t,x,a) − V(t,x)|` over samples and controls.
    pub sup_error: f64,
    pub mean_error: f64,
    /// `max |vⁿ(t,x,a) − vⁿ(t,x,a′)|`.
    pub control_spread: f64,
    pub samples: usize,
}

pub fn compare_to_primal<M: Clone + Eq + Hash>(
    sol: &PenalizedSolution<M>,
    primal: &ValueGrid<M>,
    samples: &[(f64, SpectralField, M)],
) -> Result<PrimalComparison> {
    let mut sup: f64 = 0.0;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, x, d) in samples {
        let v = primal.interpolate(*t, x, d)?;
        for vn in sol.values_at(*t, x, d)? {
            let e = (vn - v).abs();
            sup = sup.max(e);
            sum += e;
            count += 1;
        }
    }
    Ok(PrimalComparison {
        sup_error: sup,
        mean_error: if count > 0 { sum / count as f64 } else { 0.0 },
        control_spread: constraint_violation(sol, samples)?,
        samples: samples.len(),
    })
}
