use std::collections::HashMap;
use std::fmt::Display;
use std::hash::Hash;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

/// Equispaced axis `lo, lo + h, …, hi` with `points` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points == 0 || !(hi >= lo) || (points == 1 && hi != lo) || (points > 1 && hi == lo) {
            return Err(Error::param(
                "axis",
                format!("bad axis [{lo}, {hi}] with {points} points"),
            ));
        }
        Ok(Axis { lo, hi, points })
    }

    pub fn node(&self, i: usize) -> f64 {
        if self.points == 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64
        }
    }

    /// Cell index and weight of the upper node for `x`.
    fn locate(&self, x: f64, feature: usize) -> Result<(usize, f64)> {
        let slack = 1e-9 * (1.0 + self.hi.abs().max(self.lo.abs()));
        if x < self.lo - slack || x > self.hi + slack || x.is_nan() {
            return Err(Error::Extrapolation {
                feature,
                value: x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        if self.points == 1 {
            return Ok((0, 0.0));
        }
        let h = (self.hi - self.lo) / (self.points - 1) as f64;
        let u = ((x - self.lo) / h).clamp(0.0, (self.points - 1) as f64);
        let i = (u.floor() as usize).min(self.points - 2);
        Ok((i, u - i as f64))
    }
}

/// Lattice over `(t, x₁..x_m, mode)`. Features are the leading sine
/// coefficients of the field; the remaining coefficients of a lattice point
/// are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec<M> {
    pub start_time: f64,
    pub time_steps: usize,
    pub axes: Vec<Axis>,
    pub modes: Vec<M>,
}

/// Tabulated function of `(t, x, mode)`: multilinear in the features, exact
/// in the mode and linear in time.
#[derive(Clone, Debug)]
pub struct ValueGrid<M> {
    times: Vec<f64>,
    axes: Vec<Axis>,
    modes: Vec<M>,
    index: HashMap<M, usize>,
    field_modes: usize,
    values: Vec<f64>,
    /// Sup-norm change per iteration of the solver that produced the grid.
    pub residuals: Vec<f64>,
}

impl<M: PartialEq> PartialEq for ValueGrid<M> {
    fn eq(&self, other: &Self) -> bool {
        self.times == other.times
            && self.axes == other.axes
            && self.modes == other.modes
            && self.field_modes == other.field_modes
            && self.values == other.values
            && self.residuals == other.residuals
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    times: Vec<f64>,
    axes: Vec<Axis>,
    modes: Vec<String>,
    field_modes: usize,
    residuals: Vec<f64>,
}

impl<M: Clone + Eq + Hash> ValueGrid<M> {
    pub fn zeros(spec: &LatticeSpec<M>, horizon: f64, field_modes: usize) -> Result<Self> {
        if spec.time_steps == 0 || !(horizon > spec.start_time) {
            return Err(Error::param(
                "time_steps",
                "need at least one step before the horizon",
            ));
        }
        if spec.modes.is_empty() {
            return Err(Error::param("modes", "lattice needs at least one mode"));
        }
        if spec.axes.len() > field_modes {
            return Err(Error::param("axes", "more features than field modes"));
        }
        for a in &spec.axes {
            Axis::new(a.lo, a.hi, a.points)?;
        }
        let times = (0..=spec.time_steps)
            .map(|i| {
                if i == spec.time_steps {
                    horizon
                } else {
                    spec.start_time
                        + (horizon - spec.start_time) * i as f64 / spec.time_steps as f64
                }
            })
            .collect();
        let index: HashMap<M, usize> = spec
            .modes
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        if index.len() != spec.modes.len() {
            return Err(Error::param("modes", "duplicate mode in lattice"));
        }
        let mut grid = ValueGrid {
            times,
            axes: spec.axes.clone(),
            modes: spec.modes.clone(),
            index,
            field_modes,
            values: Vec::new(),
            residuals: Vec::new(),
        };
        grid.values = vec![0.0; grid.len()];
        Ok(grid)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn modes(&self) -> &[M] {
        &self.modes
    }

    pub fn field_modes(&self) -> usize {
        self.field_modes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn points_per_slice(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    /// Number of stored values.
    pub fn len(&self) -> usize {
        self.times.len() * self.modes.len() * self.points_per_slice()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of `(time index, mode index, point index)`.
    pub fn flat(&self, ti: usize, mi: usize, pi: usize) -> usize {
        (ti * self.modes.len() + mi) * self.points_per_slice() + pi
    }

    /// Inverse of [`ValueGrid::flat`].
    pub fn unflat(&self, idx: usize) -> (usize, usize, usize) {
        let p = self.points_per_slice();
        let pi = idx % p;
        let rest = idx / p;
        (rest / self.modes.len(), rest % self.modes.len(), pi)
    }

    /// Feature vector of lattice point `pi` (row-major, last axis fastest).
    pub fn features(&self, pi: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        let mut rem = pi;
        for (slot, axis) in out.iter_mut().zip(&self.axes).rev() {
            *slot = axis.node(rem % axis.points);
            rem /= axis.points;
        }
        out
    }

    pub fn point_field(&self, pi: usize) -> SpectralField {
        let mut c = self.features(pi);
        c.resize(self.field_modes, 0.0);
        SpectralField::new(c).expect("finite lattice")
    }

    pub fn mode_index(&self, mode: &M) -> Result<usize> {
        self.index.get(mode).copied().ok_or(Error::UnknownMode)
    }

    pub fn get(&self, ti: usize, mode: &M, pi: usize) -> Result<f64> {
        Ok(self.values[self.flat(ti, self.mode_index(mode)?, pi)])
    }

    fn time_cell(&self, t: f64) -> Result<(usize, f64)> {
        let (lo, hi) = (self.times[0], *self.times.last().expect("nonempty"));
        let slack = 1e-9 * (1.0 + hi.abs());
        if t < lo - slack || t > hi + slack || t.is_nan() {
            return Err(Error::Extrapolation {
                feature: usize::MAX,
                value: t,
                lo,
                hi,
            });
        }
        let n = self.times.len() - 1;
        let u = ((t - lo) / (hi - lo) * n as f64).clamp(0.0, n as f64);
        let i = (u.floor() as usize).min(n - 1);
        Ok((i, u - i as f64))
    }

    fn slice_value(&self, ti: usize, mi: usize, cells: &[(usize, f64)]) -> f64 {
        let d = cells.len();
        let base = self.flat(ti, mi, 0);
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut pi = 0;
            for (j, ((i, w), axis)) in cells.iter().zip(&self.axes).enumerate() {
                let up = (corner >> (d - 1 - j)) & 1 == 1;
                let node = if up {
                    (*i + 1).min(axis.points - 1)
                } else {
                    *i
                };
                weight *= if up { *w } else { 1.0 - w };
                pi = pi * axis.points + node;
            }
            if weight != 0.0 {
                total += weight * self.values[base + pi];
            }
        }
        total
    }

    /// Interpolated value; errors outside the lattice hull.
    pub fn interpolate(&self, t: f64, x: &SpectralField, mode: &M) -> Result<f64> {
        let mi = self.mode_index(mode)?;
        let cells = self
            .axes
            .iter()
            .enumerate()
            .map(|(k, a)| a.locate(x.coeffs().get(k).copied().unwrap_or(0.0), k))
            .collect::<Result<Vec<_>>>()?;
        let (ti, w) = self.time_cell(t)?;
        let v0 = self.slice_value(ti, mi, &cells);
        if w == 0.0 {
            return Ok(v0);
        }
        Ok((1.0 - w) * v0 + w * self.slice_value(ti + 1, mi, &cells))
    }

    /// `max |self − other|` over all stored values; shapes must agree.
    pub fn sup_distance(&self, other: &ValueGrid<M>) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

impl<M: Clone + Eq + Hash + Display + FromStr> ValueGrid<M> {
    /// CSV rows `time,x1..xm,mode,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string()];
        header.extend((1..=self.axes.len()).map(|k| format!("x{k}")));
        header.extend(["mode".to_string(), "value".to_string()]);
        w.write_record(&header)?;
        for idx in 0..self.values.len() {
            let (ti, mi, pi) = self.unflat(idx);
            let mut row = vec![format!("{}", self.times[ti])];
            row.extend(self.features(pi).iter().map(|f| format!("{f}")));
            row.push(self.modes[mi].to_string());
            row.push(format!("{:.17e}", self.values[idx]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar with the grid geometry and residual history.
    pub fn write_sidecar<W: Write>(&self, out: W) -> Result<()> {
        let side = Sidecar {
            times: self.times.clone(),
            axes: self.axes.clone(),
            modes: self.modes.iter().map(|m| m.to_string()).collect(),
            field_modes: self.field_modes,
            residuals: self.residuals.clone(),
        };
        serde_json::to_writer_pretty(out, &side)?;
        Ok(())
    }

    /// Reads a grid written by [`ValueGrid::write_csv`] and
    /// [`ValueGrid::write_sidecar`].
    pub fn read<R1: Read, R2: Read>(csv_in: R1, sidecar: R2) -> Result<Self> {
        let side: Sidecar = serde_json::from_reader(sidecar)?;
        let modes = side
            .modes
            .iter()
            .map(|s| {
                s.parse::<M>()
                    .map_err(|_| Error::Parse(format!("mode label {s:?}")))
            })
            .collect::<Result<Vec<M>>>()?;
        let mut grid = ValueGrid {
            index: modes
                .iter()
                .cloned()
                .enumerate()
                .map(|(i, m)| (m, i))
                .collect(),
            times: side.times,
            axes: side.axes,
            modes,
            field_modes: side.field_modes,
            values: Vec::new(),
            residuals: side.residuals,
        };
        let mut values = Vec::with_capacity(grid.len());
        let mut r = csv::Reader::from_reader(csv_in);
        for rec in r.records() {
            let rec = rec?;
            let v = rec
                .get(rec.len() - 1)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse("value column".into()))?;
            values.push(v);
        }
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        grid.values = values;
        Ok(grid)
    }
}
