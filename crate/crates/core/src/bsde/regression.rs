use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_stability;
use super::solution::{PenalizedScheme, PenalizedSolution};
use crate::error::{Error, Result};
use crate::pdmp::{FlowCache, PdmpModel, SimConfig};
use crate::primal::{Axis, LatticeSpec, ValueGrid};
use crate::randomization::simulate_xi_with_cache;
use crate::randomization::Lambda0;
use crate::rng;
use crate::stats::Estimate;

/// Regression basis for `vⁿ(s, ·)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// A single constant, shared by every mode and control.
    Constant,
    /// One block per `(mode, control)` cell holding all monomials of total
    /// degree `≤ degree` in the lattice features rescaled to `[−1, 1]`.
    CellPolynomial { degree: usize },
}

fn exponents(arity: usize, degree: usize) -> Vec<Vec<usize>> {
    if arity == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for d in 0..=degree {
        for mut tail in exponents(arity - 1, degree - d) {
            tail.insert(0, d);
            out.push(tail);
        }
    }
    out.sort_by_key(|e| e.iter().sum::<usize>());
    out
}

struct Design {
    cells: usize,
    controls: usize,
    exps: Vec<Vec<usize>>,
    axes: Vec<Axis>,
}

impl Design {
    fn new(basis: &Basis, axes: &[Axis], modes: usize, controls: usize) -> Self {
        match basis {
            Basis::Constant => Design {
                cells: 1,
                controls,
                exps: vec![vec![0; axes.len()]],
                axes: axes.to_vec(),
            },
            Basis::CellPolynomial { degree } => Design {
                cells: modes * controls,
                controls,
                exps: exponents(axes.len(), *degree),
                axes: axes.to_vec(),
            },
        }
    }

    fn width(&self) -> usize {
        self.exps.len()
    }

    fn cell(&self, mode: usize, control: usize) -> usize {
        if self.cells == 1 {
            0
        } else {
            mode * self.controls + control
        }
    }

    fn row(&self, features: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = features
            .iter()
            .zip(&self.axes)
            .map(|(f, ax)| {
                let span = ax.hi - ax.lo;
                if span > 0.0 {
                    2.0 * (f - ax.lo) / span - 1.0
                } else {
                    0.0
                }
            })
            .collect();
        self.exps
            .iter()
            .map(|e| e.iter().zip(&u).map(|(k, x)| x.powi(*k as i32)).product())
            .collect()
    }
}

/// Fitted coefficients, one block per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFit {
    pub coefficients: Vec<Vec<f64>>,
    pub residual_rms: f64,
    /// True when some cell fell back to ridge regression.
    pub ridge: bool,
}

impl StepFit {
    fn eval(&self, design: &Design, row: &[f64], mode: usize, control: usize) -> f64 {
        let c = &self.coefficients[design.cell(mode, control)];
        c.iter().zip(row).map(|(a, b)| a * b).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub basis: Basis,
    pub paths: usize,
    pub seed: u64,
    /// Fits from the start time (index 0) to the horizon.
    pub steps: Vec<StepFit>,
    /// Sample mean of the penalty mass `Kⁿ_T − Kⁿ_t` along the paths.
    pub penalty_mass: Estimate,
}

impl RegressionReport {
    pub fn ridge_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.ridge)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Least squares `min |Φc − y|²` per cell. Cells whose normal matrix is
/// singular or has condition number above `1e12` get `ridge · I` added.
fn fit(design: &Design, rows: &[(usize, &[f64])], targets: &[f64], ridge: f64) -> StepFit {
    let p = design.width();
    let mut gram = vec![DMatrix::<f64>::zeros(p, p); design.cells];
    let mut rhs = vec![DVector::<f64>::zeros(p); design.cells];
    for ((cell, row), y) in rows.iter().zip(targets) {
        let r = DVector::from_column_slice(row);
        gram[*cell].ger(1.0, &r, &r, 1.0);
        rhs[*cell].axpy(*y, &r, 1.0);
    }
    let mut used_ridge = false;
    let coefficients = gram
        .into_iter()
        .zip(rhs)
        .map(|(g, b)| {
            let eig = SymmetricEigen::new(g.clone());
            let hi = eig.eigenvalues.max();
            let lo = eig.eigenvalues.min();
            let g = if hi <= 0.0 || lo <= hi * 1e-12 {
                used_ridge = true;
                g + DMatrix::identity(p, p) * ridge.max(f64::MIN_POSITIVE) * hi.max(1.0)
            } else {
                g
            };
            match g.cholesky() {
                Some(ch) => ch.solve(&b).as_slice().to_vec(),
                None => vec![0.0; p],
            }
        })
        .collect();
    let mut out = StepFit {
        coefficients,
        residual_rms: 0.0,
        ridge: used_ridge,
    };
    let sq: f64 = rows
        .iter()
        .zip(targets)
        .map(|((cell, row), y)| {
            let v: f64 = out.coefficients[*cell]
                .iter()
                .zip(row.iter())
                .map(|(a, b)| a * b)
                .sum();
            (v - y).powi(2)
        })
        .sum();
    out.residual_rms = (sq / rows.len().max(1) as f64).sqrt();
    out
}

/// State of one path at a time node, reduced to what the backward pass reads.
struct Node {
    row: Vec<f64>,
    mode: usize,
    control: usize,
    cost: f64,
}

/// Least-squares Monte Carlo for `vⁿ` on paths of the reference law `ν ≡ 1`.
///
/// Paths start at `lattice.start_time` from states drawn uniformly over the
/// lattice box, its modes and the controls. Going backward with fitted
/// values `Y_k = v̂_k(X_k, I_k)`, each step regresses
/// `Y_{k+1} + Δ f − Δ Σ_b λ₀(b) (n [Z_b]⁻ + Z_b)`, where
/// `Z_b = v̂_{k+1}(X_k, b) − v̂_{k+1}(X_k, I_k)` undoes the compensator of
/// the control jumps contained in `Y_{k+1}`. The fits are then evaluated
/// on the lattice; away from the start slice they are only meaningful
/// where the paths go. Lattice modes must cover every mode the paths visit.
pub fn solve_penalized_regression<Mo: PdmpModel>(
    model: &Mo,
    lambda0: &Lambda0,
    scheme: &PenalizedScheme,
    lattice: &LatticeSpec<Mo::Mode>,
    seed: u64,
) -> Result<PenalizedSolution<Mo::Mode>> {
    let controls = model.controls().to_vec();
    let na = controls.len();
    if lambda0.len() != na {
        return Err(Error::DimensionMismatch {
            expected: na,
            found: lambda0.len(),
        });
    }
    if lattice.time_steps != scheme.time_steps {
        return Err(Error::param(
            "time_steps",
            format!(
                "lattice has {} steps, scheme {}",
                lattice.time_steps, scheme.time_steps
            ),
        ));
    }
    let horizon = model.horizon();
    let steps = scheme.time_steps;
    let dt = (horizon - lattice.start_time) / steps as f64;
    check_stability(dt, scheme.n_penalty, lambda0)?;
    let n = scheme.n_penalty as f64;
    let template: ValueGrid<Mo::Mode> = ValueGrid::zeros(lattice, horizon, model.field_modes())?;
    let design = Design::new(&scheme.basis, &lattice.axes, lattice.modes.len(), na);
    let basis_size = design.cells * design.width();
    if scheme.paths < 10 * basis_size {
        return Err(Error::param(
            "paths",
            format!(
                "{} paths for {basis_size} basis functions; need at least ten per function",
                scheme.paths
            ),
        ));
    }
    let m = lattice.axes.len();
    let cfg = SimConfig {
        grid_step: dt,
        ..SimConfig::default()
    };
    let cache = FlowCache::new();

    let paths: Vec<Vec<Node>> = (0..scheme.paths)
        .into_par_iter()
        .map(|i| {
            let mut init = rng::stream(seed, "bsde_init", i as u64);
            let mut coeffs = vec![0.0; model.field_modes()];
            for (c, ax) in coeffs.iter_mut().zip(&lattice.axes) {
                *c = ax.lo + (ax.hi - ax.lo) * init.random::<f64>();
            }
            let x = crate::SpectralField::new(coeffs)?;
            let mode = &lattice.modes[init.random_range(0..lattice.modes.len())];
            let a = controls[init.random_range(0..na)];
            let mut r = rng::stream(seed, "bsde_path", i as u64);
            let path = simulate_xi_with_cache(
                model,
                &cache,
                lambda0,
                None,
                lattice.start_time,
                &x,
                mode,
                a,
                &mut r,
                &cfg,
            )?;
            let mut nodes: Vec<Option<Node>> = (0..=steps).map(|_| None).collect();
            for seg in &path.segments {
                let mi = template.mode_index(&seg.mode)?;
                for (s, y) in seg.times.iter().zip(&seg.fields) {
                    let k = ((s - lattice.start_time) / dt).round();
                    let ku = k as usize;
                    if (s - lattice.start_time - k * dt).abs() > 1e-9
                        || ku > steps
                        || nodes[ku].is_some()
                    {
                        continue;
                    }
                    let cost = if ku == steps {
                        model.terminal_cost(y, &seg.mode)
                    } else {
                        model.running_cost(y, &seg.mode, controls[seg.control])
                    };
                    nodes[ku] = Some(Node {
                        row: design.row(&y.coeffs()[..m]),
                        mode: mi,
                        control: seg.control,
                        cost,
                    });
                }
            }
            nodes
                .into_iter()
                .enumerate()
                .map(|(k, nd)| {
                    nd.ok_or_else(|| Error::param("grid", format!("path {i} misses time node {k}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let regress = |k: usize, targets: &[f64]| {
        let rows: Vec<(usize, &[f64])> = paths
            .iter()
            .map(|p| (design.cell(p[k].mode, p[k].control), p[k].row.as_slice()))
            .collect();
        fit(&design, &rows, targets, scheme.ridge)
    };
    let mut fits: Vec<StepFit> = Vec::with_capacity(steps + 1);
    let terminal: Vec<f64> = paths.iter().map(|p| p[steps].cost).collect();
    fits.push(regress(steps, &terminal));
    let mut y: Vec<f64> = paths
        .iter()
        .map(|p| fits[0].eval(&design, &p[steps].row, p[steps].mode, p[steps].control))
        .collect();
    let mut penalty = vec![0.0; paths.len()];
    for k in (0..steps).rev() {
        let next = fits.last().expect("terminal fit");
        let targets: Vec<f64> = paths
            .iter()
            .zip(&y)
            .zip(penalty.iter_mut())
            .map(|((p, yk), pen)| {
                let nd = &p[k];
                let here = next.eval(&design, &nd.row, nd.mode, nd.control);
                let mut correction = 0.0;
                let mut push = 0.0;
                for (b, w) in lambda0.weights().iter().enumerate() {
                    let z = next.eval(&design, &nd.row, nd.mode, b) - here;
                    push += w * n * (-z).max(0.0);
                    correction += w * z;
                }
                *pen += dt * push;
                yk + dt * nd.cost - dt * (push + correction)
            })
            .collect();
        let f = regress(k, &targets);
        y = paths
            .iter()
            .map(|p| f.eval(&design, &p[k].row, p[k].mode, p[k].control))
            .collect();
        fits.push(f);
    }
    fits.reverse();

    let mut values = Vec::with_capacity(na);
    for j in 0..na {
        let mut g = template.clone();
        for idx in 0..g.len() {
            let (ti, mi, pi) = g.unflat(idx);
            let row = design.row(&g.features(pi));
            g.values_mut()[idx] = fits[ti].eval(&design, &row, mi, j);
        }
        values.push(g);
    }
    Ok(PenalizedSolution {
        n_penalty: scheme.n_penalty,
        controls,
        values,
        penalty_mass: Vec::new(),
        regression: Some(RegressionReport {
            basis: scheme.basis.clone(),
            paths: scheme.paths,
            seed,
            steps: fits,
            penalty_mass: Estimate::from_samples(&penalty),
        }),
    })
}
