//! TOML experiment configuration.
//!
//! Units follow the model: time in ms, potentials in mV relative to rest,
//! rates in 1/ms. Exactly one of `[toy]` and `[hh]` selects the model; the
//! other sections configure the individual commands and all have defaults
//! except `[lattice]`, which the grid-based commands require.

use std::path::Path;

use pdmp_control::bsde::{Basis, PenalizedScheme};
use pdmp_control::hh::{HhModel, HhParams};
use pdmp_control::primal::{Axis, LatticeSpec};
use pdmp_control::randomization::{DualMethod, Lambda0};
use pdmp_control::toy::ToyModel;
use pdmp_control::{PdmpModel, SimConfig, SpectralField};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Root seed; every random stream is derived from it by purpose label.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Default number of Monte Carlo paths.
    #[serde(default = "default_paths")]
    pub paths: usize,
    pub toy: Option<ToyModel>,
    pub hh: Option<HhParams>,
    #[serde(default)]
    pub start: StartSection,
    #[serde(default)]
    pub sim: SimSection,
    pub lattice: Option<LatticeSection>,
    #[serde(default)]
    pub value: ValueSection,
    #[serde(default)]
    pub dual: DualSection,
    #[serde(default)]
    pub bsde: BsdeSection,
    #[serde(default)]
    pub crosscheck: CrosscheckSection,
    #[serde(default)]
    pub track: TrackSection,
}

fn default_seed() -> u64 {
    1
}

fn default_paths() -> usize {
    1000
}

/// Initial state `(t, x, d, a)` shared by all commands.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartSection {
    /// Start time (ms).
    pub time: f64,
    /// Leading sine coefficients of the initial field (mV), zero-padded.
    pub field: Vec<f64>,
    /// Mode label: a mode index for the toy, `state|state|…` for HH.
    /// Defaults to mode 0, respectively all channels at rest.
    pub mode: Option<String>,
    /// Initial control; must lie on the control grid.
    pub control: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Recording step (ms).
    pub grid_step: f64,
    /// Largest substep of the stepped integrator (ms).
    pub max_substep: f64,
    pub jump_cap: usize,
    /// Spatial points per trajectory CSV row.
    pub resolution: usize,
    /// Number of trajectories written to CSV by `simulate`.
    pub trajectories: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        let sim = SimConfig::default();
        SimSection {
            grid_step: sim.grid_step,
            max_substep: sim.max_substep,
            jump_cap: sim.jump_cap,
            resolution: 50,
            trajectories: 5,
        }
    }
}

impl SimSection {
    pub fn to_sim(&self) -> SimConfig {
        SimConfig {
            grid_step: self.grid_step,
            max_substep: self.max_substep,
            jump_cap: self.jump_cap,
        }
    }
}

/// Lattice in time and in the leading sine coefficients.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub time_steps: usize,
    pub axes: Vec<Axis>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValueSection {
    /// Sup-norm stopping tolerance of value iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Step of the backward Bellman ODE (ms).
    pub quad_step: f64,
}

impl Default for ValueSection {
    fn default() -> Self {
        ValueSection {
            tol: 1e-8,
            max_iter: 60,
            quad_step: 0.01,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualSection {
    /// Reference measure `λ₀` on the control grid (1/ms); uniform with total
    /// mass 1 when absent.
    pub lambda0: Option<Vec<f64>>,
    pub nu_min: f64,
    pub nu_max: f64,
    pub method: DualMethod,
    pub max_evaluations: usize,
    /// Initial simplex edge in `log ν`.
    pub step: f64,
    /// Paths per evaluation; `paths` when absent.
    pub paths: Option<usize>,
}

impl Default for DualSection {
    fn default() -> Self {
        DualSection {
            lambda0: None,
            nu_min: 0.05,
            nu_max: 20.0,
            method: DualMethod::Direct,
            max_evaluations: 60,
            step: 0.5,
            paths: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BsdeSolver {
    Grid,
    Regression,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct BsdeSection {
    pub solver: BsdeSolver,
    /// Penalty ladder.
    pub penalties: Vec<usize>,
    pub basis: Basis,
    /// Regression paths; `paths` when absent.
    pub paths: Option<usize>,
    pub ridge: f64,
}

impl Default for BsdeSection {
    fn default() -> Self {
        let s = PenalizedScheme::default();
        BsdeSection {
            solver: BsdeSolver::Grid,
            penalties: vec![1, 2, 5, 10, 50],
            basis: s.basis,
            paths: None,
            ridge: s.ridge,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrosscheckSection {
    /// Jump cap of the enumeration oracle (toy only).
    pub oracle_jump_cap: usize,
    /// Value iteration vs enumeration oracle.
    pub value_tol: f64,
    /// Penalized BSDE at the largest penalty vs value iteration.
    pub bsde_tol: f64,
    /// Spread of the penalized value across controls.
    pub spread_tol: f64,
    /// Allowed increase of `vⁿ` along the penalty ladder.
    pub ladder_tol: f64,
    pub dpp_paths: usize,
}

impl Default for CrosscheckSection {
    fn default() -> Self {
        CrosscheckSection {
            oracle_jump_cap: 4,
            value_tol: 1e-3,
            bsde_tol: 5e-2,
            spread_tol: 2e-2,
            ladder_tol: 1e-3,
            dpp_paths: 10_000,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackSection {
    /// Bounds of the intensity change searched over.
    pub nu_min: f64,
    pub nu_max: f64,
    pub max_evaluations: usize,
    /// Initial simplex edge in `log ν`; the search starts from `ν ≡ 1`.
    pub step: f64,
    /// Paths per cost estimate; `paths` when absent.
    pub paths: Option<usize>,
    /// Paths averaged in the tracking-error time series.
    pub series_paths: usize,
}

impl Default for TrackSection {
    fn default() -> Self {
        TrackSection {
            nu_min: 0.01,
            nu_max: 20.0,
            max_evaluations: 40,
            step: 1.5,
            paths: None,
            series_paths: 200,
        }
    }
}

/// The configured model.
pub enum BuiltModel {
    Toy(ToyModel),
    Hh(Box<HhModel>),
}

fn invalid(path: impl Into<String>, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {msg}", path.into()))
}

/// Re-roots a model error under the config section it came from.
fn in_section(section: &str, e: pdmp_control::Error) -> CliError {
    match e {
        pdmp_control::Error::InvalidParameter { name, reason } => {
            invalid(format!("{section}.{name}"), reason)
        }
        other => invalid(section, other),
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().to_string();
            invalid(if path == "." { "config".into() } else { path }, msg)
        })
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| CliError::Config("config is not UTF-8".into()))?;
        Ok((Self::from_toml(text)?, bytes))
    }

    /// Validates every section and builds the model.
    pub fn build(&self) -> Result<BuiltModel, CliError> {
        if self.paths < 2 {
            return Err(invalid("paths", "need at least two paths"));
        }
        let model = match (&self.toy, &self.hh) {
            (Some(toy), None) => {
                toy.validate().map_err(|e| in_section("toy", e))?;
                BuiltModel::Toy(toy.clone())
            }
            (None, Some(hh)) => BuiltModel::Hh(Box::new(
                HhModel::new(hh.clone()).map_err(|e| in_section("hh", e))?,
            )),
            _ => {
                return Err(invalid(
                    "config",
                    "exactly one of [toy] and [hh] must be present",
                ))
            }
        };
        let s = &self.sim;
        if !(s.grid_step > 0.0 && s.grid_step.is_finite()) {
            return Err(invalid("sim.grid_step", "must be positive"));
        }
        if !(s.max_substep > 0.0 && s.max_substep.is_finite()) {
            return Err(invalid("sim.max_substep", "must be positive"));
        }
        if s.jump_cap == 0 {
            return Err(invalid("sim.jump_cap", "must be positive"));
        }
        if s.resolution == 0 {
            return Err(invalid("sim.resolution", "must be positive"));
        }
        if let Some(l) = &self.lattice {
            if l.time_steps == 0 {
                return Err(invalid("lattice.time_steps", "must be positive"));
            }
            if l.axes.is_empty() {
                return Err(invalid("lattice.axes", "need at least one axis"));
            }
            for (i, a) in l.axes.iter().enumerate() {
                Axis::new(a.lo, a.hi, a.points)
                    .map_err(|e| in_section(&format!("lattice.axes[{i}]"), e))?;
            }
        }
        let v = &self.value;
        if !(v.tol > 0.0) || v.max_iter == 0 || !(v.quad_step > 0.0) {
            return Err(invalid(
                "value",
                "tol and quad_step must be positive, max_iter at least 1",
            ));
        }
        let d = &self.dual;
        if !(d.nu_min > 0.0 && d.nu_min <= 1.0) {
            return Err(invalid("dual.nu_min", "need 0 < nu_min <= 1"));
        }
        if !(d.nu_max >= 1.0 && d.nu_max.is_finite()) {
            return Err(invalid("dual.nu_max", "need 1 <= nu_max < inf"));
        }
        if d.max_evaluations == 0 || !(d.step > 0.0) {
            return Err(invalid("dual", "max_evaluations and step must be positive"));
        }
        if d.paths.is_some_and(|p| p < 2) {
            return Err(invalid("dual.paths", "need at least two paths"));
        }
        let b = &self.bsde;
        if b.penalties.is_empty() {
            return Err(invalid("bsde.penalties", "need at least one penalty"));
        }
        if b.penalties.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("bsde.penalties", "must be strictly increasing"));
        }
        if !(b.ridge > 0.0) {
            return Err(invalid("bsde.ridge", "must be positive"));
        }
        let c = &self.crosscheck;
        for (name, tol) in [
            ("value_tol", c.value_tol),
            ("bsde_tol", c.bsde_tol),
            ("spread_tol", c.spread_tol),
            ("ladder_tol", c.ladder_tol),
        ] {
            if !(tol >= 0.0) {
                return Err(invalid(format!("crosscheck.{name}"), "must be nonnegative"));
            }
        }
        if c.dpp_paths < 2 {
            return Err(invalid("crosscheck.dpp_paths", "need at least two paths"));
        }
        let t = &self.track;
        if !(t.nu_min > 0.0 && t.nu_min <= 1.0) {
            return Err(invalid("track.nu_min", "need 0 < nu_min <= 1"));
        }
        if !(t.nu_max >= 1.0 && t.nu_max.is_finite()) {
            return Err(invalid("track.nu_max", "need 1 <= nu_max < inf"));
        }
        if t.max_evaluations == 0
            || !(t.step > 0.0)
            || t.series_paths == 0
            || t.paths.is_some_and(|p| p < 2)
        {
            return Err(invalid(
                "track",
                "evaluation and path counts must be positive",
            ));
        }
        match &model {
            BuiltModel::Toy(m) => self.check_model(m)?,
            BuiltModel::Hh(m) => self.check_model(m.as_ref())?,
        }
        Ok(model)
    }

    fn check_model<Mo>(&self, model: &Mo) -> Result<(), CliError>
    where
        Mo: PdmpModel,
        Mo::Mode: std::str::FromStr,
    {
        let st = &self.start;
        if !(st.time >= 0.0 && st.time <= model.horizon()) {
            return Err(invalid(
                "start.time",
                format!("must lie in [0, {}]", model.horizon()),
            ));
        }
        if st.field.len() > model.field_modes() {
            return Err(invalid(
                "start.field",
                format!(
                    "{} coefficients for a {}-mode field",
                    st.field.len(),
                    model.field_modes()
                ),
            ));
        }
        if st.field.iter().any(|c| !c.is_finite()) {
            return Err(invalid("start.field", "coefficients must be finite"));
        }
        if !model.is_control(st.control) {
            return Err(invalid(
                "start.control",
                format!("{} is not on the control grid", st.control),
            ));
        }
        if let Some(label) = &st.mode {
            label
                .parse::<Mo::Mode>()
                .map_err(|_| invalid("start.mode", format!("unknown mode `{label}`")))?;
        }
        if let Some(l) = &self.lattice {
            if l.axes.len() > model.field_modes() {
                return Err(invalid("lattice.axes", "more axes than field modes"));
            }
        }
        if let Some(w) = &self.dual.lambda0 {
            if w.len() != model.controls().len() {
                return Err(invalid(
                    "dual.lambda0",
                    format!("need {} weights", model.controls().len()),
                ));
            }
            Lambda0::new(w.clone()).map_err(|e| in_section("dual", e))?;
        }
        Ok(())
    }

    pub fn start_field(&self, modes: usize) -> SpectralField {
        let mut c = self.start.field.clone();
        c.resize(modes, 0.0);
        SpectralField::new(c).expect("validated start field")
    }

    pub fn lambda0(&self, controls: usize) -> Result<Lambda0, CliError> {
        match &self.dual.lambda0 {
            Some(w) => Lambda0::new(w.clone()).map_err(|e| in_section("dual", e)),
            None => Lambda0::uniform(controls).map_err(|e| in_section("dual", e)),
        }
    }

    pub fn lattice_spec<M>(&self, modes: Vec<M>) -> Result<LatticeSpec<M>, CliError> {
        let l = self
            .lattice
            .as_ref()
            .ok_or_else(|| invalid("lattice", "section required by this command"))?;
        Ok(LatticeSpec {
            start_time: self.start.time,
            time_steps: l.time_steps,
            axes: l.axes.clone(),
            modes,
        })
    }

    pub fn scheme(&self, n: usize) -> Result<PenalizedScheme, CliError> {
        let l = self
            .lattice
            .as_ref()
            .ok_or_else(|| invalid("lattice", "section required by this command"))?;
        Ok(PenalizedScheme {
            n_penalty: n,
            time_steps: l.time_steps,
            basis: self.bsde.basis.clone(),
            paths: self.bsde.paths.unwrap_or(self.paths),
            ridge: self.bsde.ridge,
        })
    }
}
