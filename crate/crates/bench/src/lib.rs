//! Fixtures shared by the benchmarks.

use pdmp_control::hh::{HhModel, HhParams};
use pdmp_control::primal::{Axis, LatticeSpec};
use pdmp_control::SpectralField;

/// Tracking demo model: one ChR2 site, 32 modes, 5 ms.
pub fn one_site() -> HhModel {
    HhModel::new(HhParams::default()).expect("default parameters are valid")
}

/// Three sites with 160 channel configurations.
pub fn three_sites() -> HhModel {
    HhModel::new(HhParams {
        sites: 3,
        ..HhParams::default()
    })
    .expect("default parameters are valid")
}

/// Smooth field with decaying coefficients on the first six modes.
pub fn bump(modes: usize, amplitude: f64) -> SpectralField {
    let mut c = vec![0.0; modes];
    for (k, ck) in c.iter_mut().enumerate().take(6) {
        *ck = amplitude / (k + 1) as f64;
    }
    SpectralField::new(c).expect("finite coefficients")
}

/// The lattice of the toy configuration.
pub fn toy_lattice() -> LatticeSpec<usize> {
    LatticeSpec {
        start_time: 0.0,
        time_steps: 60,
        axes: vec![Axis::new(0.0, 1.0, 21).expect("valid axis")],
        modes: vec![0, 1],
    }
}
