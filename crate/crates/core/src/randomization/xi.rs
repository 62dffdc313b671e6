use rand::Rng;

use super::nu::{Lambda0, NuPolicy};
use crate::error::{Error, Result};
use crate::pdmp::{pick, thin_segment, FlowCache, PdmpModel, SegmentSamples, SimConfig, TimeGrid};
use crate::quadrature::trapezoid;
use crate::spectral::SpectralField;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpKind {
    /// `X` jumps through the kernel, `I` is held.
    Mode,
    /// `I` jumps to a new control, `X` is held.
    Control,
}

#[derive(Clone, Debug, PartialEq)]
pub struct XiJump<M> {
    pub time: f64,
    pub kind: JumpKind,
    pub mode: M,
    /// Control index after the jump.
    pub control: usize,
}

/// Flow piece with constant `(mode, I)`. Segment `k` ends at jump `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct XiSegment<M> {
    pub mode: M,
    pub control: usize,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct XiPath<M> {
    pub start_time: f64,
    pub segments: Vec<XiSegment<M>>,
    pub jumps: Vec<XiJump<M>>,
}

impl<M> XiPath<M> {
    pub fn terminal_field(&self) -> &SpectralField {
        self.segments
            .last()
            .and_then(|s| s.fields.last())
            .expect("a path has at least one sample")
    }

    pub fn terminal_mode(&self) -> &M {
        &self
            .segments
            .last()
            .expect("a path has at least one segment")
            .mode
    }

    pub fn count(&self, kind: JumpKind) -> usize {
        self.jumps.iter().filter(|j| j.kind == kind).count()
    }
}

pub(crate) fn control_index<Mo: PdmpModel>(model: &Mo, a: f64) -> Result<usize> {
    model
        .controls()
        .iter()
        .position(|c| (c - a).abs() <= 1e-12)
        .ok_or(Error::InvalidControl(a))
}

pub(crate) fn simulate_xi_with_cache<Mo: PdmpModel, R: Rng>(
    model: &Mo,
    cache: &FlowCache<Mo::Mode>,
    lambda0: &Lambda0,
    nu: Option<&dyn NuPolicy<Mo::Mode>>,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    a: f64,
    rng: &mut R,
    cfg: &SimConfig,
) -> Result<XiPath<Mo::Mode>> {
    let controls = model.controls();
    if lambda0.len() != controls.len() {
        return Err(Error::DimensionMismatch {
            expected: controls.len(),
            found: lambda0.len(),
        });
    }
    let horizon = model.horizon();
    if t > horizon {
        return Err(Error::param(
            "t",
            format!("start {t} after horizon {horizon}"),
        ));
    }
    let mut ci = control_index(model, a)?;
    let nu_sup = nu.map_or(1.0, |n| n.sup());
    let bound = model.rate_bound() + nu_sup * lambda0.total();
    let grid = TimeGrid {
        origin: t,
        step: cfg.grid_step,
    };
    let nu_at = |s: f64, y: &SpectralField, d: &Mo::Mode, i: usize, b: usize| match nu {
        Some(n) => n.nu(s, y, d, i, b),
        None => 1.0,
    };
    let mut path = XiPath {
        start_time: t,
        segments: Vec::new(),
        jumps: Vec::new(),
    };
    let (mut tn, mut xn, mut dn) = (t, x.clone(), mode.clone());
    loop {
        let d = dn.clone();
        let a_now = controls[ci];
        let seg_start = tn;
        let mut rec = SegmentSamples::default();
        let end = thin_segment(
            &xn,
            tn,
            horizon,
            bound,
            grid,
            &mut |y, from, to| {
                cache.advance(
                    model,
                    &d,
                    y,
                    from - seg_start,
                    to - seg_start,
                    &|_| a_now,
                    true,
                    cfg.max_substep,
                )
            },
            &mut |s, y| {
                model.rate(y, &d, a_now)
                    + (0..controls.len())
                        .map(|b| nu_at(s, y, &d, ci, b) * lambda0.weights()[b])
                        .sum::<f64>()
            },
            rng,
            Some(&mut rec),
        )?;
        path.segments.push(XiSegment {
            mode: d.clone(),
            control: ci,
            times: rec.times,
            fields: rec.fields,
        });
        let Some(tj) = end.event else {
            return Ok(path);
        };
        if path.jumps.len() >= cfg.jump_cap {
            return Err(Error::JumpCapExceeded(cfg.jump_cap));
        }
        let y = &end.field;
        let lam = model.rate(y, &d, a_now);
        let weights: Vec<(usize, f64)> = (0..controls.len())
            .map(|b| (b, nu_at(tj, y, &d, ci, b) * lambda0.weights()[b]))
            .collect();
        let total = lam + weights.iter().map(|(_, w)| w).sum::<f64>();
        let jump = if rng.random::<f64>() * total < lam {
            let row = model.kernel(y, &d, a_now)?;
            XiJump {
                time: tj,
                kind: JumpKind::Mode,
                mode: pick(&row, rng)?,
                control: ci,
            }
        } else {
            let mass: f64 = weights.iter().map(|(_, w)| w).sum();
            let row: Vec<(usize, f64)> = weights.iter().map(|(b, w)| (*b, w / mass)).collect();
            XiJump {
                time: tj,
                kind: JumpKind::Control,
                mode: d.clone(),
                control: pick(&row, rng)?,
            }
        };
        tn = tj;
        xn = end.field;
        dn = jump.mode.clone();
        ci = jump.control;
        path.jumps.push(jump);
    }
}

/// Simulates `(X, I)` from `(t, x, mode, a)` to the horizon. Mode jumps
/// occur at rate `λ(X, I)` with kernel `Q`; control jumps at rate
/// `Σ_b ν(b) λ₀(b)` with the new control drawn `∝ ν λ₀` (self-jumps
/// included). `nu = None` is the reference law `ν ≡ 1`. Both clocks are
/// thinned together against `M + sup ν · λ₀(A)`.
pub fn simulate_xi<Mo: PdmpModel, R: Rng>(
    model: &Mo,
    lambda0: &Lambda0,
    nu: Option<&dyn NuPolicy<Mo::Mode>>,
    t: f64,
    x: &SpectralField,
    mode: &Mo::Mode,
    a: f64,
    rng: &mut R,
    cfg: &SimConfig,
) -> Result<XiPath<Mo::Mode>> {
    simulate_xi_with_cache(
        model,
        &FlowCache::new(),
        lambda0,
        nu,
        t,
        x,
        mode,
        a,
        rng,
        cfg,
    )
}

/// Doléans-Dade exponential of the intensity change `ν` along a path of
/// the reference law:
/// `L = exp(∫ Σ_b (1 − ν(r, b)) λ₀(b) dr) · Π_{control jumps} ν(T_n, A_n)`,
/// with `ν` evaluated at the pre-jump state. Mode jumps contribute 1.
pub fn doleans_weight<M>(path: &XiPath<M>, nu: &dyn NuPolicy<M>, lambda0: &Lambda0) -> Result<f64> {
    let (lo, hi) = nu.bounds();
    let checked = |v: f64| {
        if v < lo * (1.0 - 1e-12) || v > hi * (1.0 + 1e-12) || !v.is_finite() {
            Err(Error::NuOutOfBounds {
                value: v,
                min: lo,
                max: hi,
            })
        } else {
            Ok(v)
        }
    };
    let mut log_l = 0.0;
    for seg in &path.segments {
        let integrand = seg
            .times
            .iter()
            .zip(&seg.fields)
            .map(|(s, y)| {
                let mut acc = 0.0;
                for (b, w) in lambda0.weights().iter().enumerate() {
                    acc += (1.0 - checked(nu.nu(*s, y, &seg.mode, seg.control, b))?) * w;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<f64>>>()?;
        log_l += trapezoid(&seg.times, &integrand);
    }
    for (jump, seg) in path.jumps.iter().zip(&path.segments) {
        if jump.kind == JumpKind::Control {
            let y = seg.fields.last().expect("segment has samples");
            log_l += checked(nu.nu(jump.time, y, &seg.mode, seg.control, jump.control))?.ln();
        }
    }
    Ok(log_l.exp())
}

/// `∫ f(X_s, I_s) ds + g(X_T)` with the trapezoid rule per segment.
pub fn dual_cost<Mo: PdmpModel>(model: &Mo, path: &XiPath<Mo::Mode>) -> f64 {
    let controls = model.controls();
    let running: f64 = path
        .segments
        .iter()
        .map(|seg| {
            let a = controls[seg.control];
            let f: Vec<f64> = seg
                .fields
                .iter()
                .map(|y| model.running_cost(y, &seg.mode, a))
                .collect();
            trapezoid(&seg.times, &f)
        })
        .sum();
    running + model.terminal_cost(path.terminal_field(), path.terminal_mode())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomization::ConstantNu;
    use crate::rng;
    use crate::toy::ToyModel;

    fn x0() -> SpectralField {
        SpectralField::new(vec![0.5]).unwrap()
    }

    #[test]
    fn unit_nu_has_unit_weight() {
        let toy = ToyModel::two_mode_switch();
        let l0 = Lambda0::uniform(2).unwrap();
        for i in 0..20 {
            let mut r = rng::stream(5, "t", i);
            let p = simulate_xi(
                &toy,
                &l0,
                None,
                0.0,
                &x0(),
                &0,
                0.0,
                &mut r,
                &SimConfig::default(),
            )
            .unwrap();
            assert_eq!(doleans_weight(&p, &ConstantNu(1.0), &l0).unwrap(), 1.0);
        }
    }

    #[test]
    fn jump_free_path_weight() {
        let l0 = Lambda0::new(vec![0.3, 0.7]).unwrap();
        let path = XiPath {
            start_time: 0.5,
            segments: vec![XiSegment {
                mode: 0usize,
                control: 1,
                times: vec![0.5, 0.75, 1.0, 2.0],
                fields: vec![x0(); 4],
            }],
            jumps: vec![],
        };
        let l = doleans_weight(&path, &ConstantNu(2.0), &l0).unwrap();
        assert!((l - (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn out_of_bounds_nu_is_rejected() {
        let l0 = Lambda0::uniform(2).unwrap();
        let path = XiPath {
            start_time: 0.0,
            segments: vec![XiSegment {
                mode: 0usize,
                control: 0,
                times: vec![0.0, 1.0],
                fields: vec![x0(); 2],
            }],
            jumps: vec![],
        };
        let bad = crate::randomization::FnNu {
            rule: |_: f64, _: &SpectralField, _: &usize, _: usize, _: usize| 5.0,
            bounds: (0.5, 2.0),
        };
        assert!(matches!(
            doleans_weight(&path, &bad, &l0),
            Err(Error::NuOutOfBounds { .. })
        ));
    }

    #[test]
    fn control_jumps_hold_the_mode_and_mode_jumps_hold_the_control() {
        let toy = ToyModel::two_mode_switch();
        let l0 = Lambda0::uniform(2).unwrap();
        for i in 0..50 {
            let mut r = rng::stream(6, "t", i);
            let p = simulate_xi(
                &toy,
                &l0,
                None,
                0.0,
                &x0(),
                &1,
                1.0,
                &mut r,
                &SimConfig::default(),
            )
            .unwrap();
            assert_eq!(p.segments.len(), p.jumps.len() + 1);
            for (k, j) in p.jumps.iter().enumerate() {
                let before = &p.segments[k];
                let after = &p.segments[k + 1];
                assert!(j.time > p.start_time && j.time < 1.0);
                assert_eq!((after.mode, after.control), (j.mode, j.control));
                match j.kind {
                    JumpKind::Mode => assert_eq!(after.control, before.control),
                    JumpKind::Control => assert_eq!(after.mode, before.mode),
                }
                assert_eq!(before.fields.last(), after.fields.first());
            }
        }
    }

    #[test]
    fn doubled_nu_doubles_control_jumps() {
        let mut toy = ToyModel::two_mode_switch();
        toy.rates = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        toy.horizon = 4.0;
        let l0 = Lambda0::uniform(2).unwrap();
        let count = |nu: Option<&dyn NuPolicy<usize>>| {
            let n = 4000;
            let c: Vec<f64> = (0..n)
                .map(|i| {
                    let mut r = rng::stream(9, "t", i);
                    simulate_xi(
                        &toy,
                        &l0,
                        nu,
                        0.0,
                        &x0(),
                        &0,
                        0.0,
                        &mut r,
                        &SimConfig::default(),
                    )
                    .unwrap()
                    .count(JumpKind::Control) as f64
                })
                .collect();
            crate::stats::Estimate::from_samples(&c)
        };
        let one = count(None);
        let two = count(Some(&ConstantNu(2.0)));
        assert!((one.mean - 4.0).abs() < 3.0 * one.stderr, "{one:?}");
        assert!((two.mean - 8.0).abs() < 3.0 * two.stderr, "{two:?}");
    }

    #[test]
    fn dual_cost_of_a_hand_built_path() {
        let mut toy = ToyModel::two_mode_switch();
        toy.control_cost = 2.0;
        toy.field_cost = 0.0;
        // mode 0 under a=0 on [0, .4], mode 1 under a=0 on [.4, .7], mode 1 under a=1 on [.7, 1]
        let seg = |mode, control, t0: f64, t1: f64| XiSegment {
            mode,
            control,
            times: vec![t0, t1],
            fields: vec![x0(); 2],
        };
        let path = XiPath {
            start_time: 0.0,
            segments: vec![
                seg(0usize, 0, 0.0, 0.4),
                seg(1, 0, 0.4, 0.7),
                seg(1, 1, 0.7, 1.0),
            ],
            jumps: vec![
                XiJump {
                    time: 0.4,
                    kind: JumpKind::Mode,
                    mode: 1,
                    control: 0,
                },
                XiJump {
                    time: 0.7,
                    kind: JumpKind::Control,
                    mode: 1,
                    control: 1,
                },
            ],
        };
        let expect = 0.4 * 1.0 + 0.3 * 0.0 + 0.3 * 2.0 + 0.0;
        assert!((dual_cost(&toy, &path) - expect).abs() < 1e-15);
    }
}
