//! Derivative-free minimization for the low-dimensional intensity searches.

/// Result of a Nelder–Mead run.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Every evaluated `(point, value)` in call order.
    pub trace: Vec<(Vec<f64>, f64)>,
}

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    /// Initial simplex edge along each axis.
    pub step: f64,
    pub max_evaluations: usize,
    /// Stop when the spread of simplex values drops below this.
    pub value_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            step: 0.5,
            max_evaluations: 200,
            value_tol: 1e-8,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `start` with the standard coefficients
    /// (reflection 1, expansion 2, contraction ½, shrink ½). `f` may return
    /// `+∞` to reject a point.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, start: &[f64]) -> Minimum {
        let n = start.len();
        let mut trace = Vec::new();
        let mut eval = |p: &[f64], trace: &mut Vec<(Vec<f64>, f64)>| {
            let v = f(p);
            let v = if v.is_nan() { f64::INFINITY } else { v };
            trace.push((p.to_vec(), v));
            v
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(start, &mut trace);
        simplex.push((start.to_vec(), v0));
        for i in 0..n {
            let mut p = start.to_vec();
            p[i] += self.step;
            let v = eval(&p, &mut trace);
            simplex.push((p, v));
        }
        while trace.len() < self.max_evaluations && n > 0 {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            if (worst - best).abs() <= self.value_tol {
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let reflected = along(1.0);
            let fr = eval(&reflected, &mut trace);
            if fr < best {
                let expanded = along(2.0);
                let fe = eval(&expanded, &mut trace);
                simplex[n] = if fe < fr {
                    (expanded, fe)
                } else {
                    (reflected, fr)
                };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (reflected, fr);
                continue;
            }
            let (contracted, fc) = if fr < worst {
                let p = along(0.5);
                let v = eval(&p, &mut trace);
                (p, v)
            } else {
                let p = along(-0.5);
                let v = eval(&p, &mut trace);
                (p, v)
            };
            if fc < fr.min(worst) {
                simplex[n] = (contracted, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for entry in simplex.iter_mut().skip(1) {
                let p: Vec<f64> = anchor
                    .iter()
                    .zip(&entry.0)
                    .map(|(b, x)| b + 0.5 * (x - b))
                    .collect();
                let v = eval(&p, &mut trace);
                *entry = (p, v);
            }
        }
        let (point, value) = trace
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .cloned()
            .expect("at least one evaluation");
        Minimum {
            point,
            value,
            evaluations: trace.len(),
            trace,
        }
    }
}
