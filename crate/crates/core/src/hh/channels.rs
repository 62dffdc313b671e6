use serde::{Deserialize, Serialize};

/// Channel families hosted at a site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Potassium,
    Sodium,
    Chr2,
}

/// Conformational state of a single channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelState {
    N0,
    N1,
    N2,
    N3,
    N4,
    M0H0,
    M1H0,
    M2H0,
    M3H0,
    M0H1,
    M1H1,
    M2H1,
    M3H1,
    O1,
    O2,
    C1,
    C2,
}

use ChannelState::*;

impl ChannelState {
    pub const ALL: [ChannelState; 17] = [
        N0, N1, N2, N3, N4, M0H0, M1H0, M2H0, M3H0, M0H1, M1H1, M2H1, M3H1, O1, O2, C1, C2,
    ];

    pub fn family(self) -> Family {
        match self {
            N0 | N1 | N2 | N3 | N4 => Family::Potassium,
            O1 | O2 | C1 | C2 => Family::Chr2,
            _ => Family::Sodium,
        }
    }

    pub fn of_family(family: Family) -> &'static [ChannelState] {
        match family {
            Family::Potassium => &Self::ALL[0..5],
            Family::Sodium => &Self::ALL[5..13],
            Family::Chr2 => &Self::ALL[13..17],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            N0 => "n0",
            N1 => "n1",
            N2 => "n2",
            N3 => "n3",
            N4 => "n4",
            M0H0 => "m0h0",
            M1H0 => "m1h0",
            M2H0 => "m2h0",
            M3H0 => "m3h0",
            M0H1 => "m0h1",
            M1H1 => "m1h1",
            M2H1 => "m2h1",
            M3H1 => "m3h1",
            O1 => "O1",
            O2 => "O2",
            C1 => "C1",
            C2 => "C2",
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.label() == label)
    }

    /// `(m, h)` occupation of a sodium state.
    fn sodium_gates(self) -> Option<(usize, usize)> {
        let i = Self::ALL.iter().position(|s| *s == self)?;
        match i {
            5..=8 => Some((i - 5, 0)),
            9..=12 => Some((i - 9, 1)),
            _ => None,
        }
    }

    fn sodium(m: usize, h: usize) -> Self {
        Self::ALL[5 + 4 * h + m]
    }

    fn potassium(n: usize) -> Self {
        Self::ALL[n]
    }
}

/// `x / (e^x − 1)`, with the removable singularity at 0 handled by a
/// second-order expansion of the denominator.
fn x_over_expm1(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 / (1.0 + x / 2.0 + x * x / 6.0)
    } else {
        x / x.exp_m1()
    }
}

/// `α_n(u) = (0.1 − 0.01u)/(e^{1−0.1u} − 1)`; equals 0.1 at `u = 10`.
pub fn alpha_n(u: f64) -> f64 {
    0.1 * x_over_expm1(1.0 - 0.1 * u)
}

/// `β_n(u) = 0.125 e^{−u/80}`.
pub fn beta_n(u: f64) -> f64 {
    0.125 * (-u / 80.0).exp()
}

/// `α_m(u) = (2.5 − 0.1u)/(e^{2.5−0.1u} − 1)`; equals 1 at `u = 25`.
pub fn alpha_m(u: f64) -> f64 {
    x_over_expm1(2.5 - 0.1 * u)
}

/// `β_m(u) = 4 e^{−u/18}`.
pub fn beta_m(u: f64) -> f64 {
    4.0 * (-u / 18.0).exp()
}

/// `α_h(u) = 0.07 e^{−u/20}`.
pub fn alpha_h(u: f64) -> f64 {
    0.07 * (-u / 20.0).exp()
}

/// `β_h(u) = 1/(e^{3−0.1u} + 1)`.
pub fn beta_h(u: f64) -> f64 {
    1.0 / ((3.0 - 0.1 * u).exp() + 1.0)
}

/// Constants of the channelrhodopsin transition table (1/ms).
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Chr2Rates {
    pub eps1: f64,
    pub eps2: f64,
    pub k_d1: f64,
    pub k_d2: f64,
    pub e12: f64,
    pub e21: f64,
    pub k_r: f64,
}

/// Outgoing transitions of one channel in state `state` at local potential
/// `u` (already clamped) and light intensity `a`. Zero-rate rows are omitted.
pub(crate) fn transitions(
    state: ChannelState,
    u: f64,
    a: f64,
    chr2: &Chr2Rates,
    h_gate_flips: bool,
) -> Vec<(ChannelState, f64)> {
    let mut out = Vec::with_capacity(4);
    let mut push = |s: ChannelState, r: f64| {
        if r > 0.0 {
            out.push((s, r));
        }
    };
    match state.family() {
        Family::Potassium => {
            let n = ChannelState::ALL
                .iter()
                .position(|s| *s == state)
                .unwrap_or(0);
            if n < 4 {
                push(ChannelState::potassium(n + 1), (4 - n) as f64 * alpha_n(u));
            }
            if n > 0 {
                push(ChannelState::potassium(n - 1), n as f64 * beta_n(u));
            }
        }
        Family::Sodium => {
            let (m, h) = state.sodium_gates().expect("sodium state");
            if m < 3 {
                push(ChannelState::sodium(m + 1, h), (3 - m) as f64 * alpha_m(u));
            }
            if m > 0 {
                push(ChannelState::sodium(m - 1, h), m as f64 * beta_m(u));
            }
            if h_gate_flips {
                if h == 0 {
                    push(ChannelState::sodium(m, 1), alpha_h(u));
                } else {
                    push(ChannelState::sodium(m, 0), beta_h(u));
                }
            }
        }
        Family::Chr2 => match state {
            C1 => push(O1, chr2.eps1 * a),
            O1 => {
                push(C1, chr2.k_d1);
                push(O2, chr2.e12);
            }
            O2 => {
                push(O1, chr2.e21);
                push(C2, chr2.k_d2);
            }
            C2 => {
                push(O2, chr2.eps2 * a);
                push(C1, chr2.k_r);
            }
            _ => unreachable!("non-ChR2 state in ChR2 family"),
        },
    }
    out
}

/// Channel states of all sites, ordered by site.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelConfig(pub Vec<ChannelState>);

impl ChannelConfig {
    pub fn sites(&self) -> &[ChannelState] {
        &self.0
    }

    pub fn with_site(&self, i: usize, state: ChannelState) -> Self {
        let mut next = self.0.clone();
        next[i] = state;
        ChannelConfig(next)
    }

    pub fn label(&self) -> String {
        self.0
            .iter()
            .map(|s| s.label())
            .collect::<Vec<_>>()
            .join("|")
    }

    /// Parses `label` as produced by [`ChannelConfig::label`].
    pub fn parse(label: &str) -> Option<Self> {
        label
            .split('|')
            .map(ChannelState::parse)
            .collect::<Option<Vec<_>>>()
            .map(ChannelConfig)
    }
}

impl std::fmt::Display for ChannelConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for ChannelConfig {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        ChannelConfig::parse(s)
            .ok_or_else(|| crate::Error::Parse(format!("channel configuration `{s}`")))
    }
}
