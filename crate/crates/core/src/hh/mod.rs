//! Spatial stochastic Hodgkin–Huxley model with channelrhodopsin-2 channels.
//!
//! The axon is `[0, 1]` with Dirichlet ends. Channel sites sit at
//! `zᵢ = i/(N+1)`, each hosting one potassium, sodium or ChR2 channel. The
//! membrane potential couples to site `i` through the mollified average
//! `Φᵢ(v) = ⟨v, φ_{zᵢ}⟩`; between channel transitions it follows
//! `v̇ = (1/C_m) Δv + b_d(v)`.

mod channels;
mod model;
mod params;

pub use channels::{
    alpha_h, alpha_m, alpha_n, beta_h, beta_m, beta_n, ChannelConfig, ChannelState, Family,
};
pub use model::{build_model, mollifier, mollifier_profile, HhModel, Mollifier};
pub use params::HhParams;
