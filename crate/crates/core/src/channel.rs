//! Channel models and the observation generator.
//!
//! The received value on cell (m, k) is `y_m[k] = h_m[k]·ν_k(θ)·x_m[k] + v`,
//! with `v ~ CN(0, σ²)` i.i.d. across cells. The factor `ν_k(θ)` carries the
//! wanted delay/phase; `h_m[k]` is the channel gain on top of it — a constant
//! `√g` for the flat model, or a sum of delayed taps with per-symbol phase
//! drift for the dispersive model.

use crate::grid::{freq_index_map, GridError, OfdmParams, Payload, ThetaParams};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("gain must be > 0, got {0}")]
    BadGain(f64),
    #[error("noise power must be >= 0, got {0}")]
    BadNoisePower(f64),
    #[error("tap list must be nonempty")]
    NoTaps,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// One multipath tap: complex amplitude `amplitude·e^{jφ}`, excess delay in
/// seconds, and a per-symbol phase drift in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelTap {
    pub amplitude: f64,
    pub phase_rad: f64,
    pub delay_s: f64,
    #[serde(default)]
    pub drift_rad_per_symbol: f64,
}

/// Realized per-cell channel gains `h_m[k]`, dense over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    n_symbols: usize,
    subcarriers: usize,
    gains: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn gain(&self, m: usize, k: usize) -> Complex64 {
        self.gains[m * self.subcarriers + k]
    }

    /// |h_m[k]|².
    pub fn power(&self, m: usize, k: usize) -> f64 {
        self.gain(m, k).norm_sqr()
    }

    /// Mean of |h|² over all cells — the flat-equivalent gain a mismatched
    /// receiver would assume.
    pub fn mean_power(&self) -> f64 {
        self.gains.iter().map(|h| h.norm_sqr()).sum::<f64>() / self.gains.len() as f64
    }

    pub fn is_flat(&self) -> bool {
        let first = self.gains[0];
        self.gains.iter().all(|&h| h == first)
    }
}

/// Flat channel: `h_m[k] = √g` for every cell.
pub fn make_flat_channel(params: &OfdmParams, gain: f64) -> Result<ChannelRealization, ChannelError> {
    if !(gain > 0.0) {
        return Err(ChannelError::BadGain(gain));
    }
    let h = Complex64::new(gain.sqrt(), 0.0);
    Ok(ChannelRealization {
        n_symbols: params.n_symbols,
        subcarriers: params.subcarriers,
        gains: vec![h; params.n_cells()],
    })
}

/// Dispersive channel:
/// `h_m[k] = Σ_t a_t·e^{jφ_t}·exp(−j2π·d[k]·Δ_f·delay_t)·exp(j·drift_t·m)`.
pub fn make_tapped_channel(
    params: &OfdmParams,
    taps: &[ChannelTap],
) -> Result<ChannelRealization, ChannelError> {
    if taps.is_empty() {
        return Err(ChannelError::NoTaps);
    }
    let big_k = params.subcarriers;
    let mut gains = Vec::with_capacity(params.n_cells());
    for m in 0..params.n_symbols {
        for k in 0..big_k {
            let d = freq_index_map(k, big_k)? as f64;
            let mut h = Complex64::new(0.0, 0.0);
            for tap in taps {
                let angle = tap.phase_rad - TAU * d * params.delta_f_hz * tap.delay_s
                    + tap.drift_rad_per_symbol * m as f64;
                h += Complex64::from_polar(tap.amplitude, angle);
            }
            gains.push(h);
        }
    }
    Ok(ChannelRealization { n_symbols: params.n_symbols, subcarriers: big_k, gains })
}

/// Declarative channel model, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Constant gain g (power) on every cell.
    Flat { gain: f64 },
    /// Fixed tap table.
    Tapped { taps: Vec<ChannelTap> },
    /// Tap table whose phases are redrawn uniformly on [0, 2π) per
    /// realization; `phase_rad` in the table is ignored.
    TappedRandomPhase { taps: Vec<ChannelTap> },
}

impl ChannelSpec {
    /// Nominal per-cell channel power used to convert a target SNR into a
    /// noise power: the flat gain, or the sum of tap powers (the expected
    /// power under independent tap phases).
    pub fn nominal_power(&self) -> f64 {
        match self {
            ChannelSpec::Flat { gain } => *gain,
            ChannelSpec::Tapped { taps } | ChannelSpec::TappedRandomPhase { taps } => {
                taps.iter().map(|t| t.amplitude * t.amplitude).sum()
            }
        }
    }

    /// Realizes the channel. `seed` only matters for the random-phase model.
    pub fn realize(
        &self,
        params: &OfdmParams,
        seed: u64,
    ) -> Result<ChannelRealization, ChannelError> {
        match self {
            ChannelSpec::Flat { gain } => make_flat_channel(params, *gain),
            ChannelSpec::Tapped { taps } => make_tapped_channel(params, taps),
            ChannelSpec::TappedRandomPhase { taps } => {
                if taps.is_empty() {
                    return Err(ChannelError::NoTaps);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let phase = Uniform::new(0.0, TAU);
                let drawn: Vec<ChannelTap> = taps
                    .iter()
                    .map(|t| ChannelTap { phase_rad: phase.sample(&mut rng), ..*t })
                    .collect();
                make_tapped_channel(params, &drawn)
            }
        }
    }
}

/// Received values, dense over the grid.
#[derive(Debug, Clone)]
pub struct Observation {
    pub n_symbols: usize,
    pub subcarriers: usize,
    pub values: Vec<Complex64>,
}

impl Observation {
    pub fn value(&self, m: usize, k: usize) -> Complex64 {
        self.values[m * self.subcarriers + k]
    }
}

/// Generates `y = h·ν(θ)·x + v` with `v ~ CN(0, noise_power)` i.i.d. over
/// every cell (noise is drawn for empty cells too, so the noise field does
/// not depend on the allocation). Deterministic in (inputs, seed).
pub fn apply_channel(
    payload: &Payload,
    channel: &ChannelRealization,
    theta: &ThetaParams,
    params: &OfdmParams,
    noise_power: f64,
    seed: u64,
) -> Result<Observation, ChannelError> {
    if noise_power < 0.0 {
        return Err(ChannelError::BadNoisePower(noise_power));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_dim = Normal::new(0.0, (noise_power / 2.0).sqrt())
        .expect("std is finite and non-negative");
    let big_k = params.subcarriers;
    let mut values = Vec::with_capacity(params.n_cells());
    for m in 0..params.n_symbols {
        for k in 0..big_k {
            let d = freq_index_map(k, big_k)?;
            let nu = crate::grid::phase_ramp_offset(theta, d, big_k);
            let x = payload.value(m, k);
            let h = channel.gain(m, k);
            let v = Complex64::new(per_dim.sample(&mut rng), per_dim.sample(&mut rng));
            values.push(h * nu * x + v);
        }
    }
    Ok(Observation { n_symbols: params.n_symbols, subcarriers: big_k, values })
}
