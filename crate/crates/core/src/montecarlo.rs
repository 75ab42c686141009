//! Monte Carlo experiment harness: sweeps SNR and channel realizations,
//! runs the grid-search estimators on freshly drawn payloads/noise, and
//! aggregates RMSE, bias, and per-realization statistics next to the
//! matching theoretical bounds.
//!
//! Determinism contract: every random draw is keyed by a stable per-trial
//! seed derived from the master seed via [`crate::numeric::mix_seed`], and
//! trial results are reduced in trial order, so the output is a pure
//! function of the spec regardless of the worker count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{crlb_data_exact, crlb_mcrlb, crlb_pilot, BoundsError};
use crate::channel::{apply_channel, ChannelError, ChannelSpec};
use crate::estimators::{estimate_modes, EstimatorError, EstimatorMode};
use crate::exec;
use crate::grid::{
    generate_payload, GridError, GridSpec, ResourceSelection, ThetaParams,
};
use crate::numeric::{mix_seed, SPEED_OF_LIGHT_M_S};
use crate::zzb::{zzb_variance, ZzbError, ZzbSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Errors raised while validating or running an experiment sweep.
#[derive(Debug, Error)]
pub enum McError {
    #[error("experiment spec invalid: {0}")]
    BadSpec(String),
    #[error("trial failed at snr {snr_db} dB, realization {realization}, trial {trial}: {source}")]
    Trial {
        snr_db: f64,
        realization: usize,
        trial: usize,
        source: EstimatorError,
    },
    #[error(
        "non-finite TOA error at snr {snr_db} dB, realization {realization}, trial {trial}, mode {mode}"
    )]
    NonFiniteError { snr_db: f64, realization: usize, trial: usize, mode: EstimatorMode },
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Zzb(#[from] ZzbError),
}

/// How the true (z, φ) is drawn each trial.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthSpec {
    /// z ~ U[0, N_a), φ ~ U[0, 2π) independently per trial.
    Uniform,
    /// Fixed truth for every trial.
    Fixed { delay_samples: f64, phase_rad: f64 },
}

impl Default for TruthSpec {
    fn default() -> Self {
        TruthSpec::Uniform
    }
}

fn default_delta_z() -> f64 {
    0.125
}
fn default_delta_phi() -> f64 {
    std::f64::consts::TAU / 24.0
}
fn default_gh_order() -> usize {
    30
}

/// Declarative description of a full estimator sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub grid: GridSpec,
    pub channel: ChannelSpec,
    /// Estimator modes to run each trial.
    pub modes: Vec<EstimatorMode>,
    /// z-grid step in samples for the estimator search.
    #[serde(default = "default_delta_z")]
    pub delta_z: f64,
    /// φ-grid step in radians for the estimator search.
    #[serde(default = "default_delta_phi")]
    pub delta_phi: f64,
    /// Per-cell SNR points in dB (γ = nominal channel power / σ²).
    pub snr_db: Vec<f64>,
    /// Independent channel realizations (shared across SNR points).
    pub n_channel: usize,
    /// Noise/payload/truth trials per realization.
    pub n_trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub truth: TruthSpec,
    /// Attach CRLB/MCRLB/ZZB values (computed on the first realization's
    /// channel) to each sweep point.
    #[serde(default)]
    pub with_bounds: bool,
    /// Resolution for the attached ZZB (defaults used when absent).
    #[serde(default)]
    pub zzb: Option<ZzbSettings>,
    /// Gauss-Hermite order for the attached exact data CRLB.
    #[serde(default = "default_gh_order")]
    pub gh_order: usize,
}

/// Aggregate result for one (SNR, mode) pair.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub mode: EstimatorMode,
    pub rmse_m: f64,
    pub bias_m: f64,
    pub trials: usize,
    /// Mode-matched CRLB (pilot form, exact-data form, or their Fisher sum
    /// for pilot+data), when bounds are attached.
    pub crlb_m: Option<f64>,
    /// Modified CRLB over the data cells, when applicable.
    pub mcrlb_m: Option<f64>,
    /// Ziv-Zakai bound for the mode's cell selection.
    pub zzb_m: Option<f64>,
}

/// RMSE of one mode over one channel realization (for CCDF work).
#[derive(Debug, Clone, Serialize)]
pub struct RealizationPoint {
    pub snr_db: f64,
    pub mode: EstimatorMode,
    pub realization: usize,
    pub rmse_m: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub realizations: Vec<RealizationPoint>,
}

// Stable stream tags for per-trial seed derivation.
const STREAM_CHANNEL: u64 = 1;
const STREAM_PAYLOAD: u64 = 2;
const STREAM_THETA: u64 = 3;
const STREAM_NOISE: u64 = 4;

fn draw_truth(spec: &TruthSpec, n_a: f64, seed: u64) -> ThetaParams {
    match spec {
        TruthSpec::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = rng.gen::<f64>() * n_a;
            let phi = rng.gen::<f64>() * std::f64::consts::TAU;
            ThetaParams::new(z, phi)
        }
        TruthSpec::Fixed { delay_samples, phase_rad } => {
            ThetaParams::new(*delay_samples, *phase_rad)
        }
    }
}

/// Mode-matched bounds at one sweep point, computed on one realization.
fn attach_bounds(
    point: &mut SweepPoint,
    grid: &crate::grid::ResourceGrid,
    chan: &crate::channel::ChannelRealization,
    constellation: &crate::grid::Constellation,
    noise_power: f64,
    zzb: &ZzbSettings,
    gh_order: usize,
) -> Result<(), McError> {
    let selection = match point.mode {
        EstimatorMode::PilotOnly => ResourceSelection::PilotOnly,
        EstimatorMode::DataOnly => ResourceSelection::DataOnly,
        // The DD estimator has no bound of its own; report the pilot+data
        // bounds it is trying to reach.
        EstimatorMode::PilotPlusData | EstimatorMode::DecisionDirected => {
            ResourceSelection::PilotPlusData
        }
    };
    let crlb_m = match selection {
        ResourceSelection::PilotOnly => Some(crlb_pilot(grid, chan, noise_power)?.rmse_m),
        ResourceSelection::DataOnly => {
            Some(crlb_data_exact(grid, chan, constellation, noise_power, gh_order)?.rmse_m)
        }
        ResourceSelection::PilotPlusData => {
            // Fisher information adds across independent cell populations.
            let p = crlb_pilot(grid, chan, noise_power)?;
            let d = crlb_data_exact(grid, chan, constellation, noise_power, gh_order)?;
            Some(SPEED_OF_LIGHT_M_S / (p.fisher + d.fisher).sqrt())
        }
    };
    let mcrlb_m = match selection {
        ResourceSelection::PilotOnly => None,
        _ => Some(crlb_mcrlb(grid, chan, noise_power)?.rmse_m),
    };
    let zzb_m =
        Some(zzb_variance(grid, chan, constellation, noise_power, selection, zzb)?.rmse_m);
    point.crlb_m = crlb_m;
    point.mcrlb_m = mcrlb_m;
    point.zzb_m = zzb_m;
    Ok(())
}

/// Runs the full sweep. Deterministic in the spec; trials parallelize, and
/// aggregation reduces in fixed trial order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult, McError> {
    if spec.n_channel == 0 || spec.n_trials == 0 {
        return Err(McError::BadSpec("n_channel and n_trials must be >= 1".into()));
    }
    if spec.modes.is_empty() {
        return Err(McError::BadSpec("at least one estimator mode required".into()));
    }
    if spec.snr_db.is_empty() {
        return Err(McError::BadSpec("at least one SNR point required".into()));
    }
    let (grid, constellation) = spec.grid.build()?;
    let params = *grid.params();
    let n_a = params.window_samples();
    let nominal = spec.channel.nominal_power();
    let zzb_settings = spec.zzb.unwrap_or_default();

    let mut points = Vec::new();
    let mut realizations = Vec::new();

    for (si, &snr_db) in spec.snr_db.iter().enumerate() {
        let noise_power = nominal * 10f64.powf(-snr_db / 10.0);
        // Per-(snr, mode) accumulators over all realizations.
        let mut sq_sum = vec![0.0f64; spec.modes.len()];
        let mut bias_sum = vec![0.0f64; spec.modes.len()];

        for r in 0..spec.n_channel {
            let chan = spec.channel.realize(&params, mix_seed(spec.master_seed, &[STREAM_CHANNEL, r as u64]))?;

            // One trial: draw truth/payload/noise, run every mode, return
            // the signed TOA errors in meters.
            let trial_errors: Vec<Result<Vec<f64>, McError>> =
                exec::map_indexed(spec.n_trials, |t| {
                    let tags = |stream: u64| {
                        mix_seed(spec.master_seed, &[stream, si as u64, r as u64, t as u64])
                    };
                    let theta = draw_truth(&spec.truth, n_a, tags(STREAM_THETA));
                    let payload = generate_payload(&grid, &constellation, tags(STREAM_PAYLOAD));
                    let y = apply_channel(
                        &payload,
                        &chan,
                        &theta,
                        &params,
                        noise_power,
                        tags(STREAM_NOISE),
                    )?;
                    let estimates = estimate_modes(
                        &y,
                        &grid,
                        &chan,
                        noise_power,
                        &constellation,
                        &spec.modes,
                        spec.delta_z,
                        spec.delta_phi,
                    )
                    .map_err(|source| McError::Trial {
                        snr_db,
                        realization: r,
                        trial: t,
                        source,
                    })?;
                    spec.modes
                        .iter()
                        .zip(&estimates)
                        .map(|(&mode, est)| {
                            let err_m = (est.theta_hat.delay_samples - theta.delay_samples)
                                * params.sample_period_s()
                                * SPEED_OF_LIGHT_M_S;
                            if !err_m.is_finite() {
                                return Err(McError::NonFiniteError {
                                    snr_db,
                                    realization: r,
                                    trial: t,
                                    mode,
                                });
                            }
                            Ok(err_m)
                        })
                        .collect()
                });

            let mut real_sq = vec![0.0f64; spec.modes.len()];
            for per_trial in trial_errors {
                let errs = per_trial?;
                for (mi, &e) in errs.iter().enumerate() {
                    real_sq[mi] += e * e;
                    bias_sum[mi] += e;
                }
            }
            for (mi, &sq) in real_sq.iter().enumerate() {
                sq_sum[mi] += sq;
                realizations.push(RealizationPoint {
                    snr_db,
                    mode: spec.modes[mi],
                    realization: r,
                    rmse_m: (sq / spec.n_trials as f64).sqrt(),
                });
            }
        }

        let total = (spec.n_channel * spec.n_trials) as f64;
        for (mi, &mode) in spec.modes.iter().enumerate() {
            let mut point = SweepPoint {
                snr_db,
                mode,
                rmse_m: (sq_sum[mi] / total).sqrt(),
                bias_m: bias_sum[mi] / total,
                trials: spec.n_channel * spec.n_trials,
                crlb_m: None,
                mcrlb_m: None,
                zzb_m: None,
            };
            if spec.with_bounds {
                let chan = spec
                    .channel
                    .realize(&params, mix_seed(spec.master_seed, &[STREAM_CHANNEL, 0]))?;
                attach_bounds(
                    &mut point,
                    &grid,
                    &chan,
                    &constellation,
                    noise_power,
                    &zzb_settings,
                    spec.gh_order,
                )?;
            }
            points.push(point);
        }
    }

    Ok(SweepResult { points, realizations })
}

/// Empirical complementary CDF: for each distinct sorted value v, the
/// fraction of samples strictly exceeding v (right-continuous).
pub fn ccdf(values: &[f64]) -> Result<Vec<(f64, f64)>, McError> {
    if values.is_empty() {
        return Err(McError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN values"));
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        out.push((v, (sorted.len() - j) as f64 / n));
        i = j;
    }
    Ok(out)
}

/// Linear-interpolated percentile (0 ≤ q ≤ 1) of a sample set.
pub fn percentile(values: &[f64], q: f64) -> Result<f64, McError> {
    if values.is_empty() {
        return Err(McError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN values"));
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] * (1.0 - frac) + sorted[hi] * frac)
}
