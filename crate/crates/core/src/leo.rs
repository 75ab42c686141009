//! LEO pseudorange positioning: Walker-Delta constellation geometry,
//! pseudorange simulation driven by the TOA estimators, weighted nonlinear
//! least squares, linearized covariance prediction from the Ziv-Zakai bound,
//! and Chebyshev confidence ellipses.
//!
//! Everything is expressed in a local east-north-up (ENU) frame centered on
//! the receiver's true position, so the truth state is the origin plus the
//! clock term. Distances are meters throughout.

use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix4, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::channel::{apply_channel, make_flat_channel, ChannelError, ChannelSpec};
use crate::estimators::{estimate_modes, EstimatorError, EstimatorMode};
use crate::exec;
use crate::grid::{generate_payload, GridError, GridSpec, ResourceSelection, ThetaParams};
use crate::numeric::{mix_seed, SPEED_OF_LIGHT_M_S};
use crate::zzb::{zzb_variance, ZzbError, ZzbSettings};

/// Mean equatorial Earth radius used for the spherical ground model.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;
/// Standard gravitational parameter of Earth.
pub const EARTH_MU_M3_S2: f64 = 3.986_004_418e14;

#[derive(Debug, Error)]
pub enum LeoError {
    #[error("campaign spec invalid: {0}")]
    BadSpec(String),
    #[error("only {visible} satellites above the elevation mask, {needed} needed")]
    NotEnoughVisible { visible: usize, needed: usize },
    #[error("positioning needs at least 4 satellites, got {0}")]
    NotEnoughSatellites(usize),
    #[error("input length {got} does not match the {expected} satellites")]
    InputMismatch { expected: usize, got: usize },
    #[error("normal matrix is singular: degenerate satellite geometry")]
    SingularGeometry,
    #[error("covariance is not positive semidefinite")]
    NonPositiveCovariance,
    #[error("confidence {0} outside (0, 1)")]
    BadConfidence(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Zzb(#[from] ZzbError),
}

// ── Constellation geometry ───────────────────────────────────────────────────

/// Walker-Delta constellation `i : total/planes/phasing` at a common
/// circular-orbit altitude.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerSpec {
    pub altitude_m: f64,
    pub inclination_deg: f64,
    pub total_sats: usize,
    pub planes: usize,
    /// Inter-plane phasing parameter F: the in-plane anomaly advances by
    /// `2π·F/total_sats` per plane.
    pub phasing: usize,
}

impl WalkerSpec {
    fn validate(&self) -> Result<(), LeoError> {
        if !(self.altitude_m > 0.0 && self.altitude_m.is_finite()) {
            return Err(LeoError::BadSpec(format!("altitude {} m", self.altitude_m)));
        }
        if self.planes == 0 || self.total_sats == 0 || self.total_sats % self.planes != 0 {
            return Err(LeoError::BadSpec(format!(
                "{} satellites do not fill {} planes evenly",
                self.total_sats, self.planes
            )));
        }
        Ok(())
    }

    pub fn sats_per_plane(&self) -> usize {
        self.total_sats / self.planes
    }

    pub fn semi_major_axis_m(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude_m
    }

    /// Keplerian orbital period `2π√(a³/μ)`.
    pub fn orbital_period_s(&self) -> f64 {
        let a = self.semi_major_axis_m();
        TAU * (a * a * a / EARTH_MU_M3_S2).sqrt()
    }
}

/// Positions of every satellite at time `t_s` after the epoch, in an
/// Earth-centered frame (Earth rotation over the sub-second campaign spans is
/// neglected, so inertial and Earth-fixed axes coincide).
pub fn walker_positions(spec: &WalkerSpec, t_s: f64) -> Result<Vec<Vector3<f64>>, LeoError> {
    spec.validate()?;
    let a = spec.semi_major_axis_m();
    let inc = spec.inclination_deg.to_radians();
    let per_plane = spec.sats_per_plane();
    let mean_motion = TAU / spec.orbital_period_s();
    let mut out = Vec::with_capacity(spec.total_sats);
    for p in 0..spec.planes {
        let raan = TAU * p as f64 / spec.planes as f64;
        let (sin_o, cos_o) = raan.sin_cos();
        for s in 0..per_plane {
            let u = TAU * s as f64 / per_plane as f64
                + TAU * (spec.phasing * p) as f64 / spec.total_sats as f64
                + mean_motion * t_s;
            let (sin_u, cos_u) = u.sin_cos();
            // Circular orbit: argument of latitude u in a plane with RAAN Ω
            // and inclination i.
            out.push(Vector3::new(
                a * (cos_o * cos_u - sin_o * sin_u * inc.cos()),
                a * (sin_o * cos_u + cos_o * sin_u * inc.cos()),
                a * (sin_u * inc.sin()),
            ));
        }
    }
    Ok(out)
}

/// Receiver position on the spherical Earth model.
pub fn geodetic_to_ecef(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Vector3<f64> {
    let (sin_lat, cos_lat) = lat_deg.to_radians().sin_cos();
    let (sin_lon, cos_lon) = lon_deg.to_radians().sin_cos();
    (EARTH_RADIUS_M + alt_m) * Vector3::new(cos_lat * cos_lon, cos_lat * sin_lon, sin_lat)
}

/// Rotation whose rows map an ECEF offset into east/north/up components at
/// the given ground point.
pub fn enu_rotation(lat_deg: f64, lon_deg: f64) -> Matrix3<f64> {
    let (sin_lat, cos_lat) = lat_deg.to_radians().sin_cos();
    let (sin_lon, cos_lon) = lon_deg.to_radians().sin_cos();
    Matrix3::new(
        -sin_lon,
        cos_lon,
        0.0,
        -sin_lat * cos_lon,
        -sin_lat * sin_lon,
        cos_lat,
        cos_lat * cos_lon,
        cos_lat * sin_lon,
        sin_lat,
    )
}

/// Elevation angle of an ENU line-of-sight vector, degrees.
pub fn elevation_deg(enu: &Vector3<f64>) -> f64 {
    enu.z.atan2(enu.xy().norm()).to_degrees()
}

/// The satellites a positioning fix uses: ENU positions (receiver at the
/// origin), each taken at its own burst epoch, plus the receiver clock term.
#[derive(Debug, Clone)]
pub struct SatGeometry {
    pub sat_enu_m: Vec<Vector3<f64>>,
    /// Selection-time elevations, sorted descending.
    pub elevations_deg: Vec<f64>,
    pub clock_offset_s: f64,
}

impl SatGeometry {
    /// Geometric ranges from the receiver, meters.
    pub fn ranges_m(&self) -> Vec<f64> {
        self.sat_enu_m.iter().map(|p| p.norm()).collect()
    }
}

/// Selects the `n_sats` highest-elevation satellites above the mask as seen
/// from the receiver at the epoch, then places each chosen satellite at its
/// own burst time (`rank · burst_interval_s`) so consecutive bursts see the
/// constellation move.
pub fn select_geometry(
    walker: &WalkerSpec,
    receiver_lat_deg: f64,
    receiver_lon_deg: f64,
    elevation_mask_deg: f64,
    n_sats: usize,
    burst_interval_s: f64,
    clock_offset_s: f64,
) -> Result<SatGeometry, LeoError> {
    if n_sats < 4 {
        return Err(LeoError::NotEnoughSatellites(n_sats));
    }
    let receiver = geodetic_to_ecef(receiver_lat_deg, receiver_lon_deg, 0.0);
    let rot = enu_rotation(receiver_lat_deg, receiver_lon_deg);
    let at_epoch = walker_positions(walker, 0.0)?;
    let mut visible: Vec<(usize, f64)> = at_epoch
        .iter()
        .enumerate()
        .filter_map(|(i, pos)| {
            let el = elevation_deg(&(rot * (pos - receiver)));
            (el >= elevation_mask_deg).then_some((i, el))
        })
        .collect();
    if visible.len() < n_sats {
        return Err(LeoError::NotEnoughVisible { visible: visible.len(), needed: n_sats });
    }
    visible.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite elevations").then(a.0.cmp(&b.0)));
    visible.truncate(n_sats);

    let mut sat_enu_m = Vec::with_capacity(n_sats);
    let mut elevations_deg = Vec::with_capacity(n_sats);
    for (rank, &(idx, el)) in visible.iter().enumerate() {
        let moved = walker_positions(walker, rank as f64 * burst_interval_s)?[idx];
        sat_enu_m.push(rot * (moved - receiver));
        elevations_deg.push(el);
    }
    Ok(SatGeometry { sat_enu_m, elevations_deg, clock_offset_s })
}

/// Pseudoranges in meters: geometric range plus the clock offset and the
/// per-satellite TOA estimation error, both scaled by the speed of light.
pub fn simulate_pseudoranges(
    geom: &SatGeometry,
    toa_errors_s: &[f64],
) -> Result<Vec<f64>, LeoError> {
    if toa_errors_s.len() != geom.sat_enu_m.len() {
        return Err(LeoError::InputMismatch {
            expected: geom.sat_enu_m.len(),
            got: toa_errors_s.len(),
        });
    }
    Ok(geom
        .sat_enu_m
        .iter()
        .zip(toa_errors_s)
        .map(|(p, &err)| p.norm() + SPEED_OF_LIGHT_M_S * (geom.clock_offset_s + err))
        .collect())
}

// ── Weighted nonlinear least squares ─────────────────────────────────────────

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WnlsSettings {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Convergence threshold on the position-step norm, meters.
    #[serde(default = "default_tolerance_m")]
    pub tolerance_m: f64,
}

fn default_max_iterations() -> usize {
    20
}
fn default_tolerance_m() -> f64 {
    1e-6
}

impl Default for WnlsSettings {
    fn default() -> Self {
        WnlsSettings {
            max_iterations: default_max_iterations(),
            tolerance_m: default_tolerance_m(),
        }
    }
}

/// Gauss-Newton solution of the pseudorange system.
#[derive(Debug, Clone)]
pub struct PositionSolution {
    /// `[east, north, up, c·δt]`, meters.
    pub state: Vector4<f64>,
    /// Linearized covariance `(AᵀΣ⁻¹A)⁻¹` at the solution.
    pub covariance: Matrix4<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the step shrank below
    /// tolerance; the partial solution is still returned.
    pub converged: bool,
}

/// Model Jacobian rows `[−u_iᵀ, 1]` where `u_i` is the unit line of sight
/// from the state's position to satellite `i`.
pub fn pseudorange_jacobian(sat_enu_m: &[Vector3<f64>], state: &Vector4<f64>) -> DMatrix<f64> {
    let pos = state.xyz();
    let mut j = DMatrix::zeros(sat_enu_m.len(), 4);
    for (i, p) in sat_enu_m.iter().enumerate() {
        let los = p - pos;
        let u = los / los.norm();
        j[(i, 0)] = -u.x;
        j[(i, 1)] = -u.y;
        j[(i, 2)] = -u.z;
        j[(i, 3)] = 1.0;
    }
    j
}

/// Iteratively reweighted Gauss-Newton solve of
/// `ρ_i = ‖p_i − x‖ + b + noise`, weighted by the per-satellite pseudorange
/// variances (m²). Returns the linearized covariance at the solution.
pub fn wnls_solve(
    sat_enu_m: &[Vector3<f64>],
    pseudoranges_m: &[f64],
    range_variances_m2: &[f64],
    initial_state: Vector4<f64>,
    settings: &WnlsSettings,
) -> Result<PositionSolution, LeoError> {
    let n = sat_enu_m.len();
    if n < 4 {
        return Err(LeoError::NotEnoughSatellites(n));
    }
    if pseudoranges_m.len() != n {
        return Err(LeoError::InputMismatch { expected: n, got: pseudoranges_m.len() });
    }
    if range_variances_m2.len() != n {
        return Err(LeoError::InputMismatch { expected: n, got: range_variances_m2.len() });
    }
    if let Some(&bad) = range_variances_m2.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(LeoError::BadSpec(format!("pseudorange variance {bad} must be positive")));
    }

    let normal_system = |state: &Vector4<f64>| -> (Matrix4<f64>, Vector4<f64>) {
        let mut normal = Matrix4::zeros();
        let mut rhs = Vector4::zeros();
        for i in 0..n {
            let los = sat_enu_m[i] - state.xyz();
            let range = los.norm();
            let u = los / range;
            let row = Vector4::new(-u.x, -u.y, -u.z, 1.0);
            let w = 1.0 / range_variances_m2[i];
            let residual = pseudoranges_m[i] - (range + state.w);
            normal += w * row * row.transpose();
            rhs += w * residual * row;
        }
        (normal, rhs)
    };

    let mut state = initial_state;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iterations {
        let (normal, rhs) = normal_system(&state);
        let chol = normal.cholesky().ok_or(LeoError::SingularGeometry)?;
        let step = chol.solve(&rhs);
        state += step;
        iterations += 1;
        if step.xyz().norm() < settings.tolerance_m {
            converged = true;
            break;
        }
    }
    let (normal, _) = normal_system(&state);
    let covariance =
        normal.cholesky().ok_or(LeoError::SingularGeometry)?.inverse();
    Ok(PositionSolution { state, covariance, iterations, converged })
}

// ── Chebyshev confidence ellipse ─────────────────────────────────────────────

/// Horizontal confidence ellipse: semi-axes `k·√λ` of the 2×2 covariance
/// with the distribution-free Chebyshev factor `k = √(2/(1−confidence))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConfidenceEllipse {
    pub semi_major_m: f64,
    pub semi_minor_m: f64,
    /// Angle of the major axis from the first (east) axis, in [0, π).
    pub orientation_rad: f64,
    pub confidence: f64,
}

pub fn chebyshev_ellipse(
    cov: &Matrix2<f64>,
    confidence: f64,
) -> Result<ConfidenceEllipse, LeoError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(LeoError::BadConfidence(confidence));
    }
    let (a, c) = (cov[(0, 0)], cov[(1, 1)]);
    let b = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let lam_max = mean + radius;
    let lam_min = mean - radius;
    let tol = 1e-12 * a.abs().max(c.abs()).max(1.0);
    if !(lam_max.is_finite() && lam_min >= -tol) {
        return Err(LeoError::NonPositiveCovariance);
    }
    let k = (2.0 / (1.0 - confidence)).sqrt();
    let orientation = if radius <= tol {
        0.0
    } else if b.abs() <= tol {
        if a >= c {
            0.0
        } else {
            PI / 2.0
        }
    } else {
        (lam_max - a).atan2(b).rem_euclid(PI)
    };
    Ok(ConfidenceEllipse {
        semi_major_m: k * lam_max.max(0.0).sqrt(),
        semi_minor_m: k * lam_min.max(0.0).sqrt(),
        orientation_rad: orientation,
        confidence,
    })
}

// ── Positioning campaign ─────────────────────────────────────────────────────

fn default_delta_z() -> f64 {
    0.125
}
fn default_delta_phi() -> f64 {
    TAU / 24.0
}
fn default_mask_deg() -> f64 {
    30.0
}
fn default_n_satellites() -> usize {
    4
}
fn default_burst_interval_s() -> f64 {
    1e-3
}
fn default_confidence() -> f64 {
    0.95
}

/// Declarative description of a positioning campaign: one fixed receiver and
/// satellite pick, `n_channel` independent channel draws per satellite, and
/// `n_trials` noise trials per channel realization. Each trial estimates the
/// TOA per satellite in every requested mode, forms pseudoranges, and solves
/// for position; the solve is weighted by the empirical TOA error variances
/// of that realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeoCampaignSpec {
    pub grid: GridSpec,
    pub channel: ChannelSpec,
    pub modes: Vec<EstimatorMode>,
    /// Per-cell SNR in dB defining the noise power against the channel's
    /// nominal mean power.
    pub snr_db: f64,
    pub n_channel: usize,
    pub n_trials: usize,
    pub master_seed: u64,
    #[serde(default = "default_delta_z")]
    pub delta_z: f64,
    #[serde(default = "default_delta_phi")]
    pub delta_phi: f64,
    /// Settings for the per-realization bound used to predict the solution
    /// covariance.
    #[serde(default)]
    pub zzb: ZzbSettings,
    pub walker: WalkerSpec,
    pub receiver_lat_deg: f64,
    pub receiver_lon_deg: f64,
    #[serde(default = "default_mask_deg")]
    pub elevation_mask_deg: f64,
    #[serde(default = "default_n_satellites")]
    pub n_satellites: usize,
    #[serde(default = "default_burst_interval_s")]
    pub burst_interval_s: f64,
    #[serde(default)]
    pub clock_offset_s: f64,
    #[serde(default = "default_confidence")]
    pub ellipse_confidence: f64,
    #[serde(default)]
    pub wnls: WnlsSettings,
    /// Compute per-realization bound-predicted covariances. Disabling skips
    /// every Ziv-Zakai evaluation — useful for large campaigns where only the
    /// empirical percentiles matter.
    #[serde(default = "default_predict_bounds")]
    pub predict_bounds: bool,
}

fn default_predict_bounds() -> bool {
    true
}

/// Per-mode campaign output. The per-realization vectors are aligned with
/// the realization index and feed the horizontal/vertical CCDFs.
#[derive(Debug, Clone, Serialize)]
pub struct LeoModeSummary {
    pub mode: EstimatorMode,
    /// Horizontal RMS position error per channel realization.
    pub horizontal_rmse_m: Vec<f64>,
    pub vertical_rmse_m: Vec<f64>,
    /// Bound-predicted counterparts from the per-satellite Ziv-Zakai bound
    /// propagated through the linearized solution covariance. Empty when the
    /// campaign runs with `predict_bounds: false`.
    pub predicted_horizontal_rmse_m: Vec<f64>,
    pub predicted_vertical_rmse_m: Vec<f64>,
    /// Ellipse of the pooled empirical horizontal errors across all trials.
    pub empirical_ellipse: ConfidenceEllipse,
    /// Ellipse of the mean predicted horizontal covariance block; `None`
    /// when predictions are disabled.
    pub predicted_ellipse: Option<ConfidenceEllipse>,
    /// Trials whose solver hit the iteration cap (still included above).
    pub unconverged_trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LeoCampaignResult {
    /// Selection-time elevations of the satellites used, degrees.
    pub elevations_deg: Vec<f64>,
    pub sat_enu_m: Vec<[f64; 3]>,
    pub clock_offset_s: f64,
    pub modes: Vec<LeoModeSummary>,
}

// Stable stream tags for per-trial seed derivation (distinct from the
// estimator-sweep streams so campaigns and sweeps never share draws).
const STREAM_LEO_CHANNEL: u64 = 11;
const STREAM_LEO_THETA: u64 = 12;
const STREAM_LEO_PAYLOAD: u64 = 13;
const STREAM_LEO_NOISE: u64 = 14;

struct ModeRealizationOut {
    h_rmse: f64,
    v_rmse: f64,
    // (pred_h, pred_v, q_xx, q_xy, q_yy): bound-predicted RMSEs plus the
    // horizontal covariance block; absent when predictions are disabled.
    pred: Option<(f64, f64, f64, f64, f64)>,
    // Pooled empirical horizontal second moments (sums over trials).
    sum_xx: f64,
    sum_xy: f64,
    sum_yy: f64,
    unconverged: usize,
}

fn mode_selection(mode: EstimatorMode) -> ResourceSelection {
    match mode {
        EstimatorMode::PilotOnly => ResourceSelection::PilotOnly,
        EstimatorMode::DataOnly => ResourceSelection::DataOnly,
        // The decision-directed estimator exploits pilots and data, so its
        // prediction uses the joint bound.
        EstimatorMode::PilotPlusData | EstimatorMode::DecisionDirected => {
            ResourceSelection::PilotPlusData
        }
    }
}

pub fn leo_campaign(spec: &LeoCampaignSpec) -> Result<LeoCampaignResult, LeoError> {
    if spec.n_channel == 0 || spec.n_trials == 0 {
        return Err(LeoError::BadSpec("n_channel and n_trials must be positive".into()));
    }
    if spec.modes.is_empty() {
        return Err(LeoError::BadSpec("at least one estimator mode required".into()));
    }
    if !spec.snr_db.is_finite() {
        return Err(LeoError::BadSpec(format!("snr_db {}", spec.snr_db)));
    }
    let (grid, constellation) =
        spec.grid.build().map_err(|e| LeoError::BadSpec(e.to_string()))?;
    let params = *grid.params();
    let geom = select_geometry(
        &spec.walker,
        spec.receiver_lat_deg,
        spec.receiver_lon_deg,
        spec.elevation_mask_deg,
        spec.n_satellites,
        spec.burst_interval_s,
        spec.clock_offset_s,
    )?;
    let n_sats = geom.sat_enu_m.len();
    let noise_power = spec.channel.nominal_power() * 10f64.powf(-spec.snr_db / 10.0);
    let truth_state =
        Vector4::new(0.0, 0.0, 0.0, SPEED_OF_LIGHT_M_S * spec.clock_offset_s);
    let initial_state = truth_state + Vector4::new(1e3, 1e3, 1e3, 0.0);
    let t_s = params.sample_period_s();
    let n_a = params.window_samples();

    let realizations: Vec<Result<Vec<ModeRealizationOut>, LeoError>> =
        exec::map_indexed(spec.n_channel, |r| {
            let r_u = r as u64;
            let chans: Vec<_> = (0..n_sats)
                .map(|i| {
                    spec.channel.realize(
                        &params,
                        mix_seed(spec.master_seed, &[STREAM_LEO_CHANNEL, r_u, i as u64]),
                    )
                })
                .collect::<Result<_, _>>()?;

            // TOA error per mode, satellite, and trial (seconds).
            let mut toa_errs =
                vec![vec![vec![0.0f64; spec.n_trials]; n_sats]; spec.modes.len()];
            for t in 0..spec.n_trials {
                let t_u = t as u64;
                for (i, chan) in chans.iter().enumerate() {
                    let i_u = i as u64;
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
                        spec.master_seed,
                        &[STREAM_LEO_THETA, r_u, t_u, i_u],
                    ));
                    let theta = ThetaParams::new(
                        rng.gen::<f64>() * n_a,
                        rng.gen::<f64>() * TAU,
                    );
                    let payload = generate_payload(
                        &grid,
                        &constellation,
                        mix_seed(spec.master_seed, &[STREAM_LEO_PAYLOAD, r_u, t_u, i_u]),
                    );
                    let y = apply_channel(
                        &payload,
                        chan,
                        &theta,
                        &params,
                        noise_power,
                        mix_seed(spec.master_seed, &[STREAM_LEO_NOISE, r_u, t_u, i_u]),
                    )?;
                    let ests = estimate_modes(
                        &y,
                        &grid,
                        chan,
                        noise_power,
                        &constellation,
                        &spec.modes,
                        spec.delta_z,
                        spec.delta_phi,
                    )?;
                    for (mi, est) in ests.iter().enumerate() {
                        toa_errs[mi][i][t] =
                            (est.theta_hat.delay_samples - theta.delay_samples) * t_s;
                    }
                }
            }

            // Per-realization bound predictions, cached per distinct
            // (selection, flat-equivalent power): the bound is evaluated on a
            // flat channel carrying the realization's mean power.
            let mut bound_cache: Vec<(ResourceSelection, u64, f64)> = Vec::new();
            let mut bound_for =
                |sel: ResourceSelection, power: f64| -> Result<f64, LeoError> {
                    let key = power.to_bits();
                    if let Some(&(_, _, v)) =
                        bound_cache.iter().find(|(s, k, _)| *s == sel && *k == key)
                    {
                        return Ok(v);
                    }
                    let flat = make_flat_channel(&params, power)?;
                    let z = zzb_variance(
                        &grid,
                        &flat,
                        &constellation,
                        noise_power,
                        sel,
                        &spec.zzb,
                    )?;
                    bound_cache.push((sel, key, z.rmse_m));
                    Ok(z.rmse_m)
                };

            let mut out = Vec::with_capacity(spec.modes.len());
            for (mi, &mode) in spec.modes.iter().enumerate() {
                // Empirical pseudorange variances weight the solver; floor
                // them so noiseless runs stay well-posed.
                let variances: Vec<f64> = (0..n_sats)
                    .map(|i| {
                        let mse = toa_errs[mi][i]
                            .iter()
                            .map(|e| (SPEED_OF_LIGHT_M_S * e).powi(2))
                            .sum::<f64>()
                            / spec.n_trials as f64;
                        mse.max(1e-18)
                    })
                    .collect();

                let mut sum_h2 = 0.0;
                let mut sum_v2 = 0.0;
                let (mut sum_xx, mut sum_xy, mut sum_yy) = (0.0, 0.0, 0.0);
                let mut unconverged = 0usize;
                let mut errs_i = vec![0.0f64; n_sats];
                for t in 0..spec.n_trials {
                    for i in 0..n_sats {
                        errs_i[i] = toa_errs[mi][i][t];
                    }
                    let rho = simulate_pseudoranges(&geom, &errs_i)?;
                    let sol = wnls_solve(
                        &geom.sat_enu_m,
                        &rho,
                        &variances,
                        initial_state,
                        &spec.wnls,
                    )?;
                    if !sol.converged {
                        unconverged += 1;
                    }
                    let e = sol.state - truth_state;
                    sum_h2 += e.x * e.x + e.y * e.y;
                    sum_v2 += e.z * e.z;
                    sum_xx += e.x * e.x;
                    sum_xy += e.x * e.y;
                    sum_yy += e.y * e.y;
                }
                let n_t = spec.n_trials as f64;

                let pred = if spec.predict_bounds {
                    let sel = mode_selection(mode);
                    let pred_vars: Vec<f64> = (0..n_sats)
                        .map(|i| bound_for(sel, chans[i].mean_power()).map(|r| r * r))
                        .collect::<Result<_, _>>()?;
                    let mut normal = Matrix4::zeros();
                    for i in 0..n_sats {
                        let u = geom.sat_enu_m[i] / geom.sat_enu_m[i].norm();
                        let row = Vector4::new(-u.x, -u.y, -u.z, 1.0);
                        normal += (1.0 / pred_vars[i]) * row * row.transpose();
                    }
                    let q = normal
                        .cholesky()
                        .ok_or(LeoError::SingularGeometry)?
                        .inverse();
                    Some((
                        (q[(0, 0)] + q[(1, 1)]).sqrt(),
                        q[(2, 2)].sqrt(),
                        q[(0, 0)],
                        q[(0, 1)],
                        q[(1, 1)],
                    ))
                } else {
                    None
                };

                out.push(ModeRealizationOut {
                    h_rmse: (sum_h2 / n_t).sqrt(),
                    v_rmse: (sum_v2 / n_t).sqrt(),
                    pred,
                    sum_xx,
                    sum_xy,
                    sum_yy,
                    unconverged,
                });
            }
            Ok(out)
        });

    // Fixed-order reduction across realizations.
    let mut modes_out: Vec<LeoModeSummary> = Vec::with_capacity(spec.modes.len());
    let per_real: Vec<Vec<ModeRealizationOut>> =
        realizations.into_iter().collect::<Result<_, _>>()?;
    for (mi, &mode) in spec.modes.iter().enumerate() {
        let mut horizontal = Vec::with_capacity(spec.n_channel);
        let mut vertical = Vec::with_capacity(spec.n_channel);
        let mut pred_h = Vec::with_capacity(spec.n_channel);
        let mut pred_v = Vec::with_capacity(spec.n_channel);
        let (mut exx, mut exy, mut eyy) = (0.0, 0.0, 0.0);
        let (mut qxx, mut qxy, mut qyy) = (0.0, 0.0, 0.0);
        let mut unconverged = 0usize;
        for real in &per_real {
            let m = &real[mi];
            horizontal.push(m.h_rmse);
            vertical.push(m.v_rmse);
            if let Some((ph, pv, q_xx, q_xy, q_yy)) = m.pred {
                pred_h.push(ph);
                pred_v.push(pv);
                qxx += q_xx;
                qxy += q_xy;
                qyy += q_yy;
            }
            exx += m.sum_xx;
            exy += m.sum_xy;
            eyy += m.sum_yy;
            unconverged += m.unconverged;
        }
        let n_pooled = (spec.n_channel * spec.n_trials) as f64;
        let n_real = spec.n_channel as f64;
        let empirical_ellipse = chebyshev_ellipse(
            &Matrix2::new(exx / n_pooled, exy / n_pooled, exy / n_pooled, eyy / n_pooled),
            spec.ellipse_confidence,
        )?;
        let predicted_ellipse = if spec.predict_bounds {
            Some(chebyshev_ellipse(
                &Matrix2::new(qxx / n_real, qxy / n_real, qxy / n_real, qyy / n_real),
                spec.ellipse_confidence,
            )?)
        } else {
            None
        };
        modes_out.push(LeoModeSummary {
            mode,
            horizontal_rmse_m: horizontal,
            vertical_rmse_m: vertical,
            predicted_horizontal_rmse_m: pred_h,
            predicted_vertical_rmse_m: pred_v,
            empirical_ellipse,
            predicted_ellipse,
            unconverged_trials: unconverged,
        });
    }

    Ok(LeoCampaignResult {
        elevations_deg: geom.elevations_deg.clone(),
        sat_enu_m: geom.sat_enu_m.iter().map(|p| [p.x, p.y, p.z]).collect(),
        clock_offset_s: spec.clock_offset_s,
        modes: modes_out,
    })
}
