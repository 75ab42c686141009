//! Grid-search maximum-likelihood TOA estimators.
//!
//! Four modes share one scan engine. The per-cell log-likelihood under the
//! phase-ramp model `y = h·ν(θ)·x + v` splits into a pilot part (known
//! symbol) and a data part (log-sum-exp marginal over the constellation).
//! The scan exploits two structural facts:
//!
//! * the pilot sum collapses to `2Re{e^{jφ}·P(z)}` for a single complex
//!   accumulator `P(z)`, so the φ sweep over pilots is free;
//! * the data sum is periodic in φ with the constellation's rotational
//!   symmetry `R`, so it is evaluated only on φ ∈ [0, 2π/R) and reused.
//!
//! Estimates are produced by a deterministic argmax over the (z, φ) grid
//! (ties break to the lowest z, then the lowest φ) followed by a three-point
//! parabolic refinement of z at the argmax φ.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::channel::{ChannelRealization, Observation};
use crate::exec;
use crate::grid::{
    Cell, CellState, Constellation, GridError, OfdmParams, ResourceGrid, ResourceSelection,
    ThetaParams,
};
use crate::zzb::MixtureKernel;

/// Errors from estimator configuration or degenerate inputs.
#[derive(Debug, Error)]
pub enum EstimatorError {
    /// The selected mode has no occupied cells to scan.
    #[error("selection {0:?} has no occupied cells")]
    EmptySelection(ResourceSelection),
    /// z-grid step must satisfy 0 < Δz ≤ N_a.
    #[error("z-grid step {got} outside (0, {max}]")]
    BadZStep { got: f64, max: f64 },
    /// φ-grid step must satisfy 0 < Δφ ≤ 2π.
    #[error("phi-grid step {got} outside (0, 2pi]")]
    BadPhiStep { got: f64 },
    /// Noise power must be positive and finite.
    #[error("noise power {0} must be positive and finite")]
    BadNoisePower(f64),
    /// Decision-directed estimation needs at least one true pilot cell.
    #[error("decision-directed estimation requires at least one pilot cell")]
    NoPilotCells,
    /// The decision-directed mode must go through [`dd_estimate`].
    #[error("mode `dd` is not a maximum-likelihood scan; use dd_estimate")]
    NotMaximumLikelihood,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Which cell population the estimator treats as informative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorMode {
    #[serde(rename = "pilot-only")]
    PilotOnly,
    #[serde(rename = "data-only")]
    DataOnly,
    #[serde(rename = "pilot+data")]
    PilotPlusData,
    #[serde(rename = "dd")]
    DecisionDirected,
}

impl EstimatorMode {
    /// The cell selection scanned by the maximum-likelihood modes.
    /// `DecisionDirected` has no fixed selection (it runs two passes).
    pub fn selection(self) -> Option<ResourceSelection> {
        match self {
            EstimatorMode::PilotOnly => Some(ResourceSelection::PilotOnly),
            EstimatorMode::DataOnly => Some(ResourceSelection::DataOnly),
            EstimatorMode::PilotPlusData => Some(ResourceSelection::PilotPlusData),
            EstimatorMode::DecisionDirected => None,
        }
    }

    /// Stable label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            EstimatorMode::PilotOnly => "pilot-only",
            EstimatorMode::DataOnly => "data-only",
            EstimatorMode::PilotPlusData => "pilot+data",
            EstimatorMode::DecisionDirected => "dd",
        }
    }
}

impl std::fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Grid-search resolution and mode.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    /// z-grid step in samples.
    pub delta_z: f64,
    /// φ-grid step in radians.
    pub delta_phi: f64,
}

impl EstimatorConfig {
    /// Default search resolution: Δz = 1/8 sample, Δφ = 15°.
    pub fn new(mode: EstimatorMode) -> Self {
        EstimatorConfig { mode, delta_z: 0.125, delta_phi: TAU / 24.0 }
    }
}

/// Result of a grid search: refined θ̂ plus the objective value at the peak.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub theta_hat: ThetaParams,
    /// Log-likelihood at the (refined) peak, up to the additive constants
    /// dropped identically across θ.
    pub loglik_at_peak: f64,
    /// Decoded data symbols in grid scan order (decision-directed only).
    pub decoded_symbols: Option<Vec<Complex64>>,
}

/// Log-likelihood contribution of one occupied cell at hypothesis `theta`,
/// up to additive θ-independent constants.
///
/// Pilot cell: `(2/σ²)·Re{y*·h·w·c_p·ν_k(θ)}`. Data cell: log-sum-exp over
/// the constellation of `(1/σ²)(2Re{y*·h·w·c·ν_k(θ)} − |h·w|²|c|²)`,
/// max-subtracted for stability. Empty cells contribute nothing.
pub fn loglik_cell(
    y: Complex64,
    cell: &Cell,
    gain: Complex64,
    noise_power: f64,
    constellation: &Constellation,
    theta: &ThetaParams,
    params: &OfdmParams,
) -> f64 {
    let ramp = crate::grid::phase_ramp_offset(theta, cell.offset, params.subcarriers);
    let b = y.conj() * gain * cell.weight / noise_power;
    match cell.state {
        CellState::Empty => 0.0,
        CellState::Pilot(c) => 2.0 * (c * b * ramp).re,
        CellState::Data => {
            let s = gain.norm_sqr() * cell.weight * cell.weight / noise_power;
            let q = b * ramp;
            let mut max = f64::NEG_INFINITY;
            let mut logits = [0.0f64; 64];
            let symbols = constellation.symbols();
            debug_assert!(symbols.len() <= 64);
            for (i, c) in symbols.iter().enumerate() {
                logits[i] = 2.0 * (c * q).re - s * c.norm_sqr();
                if logits[i] > max {
                    max = logits[i];
                }
            }
            let mut sum = 0.0;
            for &t in &logits[..symbols.len()] {
                sum += (t - max).exp();
            }
            max + sum.ln()
        }
    }
}

// ── Scan engine ──────────────────────────────────────────────────────────────

struct ScanCell {
    offset: i32,
    /// `y*·h·w/σ²`: the matched-filter statistic without the symbol.
    b: Complex64,
    /// `|h·w|²/σ²`: per-cell SNR before the symbol modulus.
    s: f64,
    pilot: Option<Complex64>,
}

/// Objective values over the full (z, φ) grid: `rows[i][j]` is the summed
/// log-likelihood at `z = i·Δz`, `φ = j·Δφ`.
pub(crate) struct ScanTable {
    pub z_values: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

/// Pilot and data objective parts evaluated once over the z grid, before the
/// cheap per-φ assembly. Sharing the parts lets several estimator modes reuse
/// one pass over the observation (the data part dominates the cost).
struct ScanParts {
    z_values: Vec<f64>,
    phi_values: Vec<f64>,
    phasors: Vec<Complex64>,
    /// Per z: the pilot accumulator `P(z)` and the folded data values.
    rows: Vec<(Complex64, Vec<f64>)>,
    n_phi_data: usize,
}

fn build_scan_cells(
    y: &Observation,
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    noise_power: f64,
    selection: ResourceSelection,
) -> Result<Vec<ScanCell>, EstimatorError> {
    if !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(EstimatorError::BadNoisePower(noise_power));
    }
    let cells: Vec<ScanCell> = grid
        .selected_cells(selection)
        .map(|cell| {
            let h = chan.gain(cell.symbol, cell.subcarrier);
            ScanCell {
                offset: cell.offset,
                b: y.value(cell.symbol, cell.subcarrier).conj() * h * cell.weight / noise_power,
                s: h.norm_sqr() * cell.weight * cell.weight / noise_power,
                pilot: match cell.state {
                    CellState::Pilot(c) => Some(c),
                    _ => None,
                },
            }
        })
        .collect();
    if cells.is_empty() {
        return Err(EstimatorError::EmptySelection(selection));
    }
    Ok(cells)
}

/// Evaluates the pilot accumulator and (folded) data values over the z grid
/// for the given cell selection, in one parallel pass over the observation.
fn scan_parts(
    y: &Observation,
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    noise_power: f64,
    constellation: &Constellation,
    selection: ResourceSelection,
    delta_z: f64,
    delta_phi: f64,
) -> Result<ScanParts, EstimatorError> {
    let params = grid.params();
    let n_a = params.window_samples();
    if !(delta_z > 0.0 && delta_z <= n_a) {
        return Err(EstimatorError::BadZStep { got: delta_z, max: n_a });
    }
    if !(delta_phi > 0.0 && delta_phi <= TAU) {
        return Err(EstimatorError::BadPhiStep { got: delta_phi });
    }
    let cells = build_scan_cells(y, grid, chan, noise_power, selection)?;
    let kernel = MixtureKernel::new(constellation);
    let big_k = params.subcarriers as f64;

    let z_values: Vec<f64> =
        (0..=(n_a / delta_z).floor() as usize).map(|i| i as f64 * delta_z).collect();
    let ratio = TAU / delta_phi;
    let n_phi = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let phi_values: Vec<f64> = (0..n_phi).map(|j| j as f64 * delta_phi).collect();
    let phasors: Vec<Complex64> =
        phi_values.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();

    // φ-folding: the data part repeats every 2π/R when the φ grid divides 2π
    // into a multiple of R equal steps.
    let rot = constellation.rotational_symmetry();
    let has_data = cells.iter().any(|c| c.pilot.is_none());
    let exact_cover = (ratio - ratio.round()).abs() < 1e-9;
    let n_phi_data = if has_data && exact_cover && n_phi % rot == 0 { n_phi / rot } else { n_phi };

    let rows: Vec<(Complex64, Vec<f64>)> = exec::map_indexed(z_values.len(), |i| {
        let z = z_values[i];
        let mut p_acc = Complex64::new(0.0, 0.0);
        let mut data_vals = vec![0.0f64; if has_data { n_phi_data } else { 0 }];
        for cell in &cells {
            // ν_k(θ)* without the φ term: the conjugate ramp e^{−j2πz·d/K}
            // multiplies b = y*·h·w/σ², leaving the e^{jφ} factor to the
            // per-φ assembly in `assemble_table`.
            let rho = Complex64::from_polar(1.0, -TAU * z * cell.offset as f64 / big_k);
            let q = cell.b * rho;
            match cell.pilot {
                Some(c) => p_acc += c * q,
                None => {
                    for (j, dv) in data_vals.iter_mut().enumerate() {
                        let qphi = q * phasors[j];
                        // LSE_c[2Re{c·qφ} − s|c|²] expressed through the
                        // shared mixture kernel: t0(γ=s, u=conj(qφ)/s).
                        *dv += kernel.t0(cell.s, qphi.conj() / cell.s);
                    }
                }
            }
        }
        (p_acc, data_vals)
    });

    Ok(ScanParts { z_values, phi_values, phasors, rows, n_phi_data })
}

/// Assembles full objective rows from precomputed parts. `use_pilot` /
/// `use_data` pick which contribution enters; disabling one reproduces the
/// single-selection scan exactly (the disabled part contributes a literal
/// zero, as it would with no matching cells).
fn assemble_table(parts: &ScanParts, use_pilot: bool, use_data: bool) -> ScanTable {
    let n_phi = parts.phi_values.len();
    let rows: Vec<Vec<f64>> = parts
        .rows
        .iter()
        .map(|(p_acc, data_vals)| {
            let p = if use_pilot { *p_acc } else { Complex64::new(0.0, 0.0) };
            (0..n_phi)
                .map(|j| {
                    let pilot_part =
                        2.0 * (p.re * parts.phasors[j].re - p.im * parts.phasors[j].im);
                    let data_part = if use_data && !data_vals.is_empty() {
                        data_vals[j % parts.n_phi_data]
                    } else {
                        0.0
                    };
                    pilot_part + data_part
                })
                .collect()
        })
        .collect();
    ScanTable {
        z_values: parts.z_values.clone(),
        phi_values: parts.phi_values.clone(),
        rows,
    }
}

/// Evaluates the summed log-likelihood over the whole (z, φ) grid.
pub(crate) fn scan_objective(
    y: &Observation,
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    noise_power: f64,
    constellation: &Constellation,
    selection: ResourceSelection,
    cfg: &EstimatorConfig,
) -> Result<ScanTable, EstimatorError> {
    let parts = scan_parts(
        y,
        grid,
        chan,
        noise_power,
        constellation,
        selection,
        cfg.delta_z,
        cfg.delta_phi,
    )?;
    Ok(assemble_table(&parts, true, true))
}

/// Deterministic argmax over the table (ties break to the lowest z, then the
/// lowest φ) followed by a three-point parabolic refinement of z at the
/// argmax φ, clamped to ±Δz/2. A peak on the z-grid boundary is returned
/// unrefined.
fn peak_estimate(table: &ScanTable, delta_z: f64, window_samples: f64) -> Estimate {
    let (mut best_i, mut best_j, mut best) = (0usize, 0usize, f64::NEG_INFINITY);
    for (i, row) in table.rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > best {
                best = v;
                best_i = i;
                best_j = j;
            }
        }
    }

    let mut z_hat = table.z_values[best_i];
    let mut peak = best;
    if best_i > 0 && best_i + 1 < table.rows.len() {
        let l_m = table.rows[best_i - 1][best_j];
        let l_0 = best;
        let l_p = table.rows[best_i + 1][best_j];
        let denom = l_m - 2.0 * l_0 + l_p;
        if denom < 0.0 {
            let delta = (0.5 * (l_m - l_p) / denom).clamp(-0.5, 0.5);
            z_hat = (table.z_values[best_i] + delta * delta_z).clamp(0.0, window_samples);
            peak = l_0 + 0.5 * (l_p - l_m) * delta + 0.5 * denom * delta * delta;
        }
    }

    Estimate {
        theta_hat: ThetaParams::new(z_hat, table.phi_values[best_j]),
        loglik_at_peak: peak,
        decoded_symbols: None,
    }
}

/// Maximum-likelihood TOA estimate for the pilot-only, data-only, or
/// pilot-plus-data mode: scans the (z, φ) grid, takes the deterministic
/// argmax (lowest z, then lowest φ, on ties), and refines z with a
/// three-point parabolic fit at the argmax φ, clamped to ±Δz/2. A peak on
/// the z-grid boundary is returned unrefined.
pub fn ml_estimate(
    y: &Observation,
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    noise_power: f64,
    constellation: &Constellation,
    cfg: &EstimatorConfig,
) -> Result<Estimate, EstimatorError> {
    let selection = cfg.mode.selection().ok_or(EstimatorError::NotMaximumLikelihood)?;
    let table = scan_objective(y, grid, chan, noise_power, constellation, selection, cfg)?;
    Ok(peak_estimate(&table, cfg.delta_z, grid.params().window_samples()))
}

/// Decodes every data cell by maximizing the conditional per-cell likelihood
/// given `theta` (equivalent to nearest-constellation-point decisions after
/// derotation). Returns decisions in grid scan order.
pub fn decode_data_symbols(
    y: &Observation,
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    noise_power: f64,
    constellation: &Constellation,
    theta: &ThetaParams,
) -> Result<Vec<Complex64>, EstimatorError> {
    if !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(EstimatorError::BadNoisePower(noise_power));
    }
    let params = grid.params();
    let symbols = constellation.symbols();
    Ok(grid
        .selected_cells(ResourceSelection::DataOnly)
        .map(|cell| {
            let h = chan.gain(cell.symbol, cell.subcarrier);
            let b = y.value(cell.symbol, cell.subcarrier).conj() * h * cell.weight / noise_power;
            let s = h.norm_sqr() * cell.weight * cell.weight / noise_power;
            let q = b * crate::grid::phase_ramp_offset(theta, cell.offset, params.subcarriers);
            let mut best = f64::NEG_INFINITY;
            let mut decided = symbols[0];
            for &c in symbols {
                let metric = 2.0 * (c * q).re - s * c.norm_sqr();
                if metric > best {
                    best = metric;
                    decided = c;
                }
            }
            decided
        })
        .collect())
}

/// Decision-directed estimate: a pilot-only pass produces θ̂_P, every data
/// cell is decoded conditionally on θ̂_P, and the grid search is rerun with
/// the decoded symbols treated as known pilots.
pub fn dd_estimate(
    y: &Observation,
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    noise_power: f64,
    constellation: &Constellation,
    cfg: &EstimatorConfig,
) -> Result<Estimate, EstimatorError> {
    if grid.pilot_count() == 0 {
        return Err(EstimatorError::NoPilotCells);
    }
    let pilot_cfg = EstimatorConfig { mode: EstimatorMode::PilotOnly, ..*cfg };
    let first = ml_estimate(y, grid, chan, noise_power, constellation, &pilot_cfg)?;
    let decoded =
        decode_data_symbols(y, grid, chan, noise_power, constellation, &first.theta_hat)?;
    let relabeled = grid.with_data_relabeled_as_pilots(&decoded)?;
    let second = ml_estimate(y, &relabeled, chan, noise_power, constellation, &pilot_cfg)?;
    Ok(Estimate { decoded_symbols: Some(decoded), ..second })
}

/// Unified entry point: routes the decision-directed mode through
/// [`dd_estimate`] and the maximum-likelihood modes through [`ml_estimate`].
pub fn estimate(
    y: &Observation,
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    noise_power: f64,
    constellation: &Constellation,
    cfg: &EstimatorConfig,
) -> Result<Estimate, EstimatorError> {
    match cfg.mode {
        EstimatorMode::DecisionDirected => {
            dd_estimate(y, grid, chan, noise_power, constellation, cfg)
        }
        _ => ml_estimate(y, grid, chan, noise_power, constellation, cfg),
    }
}

/// Runs several estimator modes on one observation while evaluating the
/// expensive scan parts only once. The pilot accumulator and data tables are
/// computed in a single pass and recombined per mode, so adding the
/// pilot-plus-data or pilot-only mode to a data-only run is nearly free.
/// Results match [`estimate`] exactly, mode by mode.
pub fn estimate_modes(
    y: &Observation,
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    noise_power: f64,
    constellation: &Constellation,
    modes: &[EstimatorMode],
    delta_z: f64,
    delta_phi: f64,
) -> Result<Vec<Estimate>, EstimatorError> {
    // Validate each mode against the grid population first, so the error
    // matches what a single-mode run would produce.
    for &mode in modes {
        match mode {
            EstimatorMode::PilotOnly if grid.pilot_count() == 0 => {
                return Err(EstimatorError::EmptySelection(ResourceSelection::PilotOnly));
            }
            EstimatorMode::DataOnly if grid.data_count() == 0 => {
                return Err(EstimatorError::EmptySelection(ResourceSelection::DataOnly));
            }
            EstimatorMode::PilotPlusData if grid.occupied_count() == 0 => {
                return Err(EstimatorError::EmptySelection(ResourceSelection::PilotPlusData));
            }
            EstimatorMode::DecisionDirected if grid.pilot_count() == 0 => {
                return Err(EstimatorError::NoPilotCells);
            }
            _ => {}
        }
    }

    let needs_pilot = modes.iter().any(|m| {
        matches!(
            m,
            EstimatorMode::PilotOnly
                | EstimatorMode::PilotPlusData
                | EstimatorMode::DecisionDirected
        )
    });
    let needs_data = modes
        .iter()
        .any(|m| matches!(m, EstimatorMode::DataOnly | EstimatorMode::PilotPlusData));
    let union = match (needs_pilot, needs_data) {
        (true, true) => ResourceSelection::PilotPlusData,
        (true, false) => ResourceSelection::PilotOnly,
        (false, true) => ResourceSelection::DataOnly,
        (false, false) => return Ok(Vec::new()),
    };
    let parts =
        scan_parts(y, grid, chan, noise_power, constellation, union, delta_z, delta_phi)?;
    let n_a = grid.params().window_samples();

    let mut pilot_table: Option<ScanTable> = None;
    let table_for = |use_pilot: bool, use_data: bool| -> ScanTable {
        assemble_table(&parts, use_pilot, use_data)
    };

    let mut out = Vec::with_capacity(modes.len());
    for &mode in modes {
        let est = match mode {
            EstimatorMode::PilotOnly | EstimatorMode::DecisionDirected => {
                if pilot_table.is_none() {
                    pilot_table = Some(table_for(true, false));
                }
                let first = peak_estimate(pilot_table.as_ref().unwrap(), delta_z, n_a);
                if mode == EstimatorMode::PilotOnly {
                    first
                } else {
                    let decoded = decode_data_symbols(
                        y,
                        grid,
                        chan,
                        noise_power,
                        constellation,
                        &first.theta_hat,
                    )?;
                    let relabeled = grid.with_data_relabeled_as_pilots(&decoded)?;
                    let cfg = EstimatorConfig {
                        mode: EstimatorMode::PilotOnly,
                        delta_z,
                        delta_phi,
                    };
                    let second =
                        ml_estimate(y, &relabeled, chan, noise_power, constellation, &cfg)?;
                    Estimate { decoded_symbols: Some(decoded), ..second }
                }
            }
            EstimatorMode::DataOnly => peak_estimate(&table_for(false, true), delta_z, n_a),
            EstimatorMode::PilotPlusData => {
                peak_estimate(&table_for(true, true), delta_z, n_a)
            }
        };
        out.push(est);
    }
    Ok(out)
}
