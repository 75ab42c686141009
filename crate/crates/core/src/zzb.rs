//! Ziv-Zakai bound (ZZB) on TOA estimation variance for mixed pilot/data
//! grids.
//!
//! The bound is built from the binary hypothesis test between θ₀ and
//! θ₁ = θ₀ + (z₁, φ₁). Each occupied cell contributes log-likelihood-ratio
//! (LLR) moments under θ₀; the summed LLR is treated as Gaussian, giving the
//! minimum error probability `Pmin = Q(Σmean/√Σvar)`. With the per-cell
//! offset angle `Δ_k = 2π·z₁·d[k]/K + φ₁`:
//!
//! * pilot cell: `mean = 2γ|c|²(1 − cos Δ_k)`, `var = 2·mean` (exact);
//! * data cell: `logΛ = T₀(ȳ) − T₀(ȳ·e^{−jΔ_k})` with
//!   `T₀(u) = LSE_c[γ(2Re{u*c} − |c|²)]`, moments by 2-D Gauss-Hermite
//!   quadrature over the normalized noise and a uniform average over the
//!   true symbol.
//!
//! `Pmin` is maximized over a φ₁ grid, the envelope `(N_a−z₁)·maxPmin` is
//! valley-filled, and the variance follows by trapezoidal integration:
//! `σ² = (T_s²/N_a)·∫₀^{N_a} z₁·𝒱{(N_a−z₁)·max_φ₁ Pmin} dz₁`.
//!
//! Data-cell moments depend only on `(γ, Δ)`, and `Δ` can be canonicalized
//! through the constellation's rotational symmetry (`T₀` is invariant under
//! symbol-set rotations) and conjugation closure (`Δ ↔ −Δ`), so the kernel
//! evaluates each distinct canonical pair once and the grid scan reduces to
//! table lookups. Around sharp high-SNR mainlobes the uniform z₁ grid is
//! augmented with a dense segment sized from the aggregate curvature of the
//! LLR mean, so the integrable peak near z₁ = 0 is always resolved.

use crate::bounds::{snr_cells, BoundsError, SnrCell};
use crate::channel::ChannelRealization;
use crate::grid::{
    Cell, CellState, Constellation, GridError, OfdmParams, ResourceGrid, ResourceSelection,
    ThetaParams,
};
use crate::numeric::q_function;
use crate::quad::{GaussHermiteRule, QuadError};
use crate::{exec, SPEED_OF_LIGHT_M_S};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ZzbError {
    #[error("cell is not a pilot cell")]
    NotAPilotCell,
    #[error("cell is not a data cell")]
    NotADataCell,
    #[error("no occupied cells in the selected mode")]
    DegenerateSelection,
    #[error("grid step must satisfy 0 < step <= {max}, got {got}")]
    BadStep { got: f64, max: f64 },
    #[error("valley fill requires nonempty input")]
    EmptyInput,
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// First and second central moments of a cell's LLR under θ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrMoments {
    pub mean: f64,
    pub var: f64,
}

/// Ziv-Zakai bound output: the variance, its RMSE forms, the sampled
/// `max_φ₁ Pmin(z₁)` profile, and the grids that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZzbResult {
    pub variance_s2: f64,
    pub rmse_s: f64,
    pub rmse_m: f64,
    /// (z₁ in samples, max over φ₁ of Pmin), on the integration grid,
    /// before valley-filling.
    pub pmin_profile: Vec<(f64, f64)>,
    pub z_step: f64,
    pub phi_step: f64,
}

/// Grid and quadrature resolution for [`zzb_variance`]. Every field has a
/// default, so JSON configs may set only the knobs they care about.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZzbSettings {
    /// z₁ grid step in samples.
    #[serde(default = "default_z_step")]
    pub z_step: f64,
    /// φ₁ grid step in radians.
    #[serde(default = "default_phi_step")]
    pub phi_step: f64,
    /// Gauss-Hermite order per real dimension for data-cell moments.
    #[serde(default = "default_gh_order")]
    pub gh_order: usize,
    /// Densify the z₁ grid near the origin when the LLR curvature implies a
    /// mainlobe narrower than the uniform step.
    #[serde(default = "default_mainlobe")]
    pub mainlobe_refinement: bool,
}

fn default_z_step() -> f64 {
    1.0 / 16.0
}
fn default_phi_step() -> f64 {
    PI / 12.0
}
fn default_gh_order() -> usize {
    20
}
fn default_mainlobe() -> bool {
    true
}

impl Default for ZzbSettings {
    fn default() -> Self {
        ZzbSettings {
            z_step: default_z_step(),
            phi_step: default_phi_step(), // 15°
            gh_order: default_gh_order(),
            mainlobe_refinement: default_mainlobe(),
        }
    }
}

fn offset_angle(z1: f64, offset: i32, subcarriers: usize, phi1: f64) -> f64 {
    TAU * z1 * offset as f64 / subcarriers as f64 + phi1
}

fn cell_gamma(cell: &Cell, chan: &ChannelRealization, noise_power: f64) -> f64 {
    chan.power(cell.symbol, cell.subcarrier) * cell.weight * cell.weight / noise_power
}

/// Pilot-cell LLR moments: `mean = 2γ|c|²(1−cos Δ)`, `var = 2·mean`.
pub fn llr_moments_pilot(
    cell: &Cell,
    chan: &ChannelRealization,
    noise_power: f64,
    params: &OfdmParams,
    theta1: &ThetaParams,
) -> Result<LlrMoments, ZzbError> {
    let CellState::Pilot(c) = cell.state else {
        return Err(ZzbError::NotAPilotCell);
    };
    if !(noise_power > 0.0) {
        return Err(ZzbError::Bounds(BoundsError::BadNoisePower(noise_power)));
    }
    let gamma_csq = cell_gamma(cell, chan, noise_power) * c.norm_sqr();
    let delta =
        offset_angle(theta1.delay_samples, cell.offset, params.subcarriers, theta1.phase_rad);
    let mean = 2.0 * gamma_csq * (1.0 - delta.cos());
    Ok(LlrMoments { mean, var: 2.0 * mean })
}

// ── Mixture log-normalizer T₀ ───────────────────────────────────────────────

/// Evaluates `T₀(u) = LSE_c[γ(2Re{u*c} − |c|²)]`, with a separable per-axis
/// path for cross-product constellations. Shared with the grid-scan
/// estimators, whose data log-likelihood is the same log-normalizer.
pub(crate) enum MixtureKernel {
    /// Symbols form {a + jb : a ∈ re, b ∈ im}; per-axis log-sum-exp.
    Separable { re_levels: Vec<f64>, im_levels: Vec<f64> },
    General { symbols: Vec<Complex64> },
}

impl MixtureKernel {
    pub(crate) fn new(constellation: &Constellation) -> Self {
        match constellation.separable_axes() {
            Some((re_levels, im_levels)) => MixtureKernel::Separable { re_levels, im_levels },
            None => MixtureKernel::General { symbols: constellation.symbols().to_vec() },
        }
    }

    #[inline]
    fn axis_lse(gamma: f64, x: f64, levels: &[f64]) -> f64 {
        // Symmetric two-level axis {−s, +s}: LSE = log(2cosh(2γxs)) − γs².
        if levels.len() == 2 && levels[0] == -levels[1] {
            let s = levels[1];
            return crate::numeric::log2cosh(2.0 * gamma * x * s) - gamma * s * s;
        }
        let mut max = f64::NEG_INFINITY;
        let mut logits = [0.0f64; 16];
        debug_assert!(levels.len() <= 16);
        for (i, &a) in levels.iter().enumerate() {
            logits[i] = gamma * (2.0 * x * a - a * a);
            if logits[i] > max {
                max = logits[i];
            }
        }
        let mut sum = 0.0;
        for &t in &logits[..levels.len()] {
            sum += (t - max).exp();
        }
        max + sum.ln()
    }

    #[inline]
    pub(crate) fn t0(&self, gamma: f64, u: Complex64) -> f64 {
        match self {
            MixtureKernel::Separable { re_levels, im_levels } => {
                Self::axis_lse(gamma, u.re, re_levels) + Self::axis_lse(gamma, u.im, im_levels)
            }
            MixtureKernel::General { symbols } => {
                let mut max = f64::NEG_INFINITY;
                let mut logits = [0.0f64; 64];
                debug_assert!(symbols.len() <= 64);
                for (i, c) in symbols.iter().enumerate() {
                    logits[i] = gamma * (2.0 * (u.re * c.re + u.im * c.im) - c.norm_sqr());
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
}

/// Precomputed quadrature field for one γ: normalized observations
/// `ȳ = c₀ + √(1/γ)·node` for every (true symbol, node) pair, their
/// unrotated `T₀(ȳ)` values, and the combined weights (tensor Gauss-Hermite
/// weight × uniform symbol prior).
struct GammaField {
    gamma: f64,
    ybars: Vec<Complex64>,
    t0s: Vec<f64>,
    weights: Vec<f64>,
}

impl GammaField {
    fn new(gamma: f64, kernel: &MixtureKernel, symbols: &[Complex64], rule: &GaussHermiteRule) -> Self {
        let scale = (1.0 / gamma).sqrt();
        let n = rule.order();
        let nodes = rule.nodes();
        let w = rule.weights();
        let count = symbols.len() * n * n;
        let mut ybars = Vec::with_capacity(count);
        let mut t0s = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        let prior = 1.0 / symbols.len() as f64;
        for &c0 in symbols {
            for i in 0..n {
                for j in 0..n {
                    let ybar = c0 + Complex64::new(scale * nodes[i], scale * nodes[j]);
                    ybars.push(ybar);
                    t0s.push(kernel.t0(gamma, ybar));
                    weights.push(w[i] * w[j] * prior);
                }
            }
        }
        GammaField { gamma, ybars, t0s, weights }
    }

    /// LLR moments at offset angle Δ: `logΛ = T₀(ȳ) − T₀(ȳ·e^{−jΔ})`.
    fn moments(&self, delta: f64, kernel: &MixtureKernel) -> LlrMoments {
        let rot = Complex64::from_polar(1.0, -delta);
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for idx in 0..self.ybars.len() {
            let l = self.t0s[idx] - kernel.t0(self.gamma, self.ybars[idx] * rot);
            let wl = self.weights[idx] * l;
            mean += wl;
            m2 += wl * l;
        }
        LlrMoments { mean, var: (m2 - mean * mean).max(0.0) }
    }
}

/// Data-cell LLR moments by Gauss-Hermite quadrature.
pub fn llr_moments_data(
    cell: &Cell,
    chan: &ChannelRealization,
    noise_power: f64,
    params: &OfdmParams,
    constellation: &Constellation,
    theta1: &ThetaParams,
    rule: &GaussHermiteRule,
) -> Result<LlrMoments, ZzbError> {
    if !matches!(cell.state, CellState::Data) {
        return Err(ZzbError::NotADataCell);
    }
    if !(noise_power > 0.0) {
        return Err(ZzbError::Bounds(BoundsError::BadNoisePower(noise_power)));
    }
    let gamma = cell_gamma(cell, chan, noise_power);
    let delta =
        offset_angle(theta1.delay_samples, cell.offset, params.subcarriers, theta1.phase_rad);
    let kernel = MixtureKernel::new(constellation);
    let field = GammaField::new(gamma, &kernel, constellation.symbols(), rule);
    Ok(field.moments(delta, &kernel))
}

/// Minimum error probability for distinguishing θ₀ from θ₀ + θ₁ using the
/// selected cells: Gaussian approximation `Q(Σmean/√Σvar)`, exactly 0.5 when
/// the summed variance vanishes (coinciding hypotheses).
pub fn pmin(
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    constellation: &Constellation,
    noise_power: f64,
    selection: ResourceSelection,
    theta1: &ThetaParams,
    rule: &GaussHermiteRule,
) -> Result<f64, ZzbError> {
    let mut any = false;
    let mut mean = 0.0;
    let mut var = 0.0;
    for cell in grid.selected_cells(selection) {
        any = true;
        let m = match cell.state {
            CellState::Pilot(_) => {
                llr_moments_pilot(&cell, chan, noise_power, grid.params(), theta1)?
            }
            CellState::Data => llr_moments_data(
                &cell,
                chan,
                noise_power,
                grid.params(),
                constellation,
                theta1,
                rule,
            )?,
            CellState::Empty => unreachable!("selection excludes empty cells"),
        };
        mean += m.mean;
        var += m.var;
    }
    if !any {
        return Err(ZzbError::DegenerateSelection);
    }
    Ok(pmin_from_sums(mean, var))
}

fn pmin_from_sums(mean: f64, var: f64) -> f64 {
    // A vanishing summed variance means the hypotheses coincide (Pmin = ½).
    // The floor also absorbs pure-roundoff LLRs at exact constellation
    // symmetries, and a roundoff-negative mean is capped the same way since
    // the true error probability never exceeds ½.
    if var <= 1e-18 || mean <= 0.0 {
        0.5
    } else {
        q_function(mean / var.sqrt())
    }
}

/// Replaces each sample by the maximum over all samples at its index or
/// later (reverse running maximum). Output is non-increasing.
pub fn valley_fill(samples: &[f64]) -> Result<Vec<f64>, ZzbError> {
    if samples.is_empty() {
        return Err(ZzbError::EmptyInput);
    }
    let mut out = samples.to_vec();
    for i in (0..out.len() - 1).rev() {
        if out[i + 1] > out[i] {
            out[i] = out[i + 1];
        }
    }
    Ok(out)
}

// ── The bound itself ────────────────────────────────────────────────────────

/// Canonicalizes an offset angle using the constellation's symmetries:
/// `T₀` is invariant under symbol-set rotation by 2π/R, making the moments
/// 2π/R-periodic in Δ, and conjugation closure gives `moments(Δ) =
/// moments(−Δ)`.
fn canonical_delta(delta: f64, period: f64, conj_closed: bool) -> f64 {
    let mut d = delta.rem_euclid(period);
    if conj_closed {
        d = d.min(period - d);
    }
    d
}

fn is_conj_closed(symbols: &[Complex64]) -> bool {
    symbols.iter().all(|c| {
        symbols
            .iter()
            .any(|s| (s.re - c.re).abs() <= 1e-12 && (s.im + c.im).abs() <= 1e-12)
    })
}

/// Computes the ZZB over a (z₁, φ₁) grid.
///
/// For each z₁, `Pmin` is maximized over the φ₁ grid; the envelope
/// `(N_a−z₁)·maxPmin` is valley-filled, multiplied by z₁, integrated by
/// trapezoid, and scaled by `T_s²/N_a`.
pub fn zzb_variance(
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    constellation: &Constellation,
    noise_power: f64,
    selection: ResourceSelection,
    settings: &ZzbSettings,
) -> Result<ZzbResult, ZzbError> {
    let params = grid.params();
    let n_a = params.window_samples();
    if !(settings.z_step > 0.0 && settings.z_step <= n_a) {
        return Err(ZzbError::BadStep { got: settings.z_step, max: n_a });
    }
    if !(settings.phi_step > 0.0 && settings.phi_step <= TAU) {
        return Err(ZzbError::BadStep { got: settings.phi_step, max: TAU });
    }
    let rule = GaussHermiteRule::new(settings.gh_order)?;

    let cells = snr_cells(grid, chan, noise_power, selection)?;
    if cells.is_empty() {
        return Err(ZzbError::DegenerateSelection);
    }

    // Group pilot cells by frequency offset (their moments share the cosine
    // term) and data cells by (γ, offset).
    let mut pilot_groups: BTreeMap<i32, f64> = BTreeMap::new();
    let mut data_groups: BTreeMap<(u64, i32), f64> = BTreeMap::new();
    for c in &cells {
        match c.pilot_symbol {
            Some(sym) => {
                *pilot_groups.entry(c.offset).or_insert(0.0) += c.gamma * sym.norm_sqr();
            }
            None => {
                *data_groups.entry((c.gamma.to_bits(), c.offset)).or_insert(0.0) += 1.0;
            }
        }
    }

    let z_points = build_z_grid(n_a, settings, &cells, params.subcarriers);
    let sym_rotation = constellation.rotational_symmetry();
    let conj_closed = is_conj_closed(constellation.symbols());
    let delta_period = TAU / sym_rotation as f64;

    // With no pilot cells the whole Pmin is 2π/R-periodic in φ₁, so the φ₁
    // scan only needs one period.
    let phi_span = if pilot_groups.is_empty() { delta_period } else { TAU };
    let n_phi = (phi_span / settings.phi_step).ceil().max(1.0) as usize;
    let phis: Vec<f64> = (0..n_phi).map(|j| j as f64 * settings.phi_step).collect();

    // Evaluate every distinct (γ, canonical Δ) data moment once, in
    // parallel over γ groups.
    let moment_table: HashMap<(u64, u64), LlrMoments> = if data_groups.is_empty() {
        HashMap::new()
    } else {
        let mut keys: BTreeSet<(u64, u64)> = BTreeSet::new();
        for &z1 in &z_points {
            for &phi1 in &phis {
                for &(gamma_bits, offset) in data_groups.keys() {
                    let delta = offset_angle(z1, offset, params.subcarriers, phi1);
                    keys.insert((
                        gamma_bits,
                        canonical_delta(delta, delta_period, conj_closed).to_bits(),
                    ));
                }
            }
        }
        let mut by_gamma: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for (g, d) in keys {
            by_gamma.entry(g).or_default().push(d);
        }
        let gamma_jobs: Vec<(u64, Vec<u64>)> = by_gamma.into_iter().collect();
        let kernel = MixtureKernel::new(constellation);
        let symbols = constellation.symbols();
        let chunks = exec::map_indexed(gamma_jobs.len(), |gi| {
            let (gamma_bits, deltas) = &gamma_jobs[gi];
            let field = GammaField::new(f64::from_bits(*gamma_bits), &kernel, symbols, &rule);
            deltas
                .iter()
                .map(|&db| ((*gamma_bits, db), field.moments(f64::from_bits(db), &kernel)))
                .collect::<Vec<_>>()
        });
        chunks.into_iter().flatten().collect()
    };

    // Scan the (z₁, φ₁) grid: closed-form pilot moments plus table lookups.
    let pilot_vec: Vec<(i32, f64)> = pilot_groups.into_iter().collect();
    let data_vec: Vec<(u64, i32, f64)> =
        data_groups.into_iter().map(|((g, d), n)| (g, d, n)).collect();
    let profile: Vec<f64> = exec::map_indexed(z_points.len(), |zi| {
        let z1 = z_points[zi];
        let mut best = 0.0f64;
        for &phi1 in &phis {
            let mut mean = 0.0;
            let mut var = 0.0;
            for &(offset, gamma_csq) in &pilot_vec {
                let delta = offset_angle(z1, offset, params.subcarriers, phi1);
                let m = 2.0 * gamma_csq * (1.0 - delta.cos());
                mean += m;
                var += 2.0 * m;
            }
            for &(gamma_bits, offset, count) in &data_vec {
                let delta = offset_angle(z1, offset, params.subcarriers, phi1);
                let key =
                    (gamma_bits, canonical_delta(delta, delta_period, conj_closed).to_bits());
                let m = moment_table[&key];
                mean += count * m.mean;
                var += count * m.var;
            }
            let p = pmin_from_sums(mean, var);
            if p > best {
                best = p;
            }
        }
        best
    });

    // (N_a − z₁)·maxPmin → valley fill → ×z₁ → trapezoid → ×T_s²/N_a.
    let envelope: Vec<f64> =
        z_points.iter().zip(&profile).map(|(&z1, &p)| (n_a - z1) * p).collect();
    let filled = valley_fill(&envelope)?;
    let mut integral = 0.0;
    for i in 0..z_points.len() - 1 {
        let (z0, z1) = (z_points[i], z_points[i + 1]);
        integral += (z1 - z0) * (z0 * filled[i] + z1 * filled[i + 1]) / 2.0;
    }
    let t_s = params.sample_period_s();
    let variance_s2 = t_s * t_s / n_a * integral;
    let rmse_s = variance_s2.sqrt();
    Ok(ZzbResult {
        variance_s2,
        rmse_s,
        rmse_m: SPEED_OF_LIGHT_M_S * rmse_s,
        pmin_profile: z_points.iter().copied().zip(profile).collect(),
        z_step: settings.z_step,
        phi_step: settings.phi_step,
    })
}

/// Uniform z₁ grid over [0, N_a], densified near the origin when the
/// aggregate LLR curvature `A₂ = Σ γ_eff·(2πd/K)²` implies a mainlobe
/// (`Pmin ≈ Q(z₁√(A₂/2))` decaying by z₁ ≈ 8√2/√A₂) narrower than the
/// uniform sampling can resolve.
fn build_z_grid(n_a: f64, settings: &ZzbSettings, cells: &[SnrCell], subcarriers: usize) -> Vec<f64> {
    let n_coarse = (n_a / settings.z_step).floor() as usize;
    let mut z: Vec<f64> = (0..=n_coarse).map(|i| i as f64 * settings.z_step).collect();
    if z.last().copied().unwrap_or(0.0) < n_a - 1e-12 {
        z.push(n_a);
    }
    if settings.mainlobe_refinement {
        let a2: f64 = cells
            .iter()
            .map(|c| {
                let sym_power = c.pilot_symbol.map_or(1.0, |s| s.norm_sqr());
                c.gamma * sym_power * (TAU * c.offset as f64 / subcarriers as f64).powi(2)
            })
            .sum();
        if a2 > 0.0 {
            let z_knee = 8.0 * 2.0f64.sqrt() / a2.sqrt();
            if z_knee < 0.75 * n_a {
                const DENSE: usize = 64;
                for j in 1..=DENSE {
                    z.push(j as f64 * z_knee / DENSE as f64);
                }
                z.sort_by(f64::total_cmp);
                z.dedup();
            }
        }
    }
    z
}
