//! OFDM resource grid: subcarrier/symbol layout, pilot vs data cells,
//! constellations, frequency index mapping, and payload generation.
//!
//! Subcarrier index `k ∈ {0..K−1}` maps to a signed frequency offset
//! `d[k] = k` for `k < K/2` and `k − K` otherwise, so the grid spans
//! `{−K/2..K/2−1}` subcarrier spacings around the carrier. Delays are
//! normalized to samples, `z = τ/T_s` with `T_s = 1/(K·Δ_f)`, and the
//! delay/phase pair θ = (z, φ) enters every likelihood through the
//! unit-modulus ramp `ν_k(θ) = exp(−j2πz·d[k]/K + jφ)`.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("subcarrier count must be even and >= 2, got {0}")]
    BadSubcarrierCount(usize),
    #[error("symbol count must be >= 1")]
    BadSymbolCount,
    #[error("subcarrier spacing must be > 0, got {0}")]
    BadSubcarrierSpacing(f64),
    #[error("TOA window must be > 0, got {0}")]
    BadWindow(f64),
    #[error("subcarrier index {k} out of range for {subcarriers} subcarriers")]
    IndexOutOfRange { k: usize, subcarriers: usize },
    #[error("symbol index {m} out of range for {n_symbols} symbols")]
    SymbolOutOfRange { m: usize, n_symbols: usize },
    #[error("constellation must be nonempty")]
    EmptyConstellation,
    #[error("constellation mean power is {0}, expected 1 within 1e-12")]
    NonUnitPower(f64),
    #[error("unknown constellation name: {0}")]
    UnknownConstellation(String),
    #[error("cell runs for symbol {symbol} cover {got} subcarriers, expected {expected}")]
    RunLengthMismatch { symbol: usize, expected: usize, got: usize },
    #[error("unknown cell state in runs: {0} (expected pilot|data|empty)")]
    UnknownCellState(String),
    #[error("cells list has {got} entries; expected 1 (broadcast) or n_symbols = {expected}")]
    BadCellsLength { expected: usize, got: usize },
    #[error("pilot symbol table has {got} entries, grid has {expected} pilot cells")]
    PilotTableSize { expected: usize, got: usize },
    #[error("cell weight must be > 0, got {0}")]
    BadWeight(f64),
}

// ── OFDM numerology ─────────────────────────────────────────────────────────

/// OFDM numerology plus the a-priori TOA window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmParams {
    /// Subcarrier count K (even, ≥ 2).
    pub subcarriers: usize,
    /// OFDM symbol count.
    pub n_symbols: usize,
    /// Subcarrier spacing Δ_f in Hz.
    pub delta_f_hz: f64,
    /// A-priori TOA window T_a in seconds (delays uniform on [0, T_a]).
    pub toa_window_s: f64,
}

impl OfdmParams {
    pub fn new(
        subcarriers: usize,
        n_symbols: usize,
        delta_f_hz: f64,
        toa_window_s: f64,
    ) -> Result<Self, GridError> {
        if subcarriers < 2 || subcarriers % 2 != 0 {
            return Err(GridError::BadSubcarrierCount(subcarriers));
        }
        if n_symbols == 0 {
            return Err(GridError::BadSymbolCount);
        }
        if !(delta_f_hz > 0.0) {
            return Err(GridError::BadSubcarrierSpacing(delta_f_hz));
        }
        if !(toa_window_s > 0.0) {
            return Err(GridError::BadWindow(toa_window_s));
        }
        Ok(Self { subcarriers, n_symbols, delta_f_hz, toa_window_s })
    }

    /// Sampling period T_s = 1/(K·Δ_f) in seconds.
    pub fn sample_period_s(&self) -> f64 {
        1.0 / (self.subcarriers as f64 * self.delta_f_hz)
    }

    /// Window length in samples, N_a = T_a/T_s, computed as T_a·K·Δ_f so
    /// that T_s·K·Δ_f = 1 holds exactly in the model's own arithmetic.
    pub fn window_samples(&self) -> f64 {
        self.toa_window_s * self.subcarriers as f64 * self.delta_f_hz
    }

    pub fn n_cells(&self) -> usize {
        self.subcarriers * self.n_symbols
    }
}

/// Maps subcarrier index `k` to its signed frequency offset `d[k]`.
pub fn freq_index_map(k: usize, subcarriers: usize) -> Result<i32, GridError> {
    if k >= subcarriers {
        return Err(GridError::IndexOutOfRange { k, subcarriers });
    }
    let k = k as i64;
    let big_k = subcarriers as i64;
    Ok(if k < big_k / 2 { k as i32 } else { (k - big_k) as i32 })
}

// ── Delay/phase parameter ───────────────────────────────────────────────────

/// The estimand: normalized delay `z = τ/T_s` (samples) and carrier phase
/// `φ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub delay_samples: f64,
    pub phase_rad: f64,
}

impl ThetaParams {
    /// Stores the phase modulo 2π.
    pub fn new(delay_samples: f64, phase_rad: f64) -> Self {
        Self { delay_samples, phase_rad: phase_rad.rem_euclid(TAU) }
    }
}

/// The unit-modulus ramp `ν_k(θ) = exp(−j2πz·d[k]/K + jφ)`.
pub fn phase_ramp(theta: &ThetaParams, k: usize, params: &OfdmParams) -> Result<Complex64, GridError> {
    let d = freq_index_map(k, params.subcarriers)?;
    Ok(phase_ramp_offset(theta, d, params.subcarriers))
}

/// [`phase_ramp`] with a precomputed frequency offset.
pub fn phase_ramp_offset(theta: &ThetaParams, offset: i32, subcarriers: usize) -> Complex64 {
    let angle =
        -TAU * theta.delay_samples * offset as f64 / subcarriers as f64 + theta.phase_rad;
    Complex64::from_polar(1.0, angle)
}

// ── Constellations ──────────────────────────────────────────────────────────

/// A finite unit-average-power symbol set with uniform prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    name: String,
    symbols: Vec<Complex64>,
}

impl Constellation {
    /// Validates unit average power (within 1e-12) and non-emptiness.
    pub fn new(name: impl Into<String>, symbols: Vec<Complex64>) -> Result<Self, GridError> {
        if symbols.is_empty() {
            return Err(GridError::EmptyConstellation);
        }
        let power: f64 = symbols.iter().map(|c| c.norm_sqr()).sum::<f64>() / symbols.len() as f64;
        if (power - 1.0).abs() > 1e-12 {
            return Err(GridError::NonUnitPower(power));
        }
        Ok(Self { name: name.into(), symbols })
    }

    /// QPSK at (±1±j)/√2.
    pub fn qpsk() -> Self {
        let l = FRAC_1_SQRT_2;
        let symbols = [(l, l), (l, -l), (-l, l), (-l, -l)]
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect();
        Self { name: "qpsk".into(), symbols }
    }

    /// 16QAM on the {±1,±3}² lattice scaled by 1/√10.
    pub fn qam16() -> Self {
        let s = 10.0f64.sqrt();
        let levels = [-3.0, -1.0, 1.0, 3.0];
        let mut symbols = Vec::with_capacity(16);
        for &a in &levels {
            for &b in &levels {
                symbols.push(Complex64::new(a / s, b / s));
            }
        }
        Self { name: "16qam".into(), symbols }
    }

    pub fn by_name(name: &str) -> Result<Self, GridError> {
        match name.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Self::qpsk()),
            "16qam" | "qam16" => Ok(Self::qam16()),
            other => Err(GridError::UnknownConstellation(other.into())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    /// For square/cross-product constellations, the distinct I and Q levels
    /// such that the symbol set is exactly {a + jb}. Enables separable
    /// (per-axis) log-sum-exp evaluation.
    pub fn separable_axes(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        const TOL: f64 = 1e-12;
        let mut re: Vec<f64> = Vec::new();
        let mut im: Vec<f64> = Vec::new();
        for c in &self.symbols {
            if !re.iter().any(|&x| (x - c.re).abs() <= TOL) {
                re.push(c.re);
            }
            if !im.iter().any(|&x| (x - c.im).abs() <= TOL) {
                im.push(c.im);
            }
        }
        if re.len() * im.len() != self.symbols.len() {
            return None;
        }
        for &a in &re {
            for &b in &im {
                if !self
                    .symbols
                    .iter()
                    .any(|c| (c.re - a).abs() <= TOL && (c.im - b).abs() <= TOL)
                {
                    return None;
                }
            }
        }
        re.sort_by(f64::total_cmp);
        im.sort_by(f64::total_cmp);
        Some((re, im))
    }

    /// Order of the rotational symmetry group {1, j, −1, −j} under which the
    /// symbol set is invariant: 4, 2, or 1.
    pub fn rotational_symmetry(&self) -> usize {
        let rotated_matches = |rot: Complex64| {
            self.symbols.iter().all(|c| {
                let r = c * rot;
                self.symbols
                    .iter()
                    .any(|s| (s.re - r.re).abs() <= 1e-12 && (s.im - r.im).abs() <= 1e-12)
            })
        };
        if rotated_matches(Complex64::new(0.0, 1.0)) {
            4
        } else if rotated_matches(Complex64::new(-1.0, 0.0)) {
            2
        } else {
            1
        }
    }
}

// ── Resource grid ───────────────────────────────────────────────────────────

/// Allocation state of one (symbol, subcarrier) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellState {
    Empty,
    /// Known symbol transmitted on this cell.
    Pilot(Complex64),
    /// Unknown symbol drawn uniformly from the constellation.
    Data,
}

/// Which cells participate in a likelihood/bound computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceSelection {
    PilotOnly,
    DataOnly,
    PilotPlusData,
}

impl ResourceSelection {
    pub fn includes(self, state: &CellState) -> bool {
        match (self, state) {
            (_, CellState::Empty) => false,
            (ResourceSelection::PilotOnly, CellState::Pilot(_)) => true,
            (ResourceSelection::DataOnly, CellState::Data) => true,
            (ResourceSelection::PilotPlusData, _) => true,
            _ => false,
        }
    }
}

/// One cell with its position, frequency offset, state, and amplitude weight.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub symbol: usize,
    pub subcarrier: usize,
    /// Signed frequency offset d[k].
    pub offset: i32,
    pub state: CellState,
    pub weight: f64,
}

/// Per-(symbol, subcarrier) allocation of pilot/data/empty cells with
/// per-cell amplitude weights (default 1).
#[derive(Debug, Clone)]
pub struct ResourceGrid {
    params: OfdmParams,
    cells: Vec<CellState>,
    weights: Vec<f64>,
}

impl ResourceGrid {
    pub fn new_empty(params: OfdmParams) -> Self {
        let n = params.n_cells();
        Self { params, cells: vec![CellState::Empty; n], weights: vec![1.0; n] }
    }

    /// Every cell a data cell.
    pub fn all_data(params: OfdmParams) -> Self {
        let n = params.n_cells();
        Self { params, cells: vec![CellState::Data; n], weights: vec![1.0; n] }
    }

    pub fn params(&self) -> &OfdmParams {
        &self.params
    }

    fn index(&self, m: usize, k: usize) -> Result<usize, GridError> {
        if m >= self.params.n_symbols {
            return Err(GridError::SymbolOutOfRange { m, n_symbols: self.params.n_symbols });
        }
        if k >= self.params.subcarriers {
            return Err(GridError::IndexOutOfRange { k, subcarriers: self.params.subcarriers });
        }
        Ok(m * self.params.subcarriers + k)
    }

    pub fn cell(&self, m: usize, k: usize) -> Result<CellState, GridError> {
        Ok(self.cells[self.index(m, k)?])
    }

    pub fn set_cell(&mut self, m: usize, k: usize, state: CellState) -> Result<(), GridError> {
        let i = self.index(m, k)?;
        self.cells[i] = state;
        Ok(())
    }

    pub fn weight(&self, m: usize, k: usize) -> Result<f64, GridError> {
        Ok(self.weights[self.index(m, k)?])
    }

    pub fn set_weight(&mut self, m: usize, k: usize, weight: f64) -> Result<(), GridError> {
        if !(weight > 0.0) {
            return Err(GridError::BadWeight(weight));
        }
        let i = self.index(m, k)?;
        self.weights[i] = weight;
        Ok(())
    }

    /// Iterates cells in (symbol-major, subcarrier) scan order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let big_k = self.params.subcarriers;
        self.cells.iter().enumerate().map(move |(i, &state)| {
            let m = i / big_k;
            let k = i % big_k;
            Cell {
                symbol: m,
                subcarrier: k,
                offset: freq_index_map(k, big_k).expect("k < K by construction"),
                state,
                weight: self.weights[i],
            }
        })
    }

    /// Cells selected by `selection`, scan order.
    pub fn selected_cells(&self, selection: ResourceSelection) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(move |c| selection.includes(&c.state))
    }

    pub fn pilot_count(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c, CellState::Pilot(_))).count()
    }

    pub fn data_count(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c, CellState::Data)).count()
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| !matches!(c, CellState::Empty)).count()
    }

    /// A copy of the grid with every data cell relabeled as a pilot carrying
    /// the given symbols (scan order over data cells). Used by the
    /// decision-directed second pass.
    pub fn with_data_relabeled_as_pilots(
        &self,
        symbols: &[Complex64],
    ) -> Result<ResourceGrid, GridError> {
        let expected = self.data_count();
        if symbols.len() != expected {
            return Err(GridError::PilotTableSize { expected, got: symbols.len() });
        }
        let mut out = self.clone();
        let mut next = 0;
        for (i, state) in self.cells.iter().enumerate() {
            if matches!(state, CellState::Data) {
                out.cells[i] = CellState::Pilot(symbols[next]);
                next += 1;
            }
        }
        Ok(out)
    }
}

// ── Payload ─────────────────────────────────────────────────────────────────

/// Realized transmitted values, dense over the grid (zero on empty cells).
/// Values include the per-cell amplitude weight.
#[derive(Debug, Clone)]
pub struct Payload {
    pub n_symbols: usize,
    pub subcarriers: usize,
    pub values: Vec<Complex64>,
}

impl Payload {
    pub fn value(&self, m: usize, k: usize) -> Complex64 {
        self.values[m * self.subcarriers + k]
    }
}

/// Draws data symbols i.i.d. uniformly from the constellation; pilots keep
/// their fixed symbols. Deterministic in (grid, seed): cells are visited in
/// scan order with a counter-based RNG.
pub fn generate_payload(grid: &ResourceGrid, constellation: &Constellation, seed: u64) -> Payload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let syms = constellation.symbols();
    let values = grid
        .cells()
        .map(|cell| match cell.state {
            CellState::Empty => Complex64::new(0.0, 0.0),
            CellState::Pilot(c) => c * cell.weight,
            CellState::Data => syms[rng.gen_range(0..syms.len())] * cell.weight,
        })
        .collect();
    Payload {
        n_symbols: grid.params().n_symbols,
        subcarriers: grid.params().subcarriers,
        values,
    }
}

// ── JSON grid specification ─────────────────────────────────────────────────

/// How pilot cells obtain their symbol values.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PilotSymbolSpec {
    /// Unit-modulus QPSK symbols from a seeded sequence, assigned in scan
    /// order.
    SeededQpsk { seed: u64 },
    /// Explicit [re, im] pairs, one per pilot cell in scan order.
    Table { values: Vec<[f64; 2]> },
}

/// Run-length cell map for one OFDM symbol: ordered (state, length) runs
/// covering all K subcarriers. States: "pilot" | "data" | "empty".
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SymbolRuns {
    pub runs: Vec<(String, usize)>,
}

/// JSON-loadable grid description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub subcarriers: usize,
    pub n_symbols: usize,
    pub delta_f_hz: f64,
    pub toa_window_s: f64,
    pub constellation: String,
    /// One entry per symbol, or a single entry broadcast to all symbols.
    pub cells: Vec<SymbolRuns>,
    pub pilot_symbols: PilotSymbolSpec,
}

impl GridSpec {
    /// An all-data grid spec (no pilots).
    pub fn all_data(
        subcarriers: usize,
        n_symbols: usize,
        delta_f_hz: f64,
        toa_window_s: f64,
        constellation: &str,
    ) -> Self {
        Self {
            subcarriers,
            n_symbols,
            delta_f_hz,
            toa_window_s,
            constellation: constellation.into(),
            cells: vec![SymbolRuns { runs: vec![("data".into(), subcarriers)] }],
            pilot_symbols: PilotSymbolSpec::SeededQpsk { seed: 0 },
        }
    }

    pub fn build(&self) -> Result<(ResourceGrid, Constellation), GridError> {
        let params =
            OfdmParams::new(self.subcarriers, self.n_symbols, self.delta_f_hz, self.toa_window_s)?;
        let constellation = Constellation::by_name(&self.constellation)?;
        if self.cells.len() != 1 && self.cells.len() != params.n_symbols {
            return Err(GridError::BadCellsLength {
                expected: params.n_symbols,
                got: self.cells.len(),
            });
        }
        let mut grid = ResourceGrid::new_empty(params);
        let mut pilot_positions = Vec::new();
        for m in 0..params.n_symbols {
            let runs = if self.cells.len() == 1 { &self.cells[0] } else { &self.cells[m] };
            let mut k = 0usize;
            for (state, len) in &runs.runs {
                for _ in 0..*len {
                    if k >= params.subcarriers {
                        return Err(GridError::RunLengthMismatch {
                            symbol: m,
                            expected: params.subcarriers,
                            got: k + 1,
                        });
                    }
                    let cell = match state.as_str() {
                        "pilot" => {
                            pilot_positions.push((m, k));
                            // Placeholder symbol; assigned below.
                            CellState::Pilot(Complex64::new(1.0, 0.0))
                        }
                        "data" => CellState::Data,
                        "empty" => CellState::Empty,
                        other => return Err(GridError::UnknownCellState(other.into())),
                    };
                    grid.set_cell(m, k, cell)?;
                    k += 1;
                }
            }
            if k != params.subcarriers {
                return Err(GridError::RunLengthMismatch {
                    symbol: m,
                    expected: params.subcarriers,
                    got: k,
                });
            }
        }
        assign_pilot_symbols(&mut grid, &pilot_positions, &self.pilot_symbols)?;
        Ok((grid, constellation))
    }
}

/// Assigns pilot symbol values to the given positions (scan order).
pub fn assign_pilot_symbols(
    grid: &mut ResourceGrid,
    positions: &[(usize, usize)],
    spec: &PilotSymbolSpec,
) -> Result<(), GridError> {
    match spec {
        PilotSymbolSpec::SeededQpsk { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let qpsk = Constellation::qpsk();
            for &(m, k) in positions {
                let c = qpsk.symbols()[rng.gen_range(0..4)];
                grid.set_cell(m, k, CellState::Pilot(c))?;
            }
        }
        PilotSymbolSpec::Table { values } => {
            if values.len() != positions.len() {
                return Err(GridError::PilotTableSize {
                    expected: positions.len(),
                    got: values.len(),
                });
            }
            for (&(m, k), v) in positions.iter().zip(values) {
                grid.set_cell(m, k, CellState::Pilot(Complex64::new(v[0], v[1])))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn freq_index_map_reference_points() {
        assert_eq!(freq_index_map(0, 64).unwrap(), 0);
        assert_eq!(freq_index_map(31, 64).unwrap(), 31);
        assert_eq!(freq_index_map(32, 64).unwrap(), -32);
        assert_eq!(freq_index_map(63, 64).unwrap(), -1);
        assert!(freq_index_map(64, 64).is_err());
    }

    #[test]
    fn freq_index_map_is_a_bijection_onto_signed_range() {
        for big_k in [2usize, 4, 64, 240] {
            let image: HashSet<i32> =
                (0..big_k).map(|k| freq_index_map(k, big_k).unwrap()).collect();
            assert_eq!(image.len(), big_k);
            let lo = -(big_k as i32) / 2;
            let hi = big_k as i32 / 2 - 1;
            assert!(image.iter().all(|&d| d >= lo && d <= hi));
        }
    }

    #[test]
    fn phase_ramp_reference_points() {
        let params = OfdmParams::new(64, 1, 15e3, 6.25e-6).unwrap();
        let one = phase_ramp(&ThetaParams::new(0.0, 0.0), 17, &params).unwrap();
        assert_relative_eq!(one.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(one.im, 0.0, epsilon = 1e-15);

        let minus = phase_ramp(&ThetaParams::new(0.0, std::f64::consts::PI), 3, &params).unwrap();
        assert_relative_eq!(minus.re, -1.0, epsilon = 1e-12);
        assert!(minus.im.abs() < 1e-12);

        // θ = (K/(2 d[k]), 0) lands on −1 for that k: take k=1 (d=1), z=32.
        let half = phase_ramp(&ThetaParams::new(32.0, 0.0), 1, &params).unwrap();
        assert_relative_eq!(half.re, -1.0, epsilon = 1e-12);
        assert!(half.im.abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn phase_ramp_is_unit_modulus(z in -100.0..100.0f64, phi in 0.0..TAU, k in 0usize..240) {
            let params = OfdmParams::new(240, 1, 240e3, 1.5625e-7).unwrap();
            let v = phase_ramp(&ThetaParams::new(z, phi), k, &params).unwrap();
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_phase_stored_modulo_two_pi() {
        let t = ThetaParams::new(1.0, -0.5);
        assert!(t.phase_rad >= 0.0 && t.phase_rad < TAU);
        assert_relative_eq!(t.phase_rad, TAU - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn builtin_constellations_have_unit_power() {
        for c in [Constellation::qpsk(), Constellation::qam16()] {
            let p: f64 =
                c.symbols().iter().map(|s| s.norm_sqr()).sum::<f64>() / c.symbols().len() as f64;
            assert!((p - 1.0).abs() < 1e-12, "{}: {}", c.name(), p);
        }
        assert!(Constellation::new("bad", vec![Complex64::new(2.0, 0.0)]).is_err());
    }

    #[test]
    fn separable_axes_detects_square_sets() {
        let (re, im) = Constellation::qpsk().separable_axes().unwrap();
        assert_eq!(re.len(), 2);
        assert_eq!(im.len(), 2);
        let (re16, im16) = Constellation::qam16().separable_axes().unwrap();
        assert_eq!(re16.len(), 4);
        assert_eq!(im16.len(), 4);
        // 8PSK is not a cross product.
        let octo: Vec<Complex64> =
            (0..8).map(|i| Complex64::from_polar(1.0, TAU * i as f64 / 8.0)).collect();
        let c = Constellation::new("8psk", octo).unwrap();
        assert!(c.separable_axes().is_none());
        assert_eq!(c.rotational_symmetry(), 4);
        assert_eq!(Constellation::qpsk().rotational_symmetry(), 4);
        assert_eq!(Constellation::qam16().rotational_symmetry(), 4);
    }

    #[test]
    fn window_samples_consistency() {
        let params = OfdmParams::new(64, 1, 15e3, 6.25e-6).unwrap();
        assert_relative_eq!(params.sample_period_s(), 1.0 / 960e3, max_relative = 1e-15);
        assert_relative_eq!(params.window_samples(), 6.0, max_relative = 1e-12);
        let prs = OfdmParams::new(240, 4, 240e3, 1.5625e-7).unwrap();
        assert_relative_eq!(prs.window_samples(), 9.0, max_relative = 1e-12);
    }

    #[test]
    fn payload_pilots_only_grid_is_exact() {
        let params = OfdmParams::new(4, 1, 15e3, 1e-6).unwrap();
        let mut grid = ResourceGrid::new_empty(params);
        let sym = Complex64::new(0.6, -0.8);
        grid.set_cell(0, 1, CellState::Pilot(sym)).unwrap();
        let payload = generate_payload(&grid, &Constellation::qpsk(), 7);
        assert_eq!(payload.value(0, 1), sym);
        assert_eq!(payload.value(0, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn payload_is_deterministic_and_uniform() {
        let params = OfdmParams::new(64, 1, 15e3, 6.25e-6).unwrap();
        let grid = ResourceGrid::all_data(params);
        let qpsk = Constellation::qpsk();
        let a = generate_payload(&grid, &qpsk, 123);
        let b = generate_payload(&grid, &qpsk, 123);
        assert_eq!(a.values, b.values);

        // 10⁵ draws → each symbol frequency 0.25 ± 0.01.
        let mut counts = [0usize; 4];
        let draws = 100_000 / 64 + 1;
        for seed in 0..draws {
            let p = generate_payload(&grid, &qpsk, 1000 + seed as u64);
            for v in &p.values {
                let idx = qpsk
                    .symbols()
                    .iter()
                    .position(|s| (s - v).norm() < 1e-12)
                    .expect("payload symbol in constellation");
                counts[idx] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        for &n in &counts {
            let freq = n as f64 / total as f64;
            assert!((freq - 0.25).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn grid_spec_round_trip_and_errors() {
        let spec = GridSpec {
            subcarriers: 8,
            n_symbols: 2,
            delta_f_hz: 15e3,
            toa_window_s: 1e-6,
            constellation: "qpsk".into(),
            cells: vec![SymbolRuns {
                runs: vec![("pilot".into(), 2), ("data".into(), 4), ("empty".into(), 2)],
            }],
            pilot_symbols: PilotSymbolSpec::SeededQpsk { seed: 5 },
        };
        let (grid, _) = spec.build().unwrap();
        assert_eq!(grid.pilot_count(), 4); // broadcast over 2 symbols
        assert_eq!(grid.data_count(), 8);
        assert_eq!(grid.occupied_count(), 12);

        let json = serde_json::to_string(&spec).unwrap();
        let back: GridSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);

        let mut bad = spec.clone();
        bad.cells[0].runs[1].1 = 3; // covers 7 of 8 subcarriers
        assert!(matches!(bad.build(), Err(GridError::RunLengthMismatch { .. })));

        let mut bad2 = spec.clone();
        bad2.pilot_symbols = PilotSymbolSpec::Table { values: vec![[1.0, 0.0]] };
        assert!(matches!(bad2.build(), Err(GridError::PilotTableSize { .. })));
    }

    #[test]
    fn relabeling_data_as_pilots() {
        let params = OfdmParams::new(4, 1, 15e3, 1e-6).unwrap();
        let mut grid = ResourceGrid::all_data(params);
        grid.set_cell(0, 0, CellState::Empty).unwrap();
        let syms = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
        ];
        let relabeled = grid.with_data_relabeled_as_pilots(&syms).unwrap();
        assert_eq!(relabeled.pilot_count(), 3);
        assert_eq!(relabeled.data_count(), 0);
        assert_eq!(relabeled.cell(0, 1).unwrap(), CellState::Pilot(syms[0]));
        assert!(grid.with_data_relabeled_as_pilots(&syms[..2]).is_err());
    }
}
