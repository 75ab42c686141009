//! One runner per subcommand: parse + override, compute, emit CSV/JSON
//! outputs, and finish with the run manifest (written last, so a directory
//! containing `manifest.json` holds a complete run).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ofdm_toa::alloc::{layout_to_grid, search_allocations, BlockLayout};
use ofdm_toa::bounds::{crlb_data_exact, crlb_mcrlb, crlb_pilot};
use ofdm_toa::channel::apply_channel;
use ofdm_toa::estimators::estimate_modes;
use ofdm_toa::grid::{generate_payload, OfdmParams, ThetaParams};
use ofdm_toa::leo::{leo_campaign, select_geometry};
use ofdm_toa::montecarlo::{ccdf, percentile, run_sweep, TruthSpec};
use ofdm_toa::numeric::mix_seed;
use ofdm_toa::zzb::zzb_variance;
use ofdm_toa::SPEED_OF_LIGHT_M_S;

use crate::config::{
    parse_config, peek_job, read_config_bytes, sha256_hex, BoundsConfig, EstimateConfig,
    LeoConfig, McConfig, PrsSearchConfig, ZzbConfig,
};
use crate::fail::{runtime, schema, usage, CliError};
use crate::output::{int, sig, sig_opt, write_atomic, Csv, RunManifest};

/// Command-line overrides applied on top of the parsed config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub zstep: Option<f64>,
    pub phistep: Option<f64>,
    pub gh_order: Option<usize>,
}

impl Overrides {
    fn warn_unused(&self, job: &str, zstep: bool, phistep: bool, gh: bool) {
        if self.zstep.is_some() && !zstep {
            eprintln!("warning: --zstep has no effect for `{job}`");
        }
        if self.phistep.is_some() && !phistep {
            eprintln!("warning: --phistep has no effect for `{job}`");
        }
        if self.gh_order.is_some() && !gh {
            eprintln!("warning: --gh-order has no effect for `{job}`");
        }
    }
}

/// Prepared output target: directory plus the manifest identity.
struct Emitter {
    out_dir: std::path::PathBuf,
    manifest: RunManifest,
    written: Vec<String>,
}

impl Emitter {
    fn new(
        subcommand: &str,
        config_path: &Path,
        config_bytes: &[u8],
        seed: u64,
        out_dir: &Path,
    ) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir).map_err(|e| {
            usage(format!("cannot create output directory `{}`: {e}", out_dir.display()))
        })?;
        let manifest =
            RunManifest::new(subcommand, config_path, &sha256_hex(config_bytes), seed, out_dir);
        Ok(Emitter { out_dir: out_dir.to_path_buf(), manifest, written: Vec::new() })
    }

    fn hash(&self) -> &str {
        &self.manifest.manifest_hash
    }

    fn csv(&mut self, name: &str, csv: Csv) -> Result<(), CliError> {
        write_atomic(&self.out_dir, name, &csv.finish())?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("serializing `{name}`: {e}")))?;
        text.push('\n');
        write_atomic(&self.out_dir, name, &text)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` and reports the run on stdout.
    fn finish(mut self) -> Result<(), CliError> {
        write_atomic(&self.out_dir, "manifest.json", &self.manifest.to_json())?;
        self.written.push("manifest.json".to_string());
        println!(
            "{}: wrote {} to {}",
            self.manifest.subcommand,
            self.written.join(", "),
            self.out_dir.display()
        );
        Ok(())
    }
}

fn noise_for(nominal_power: f64, snr_db: f64) -> f64 {
    nominal_power * 10f64.powf(-snr_db / 10.0)
}

// ── bounds ──────────────────────────────────────────────────────────────────

pub fn run_bounds(
    config_path: &Path,
    out_dir: &Path,
    ov: Overrides,
) -> Result<(), CliError> {
    let bytes = read_config_bytes(config_path)?;
    let mut cfg: BoundsConfig = parse_config(&bytes)?;
    ov.warn_unused("bounds", false, false, true);
    if let Some(seed) = ov.seed {
        cfg.channel_seed = seed;
    }
    if let Some(gh) = ov.gh_order {
        cfg.gh_order = gh;
    }

    let (grid, constellation) = cfg.grid.build().map_err(|e| runtime("building grid", e))?;
    let params = *grid.params();
    let chan = cfg
        .channel
        .realize(&params, cfg.channel_seed)
        .map_err(|e| runtime("realizing channel", e))?;
    let nominal = cfg.channel.nominal_power();

    let mut emitter = Emitter::new("bounds", config_path, &bytes, cfg.channel_seed, out_dir)?;
    let mut csv =
        Csv::new(emitter.hash(), &["snr_db", "pilot_crlb_rmse_m", "mcrlb_rmse_m", "data_crlb_rmse_m"]);
    for &snr_db in &cfg.snr_db {
        let noise = noise_for(nominal, snr_db);
        let pilot = if grid.pilot_count() > 0 {
            Some(crlb_pilot(&grid, &chan, noise).map_err(|e| runtime("pilot CRLB", e))?.rmse_m)
        } else {
            None
        };
        let (mcrlb, data) = if grid.data_count() > 0 {
            let m = crlb_mcrlb(&grid, &chan, noise).map_err(|e| runtime("modified CRLB", e))?;
            let d = crlb_data_exact(&grid, &chan, &constellation, noise, cfg.gh_order)
                .map_err(|e| runtime("exact data CRLB", e))?;
            if let Some(w) = &d.warning {
                eprintln!("warning: data CRLB at {snr_db} dB: {w}");
            }
            (Some(m.rmse_m), Some(d.rmse_m))
        } else {
            (None, None)
        };
        csv.row(&[sig(snr_db), sig_opt(pilot), sig_opt(mcrlb), sig_opt(data)]);
    }
    emitter.csv("bounds.csv", csv)?;
    emitter.finish()
}

// ── zzb ─────────────────────────────────────────────────────────────────────

pub fn run_zzb(config_path: &Path, out_dir: &Path, ov: Overrides) -> Result<(), CliError> {
    let bytes = read_config_bytes(config_path)?;
    let mut cfg: ZzbConfig = parse_config(&bytes)?;
    ov.warn_unused("zzb", true, true, true);
    if let Some(seed) = ov.seed {
        cfg.channel_seed = seed;
    }
    if let Some(z) = ov.zstep {
        cfg.zzb.z_step = z;
    }
    if let Some(p) = ov.phistep {
        cfg.zzb.phi_step = p;
    }
    if let Some(gh) = ov.gh_order {
        cfg.zzb.gh_order = gh;
    }

    let (grid, constellation) = cfg.grid.build().map_err(|e| runtime("building grid", e))?;
    let params = *grid.params();
    let chan = cfg
        .channel
        .realize(&params, cfg.channel_seed)
        .map_err(|e| runtime("realizing channel", e))?;
    let nominal = cfg.channel.nominal_power();

    let mut emitter = Emitter::new("zzb", config_path, &bytes, cfg.channel_seed, out_dir)?;
    let mut csv =
        Csv::new(emitter.hash(), &["snr_db", "zzb_rmse_m", "zzb_rmse_s", "zzb_variance_s2"]);
    let mut profile = cfg.emit_pmin_profile.then(|| {
        Csv::new(emitter.hash(), &["snr_db", "z1_samples", "pmin"])
    });
    for &snr_db in &cfg.snr_db {
        let noise = noise_for(nominal, snr_db);
        let result =
            zzb_variance(&grid, &chan, &constellation, noise, cfg.selection, &cfg.zzb)
                .map_err(|e| runtime("Ziv-Zakai bound", e))?;
        csv.row(&[sig(snr_db), sig(result.rmse_m), sig(result.rmse_s), sig(result.variance_s2)]);
        if let Some(profile) = profile.as_mut() {
            for &(z1, pmin) in &result.pmin_profile {
                profile.row(&[sig(snr_db), sig(z1), sig(pmin)]);
            }
        }
    }
    emitter.csv("zzb.csv", csv)?;
    if let Some(profile) = profile {
        emitter.csv("pmin_profile.csv", profile)?;
    }
    emitter.finish()
}

// ── estimate ────────────────────────────────────────────────────────────────

// Stream tags mirror the Monte Carlo sweep (snr index 0, realization 0,
// trial 0), so `estimate` with the same seed reproduces the sweep's first
// trial bit for bit.
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

pub fn run_estimate(config_path: &Path, out_dir: &Path, ov: Overrides) -> Result<(), CliError> {
    let bytes = read_config_bytes(config_path)?;
    let mut cfg: EstimateConfig = parse_config(&bytes)?;
    ov.warn_unused("estimate", true, true, false);
    if let Some(seed) = ov.seed {
        cfg.master_seed = seed;
    }
    if let Some(z) = ov.zstep {
        cfg.delta_z = z;
    }
    if let Some(p) = ov.phistep {
        cfg.delta_phi = p;
    }

    let (grid, constellation) = cfg.grid.build().map_err(|e| runtime("building grid", e))?;
    let params = *grid.params();
    let chan = cfg
        .channel
        .realize(&params, mix_seed(cfg.master_seed, &[STREAM_CHANNEL, 0]))
        .map_err(|e| runtime("realizing channel", e))?;
    let noise = noise_for(cfg.channel.nominal_power(), cfg.snr_db);

    let theta = draw_truth(&cfg.truth, params.window_samples(), mix_seed(cfg.master_seed, &[STREAM_THETA, 0, 0, 0]));
    let payload =
        generate_payload(&grid, &constellation, mix_seed(cfg.master_seed, &[STREAM_PAYLOAD, 0, 0, 0]));
    let y = apply_channel(
        &payload,
        &chan,
        &theta,
        &params,
        noise,
        mix_seed(cfg.master_seed, &[STREAM_NOISE, 0, 0, 0]),
    )
    .map_err(|e| runtime("synthesizing observation", e))?;

    let estimates = estimate_modes(
        &y,
        &grid,
        &chan,
        noise,
        &constellation,
        &cfg.modes,
        cfg.delta_z,
        cfg.delta_phi,
    )
    .map_err(|e| runtime("running estimators", e))?;

    let mut emitter = Emitter::new("estimate", config_path, &bytes, cfg.master_seed, out_dir)?;
    let mut csv = Csv::new(
        emitter.hash(),
        &[
            "mode",
            "z_hat_samples",
            "phi_hat_rad",
            "truth_z_samples",
            "truth_phi_rad",
            "toa_error_m",
            "loglik_at_peak",
        ],
    );
    for (mode, est) in cfg.modes.iter().zip(&estimates) {
        let err_m = (est.theta_hat.delay_samples - theta.delay_samples)
            * params.sample_period_s()
            * SPEED_OF_LIGHT_M_S;
        csv.row(&[
            mode.label().to_string(),
            sig(est.theta_hat.delay_samples),
            sig(est.theta_hat.phase_rad),
            sig(theta.delay_samples),
            sig(theta.phase_rad),
            sig(err_m),
            sig(est.loglik_at_peak),
        ]);
    }
    emitter.csv("estimate.csv", csv)?;
    emitter.finish()
}

// ── mc ──────────────────────────────────────────────────────────────────────

pub fn run_mc(config_path: &Path, out_dir: &Path, ov: Overrides) -> Result<(), CliError> {
    let bytes = read_config_bytes(config_path)?;
    let mut cfg: McConfig = parse_config(&bytes)?;
    ov.warn_unused("mc", true, true, true);
    if let Some(seed) = ov.seed {
        cfg.experiment.master_seed = seed;
    }
    if let Some(z) = ov.zstep {
        cfg.experiment.delta_z = z;
    }
    if let Some(p) = ov.phistep {
        cfg.experiment.delta_phi = p;
    }
    if let Some(gh) = ov.gh_order {
        cfg.experiment.gh_order = gh;
    }

    let result = run_sweep(&cfg.experiment).map_err(|e| runtime("Monte Carlo sweep", e))?;

    let mut emitter =
        Emitter::new("mc", config_path, &bytes, cfg.experiment.master_seed, out_dir)?;
    let mut sweep = Csv::new(
        emitter.hash(),
        &["snr_db", "mode", "rmse_m", "bias_m", "trials", "crlb_rmse_m", "mcrlb_rmse_m", "zzb_rmse_m"],
    );
    for p in &result.points {
        sweep.row(&[
            sig(p.snr_db),
            p.mode.label().to_string(),
            sig(p.rmse_m),
            sig(p.bias_m),
            int(p.trials),
            sig_opt(p.crlb_m),
            sig_opt(p.mcrlb_m),
            sig_opt(p.zzb_m),
        ]);
    }
    emitter.csv("sweep.csv", sweep)?;

    let mut realizations =
        Csv::new(emitter.hash(), &["snr_db", "mode", "realization", "rmse_m"]);
    for r in &result.realizations {
        realizations.row(&[sig(r.snr_db), r.mode.label().to_string(), int(r.realization), sig(r.rmse_m)]);
    }
    emitter.csv("realizations.csv", realizations)?;
    emitter.finish()
}

// ── prs-search ──────────────────────────────────────────────────────────────

pub fn run_prs_search(config_path: &Path, out_dir: &Path, ov: Overrides) -> Result<(), CliError> {
    let bytes = read_config_bytes(config_path)?;
    let mut cfg: PrsSearchConfig = parse_config(&bytes)?;
    ov.warn_unused("prs-search", true, true, true);
    if let Some(seed) = ov.seed {
        cfg.pilot_seed = seed;
    }
    if let Some(z) = ov.zstep {
        cfg.zzb.z_step = z;
    }
    if let Some(p) = ov.phistep {
        cfg.zzb.phi_step = p;
    }
    if let Some(gh) = ov.gh_order {
        cfg.zzb.gh_order = gh;
    }

    if cfg.n_prs == 0 || cfg.n_prs > cfg.n_blocks {
        return Err(schema("n_prs", format!("must be in [1, {}]", cfg.n_blocks)));
    }
    let template = BlockLayout::new(
        cfg.n_blocks,
        cfg.block_size,
        cfg.comb,
        (0..cfg.n_prs).collect(),
        cfg.n_symbols,
    )
    .map_err(|e| runtime("building layout template", e))?;
    let params = OfdmParams::new(
        cfg.n_blocks * cfg.block_size,
        cfg.n_symbols,
        cfg.delta_f_hz,
        cfg.toa_window_s,
    )
    .map_err(|e| runtime("building OFDM parameters", e))?;

    let ranked = search_allocations(&params, &template, cfg.snr_db, &cfg.zzb, cfg.top_eval, cfg.pilot_seed)
        .map_err(|e| runtime("allocation search", e))?;

    let mut emitter = Emitter::new("prs-search", config_path, &bytes, cfg.pilot_seed, out_dir)?;
    let mut csv = Csv::new(
        emitter.hash(),
        &["rank", "prs_blocks", "block_bitmask", "pilot_zzb_rmse_m", "pilot_plus_data_zzb_rmse_m"],
    );
    for (i, r) in ranked.iter().enumerate() {
        let blocks =
            r.layout.prs_blocks.iter().map(usize::to_string).collect::<Vec<_>>().join("|");
        csv.row(&[
            int(i + 1),
            blocks,
            r.layout.bitmask().to_string(),
            sig(r.pilot_zzb_m),
            sig_opt(r.pilot_plus_data_zzb_m),
        ]);
    }
    emitter.csv("allocations.csv", csv)?;

    let best = ranked.first().ok_or_else(|| {
        CliError::Runtime(anyhow::anyhow!("allocation search returned no candidates"))
    })?;
    let best_json = serde_json::json!({
        "manifest": emitter.hash(),
        "best": best,
    });
    emitter.json("best.json", &best_json)?;
    emitter.finish()
}

// ── leo ─────────────────────────────────────────────────────────────────────

pub fn run_leo(config_path: &Path, out_dir: &Path, ov: Overrides) -> Result<(), CliError> {
    let bytes = read_config_bytes(config_path)?;
    let mut cfg: LeoConfig = parse_config(&bytes)?;
    ov.warn_unused("leo", true, true, true);
    if let Some(seed) = ov.seed {
        cfg.campaign.master_seed = seed;
    }
    if let Some(z) = ov.zstep {
        cfg.campaign.delta_z = z;
    }
    if let Some(p) = ov.phistep {
        cfg.campaign.delta_phi = p;
    }
    if let Some(gh) = ov.gh_order {
        cfg.campaign.zzb.gh_order = gh;
    }

    let result = leo_campaign(&cfg.campaign).map_err(|e| runtime("LEO campaign", e))?;

    let mut emitter =
        Emitter::new("leo", config_path, &bytes, cfg.campaign.master_seed, out_dir)?;

    let mut geometry =
        Csv::new(emitter.hash(), &["satellite", "east_m", "north_m", "up_m", "elevation_deg"]);
    for (i, (enu, elev)) in result.sat_enu_m.iter().zip(&result.elevations_deg).enumerate() {
        geometry.row(&[int(i), sig(enu[0]), sig(enu[1]), sig(enu[2]), sig(*elev)]);
    }
    emitter.csv("geometry.csv", geometry)?;

    let mut summary = Csv::new(
        emitter.hash(),
        &[
            "mode",
            "horizontal_rmse_p50_m",
            "horizontal_rmse_p90_m",
            "vertical_rmse_p50_m",
            "vertical_rmse_p90_m",
            "predicted_horizontal_p50_m",
            "predicted_horizontal_p90_m",
            "predicted_vertical_p50_m",
            "predicted_vertical_p90_m",
            "empirical_semi_major_m",
            "empirical_semi_minor_m",
            "empirical_orientation_rad",
            "predicted_semi_major_m",
            "predicted_semi_minor_m",
            "predicted_orientation_rad",
            "ellipse_confidence",
            "unconverged_trials",
        ],
    );
    let pct = |values: &[f64], q: f64| -> Result<f64, CliError> {
        percentile(values, q).map_err(|e| runtime("percentile", e))
    };
    // Prediction columns are empty when the campaign ran with
    // `predict_bounds: false`.
    let pct_opt = |values: &[f64], q: f64| -> Result<Option<f64>, CliError> {
        if values.is_empty() { Ok(None) } else { pct(values, q).map(Some) }
    };
    for m in &result.modes {
        summary.row(&[
            m.mode.label().to_string(),
            sig(pct(&m.horizontal_rmse_m, 0.5)?),
            sig(pct(&m.horizontal_rmse_m, 0.9)?),
            sig(pct(&m.vertical_rmse_m, 0.5)?),
            sig(pct(&m.vertical_rmse_m, 0.9)?),
            sig_opt(pct_opt(&m.predicted_horizontal_rmse_m, 0.5)?),
            sig_opt(pct_opt(&m.predicted_horizontal_rmse_m, 0.9)?),
            sig_opt(pct_opt(&m.predicted_vertical_rmse_m, 0.5)?),
            sig_opt(pct_opt(&m.predicted_vertical_rmse_m, 0.9)?),
            sig(m.empirical_ellipse.semi_major_m),
            sig(m.empirical_ellipse.semi_minor_m),
            sig(m.empirical_ellipse.orientation_rad),
            sig_opt(m.predicted_ellipse.as_ref().map(|e| e.semi_major_m)),
            sig_opt(m.predicted_ellipse.as_ref().map(|e| e.semi_minor_m)),
            sig_opt(m.predicted_ellipse.as_ref().map(|e| e.orientation_rad)),
            sig(m.empirical_ellipse.confidence),
            int(m.unconverged_trials),
        ]);
    }
    emitter.csv("summary.csv", summary)?;

    let mut realizations = Csv::new(
        emitter.hash(),
        &[
            "mode",
            "realization",
            "horizontal_rmse_m",
            "vertical_rmse_m",
            "predicted_horizontal_rmse_m",
            "predicted_vertical_rmse_m",
        ],
    );
    for m in &result.modes {
        for i in 0..m.horizontal_rmse_m.len() {
            realizations.row(&[
                m.mode.label().to_string(),
                int(i),
                sig(m.horizontal_rmse_m[i]),
                sig(m.vertical_rmse_m[i]),
                sig_opt(m.predicted_horizontal_rmse_m.get(i).copied()),
                sig_opt(m.predicted_vertical_rmse_m.get(i).copied()),
            ]);
        }
    }
    emitter.csv("realizations.csv", realizations)?;

    for (name, select) in [
        ("ccdf_horizontal.csv", true),
        ("ccdf_vertical.csv", false),
    ] {
        let mut csv = Csv::new(emitter.hash(), &["mode", "rmse_m", "ccdf"]);
        for m in &result.modes {
            let values = if select { &m.horizontal_rmse_m } else { &m.vertical_rmse_m };
            let curve = ccdf(values).map_err(|e| runtime("ccdf", e))?;
            for (v, p) in curve {
                csv.row(&[m.mode.label().to_string(), sig(v), sig(p)]);
            }
        }
        emitter.csv(name, csv)?;
    }
    emitter.finish()
}

// ── validate ────────────────────────────────────────────────────────────────

/// Parses any config against its declared job's schema and runs the cheap
/// semantic constructors (grid build, channel realization, geometry
/// selection) without doing the heavy computation.
pub fn run_validate(config_path: &Path) -> Result<(), CliError> {
    let bytes = read_config_bytes(config_path)?;
    let job = peek_job(&bytes)?;
    match job.as_str() {
        "bounds" => {
            let cfg: BoundsConfig = parse_config(&bytes)?;
            let (grid, _) = cfg.grid.build().map_err(|e| runtime("building grid", e))?;
            cfg.channel
                .realize(grid.params(), cfg.channel_seed)
                .map_err(|e| runtime("realizing channel", e))?;
        }
        "zzb" => {
            let cfg: ZzbConfig = parse_config(&bytes)?;
            let (grid, _) = cfg.grid.build().map_err(|e| runtime("building grid", e))?;
            cfg.channel
                .realize(grid.params(), cfg.channel_seed)
                .map_err(|e| runtime("realizing channel", e))?;
        }
        "estimate" => {
            let cfg: EstimateConfig = parse_config(&bytes)?;
            let (grid, _) = cfg.grid.build().map_err(|e| runtime("building grid", e))?;
            cfg.channel
                .realize(grid.params(), 0)
                .map_err(|e| runtime("realizing channel", e))?;
        }
        "mc" => {
            let cfg: McConfig = parse_config(&bytes)?;
            let (grid, _) =
                cfg.experiment.grid.build().map_err(|e| runtime("building grid", e))?;
            cfg.experiment
                .channel
                .realize(grid.params(), 0)
                .map_err(|e| runtime("realizing channel", e))?;
        }
        "prs-search" => {
            let cfg: PrsSearchConfig = parse_config(&bytes)?;
            if cfg.n_prs == 0 || cfg.n_prs > cfg.n_blocks {
                return Err(schema("n_prs", format!("must be in [1, {}]", cfg.n_blocks)));
            }
            let template = BlockLayout::new(
                cfg.n_blocks,
                cfg.block_size,
                cfg.comb,
                (0..cfg.n_prs).collect(),
                cfg.n_symbols,
            )
            .map_err(|e| runtime("building layout template", e))?;
            let params = OfdmParams::new(
                cfg.n_blocks * cfg.block_size,
                cfg.n_symbols,
                cfg.delta_f_hz,
                cfg.toa_window_s,
            )
            .map_err(|e| runtime("building OFDM parameters", e))?;
            layout_to_grid(&template, &params, cfg.pilot_seed)
                .map_err(|e| runtime("building pilot grid", e))?;
        }
        "leo" => {
            let cfg: LeoConfig = parse_config(&bytes)?;
            let c = &cfg.campaign;
            c.grid.build().map_err(|e| runtime("building grid", e))?;
            select_geometry(
                &c.walker,
                c.receiver_lat_deg,
                c.receiver_lon_deg,
                c.elevation_mask_deg,
                c.n_satellites,
                c.burst_interval_s,
                c.clock_offset_s,
            )
            .map_err(|e| runtime("selecting satellite geometry", e))?;
        }
        other => {
            return Err(schema("job", format!("unknown job `{other}`")));
        }
    }
    println!("ok: `{}` is a valid `{}` config", config_path.display(), job);
    Ok(())
}
