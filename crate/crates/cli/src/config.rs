//! JSON run configs: one envelope per subcommand, all versioned and strict.
//!
//! Every config file declares `schema_version` (currently 1) and `job` (the
//! subcommand it drives). Unknown fields are rejected everywhere, and schema
//! violations are reported with the JSON field path of the offending value.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use ofdm_toa::channel::ChannelSpec;
use ofdm_toa::estimators::EstimatorMode;
use ofdm_toa::grid::{GridSpec, ResourceSelection};
use ofdm_toa::leo::LeoCampaignSpec;
use ofdm_toa::montecarlo::{ExperimentSpec, TruthSpec};
use ofdm_toa::zzb::ZzbSettings;

use crate::fail::{schema, usage, CliError};

pub const SCHEMA_VERSION: u64 = 1;

/// A run config with the common envelope fields.
pub trait JobConfig: DeserializeOwned {
    /// Job name the config must declare (also the subcommand name).
    const JOB: &'static str;
    fn envelope(&self) -> (u64, &str);
}

macro_rules! impl_job_config {
    ($ty:ty, $job:literal) => {
        impl JobConfig for $ty {
            const JOB: &'static str = $job;
            fn envelope(&self) -> (u64, &str) {
                (self.schema_version, &self.job)
            }
        }
    };
}

fn default_gh_order() -> usize {
    30
}
fn default_delta_z() -> f64 {
    0.125
}
fn default_delta_phi() -> f64 {
    std::f64::consts::TAU / 24.0
}
fn default_top_eval() -> usize {
    3
}

/// SNR-sweep config for the `bounds` subcommand: pilot CRLB, modified CRLB,
/// and the exact data CRLB on one channel realization.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub schema_version: u64,
    pub job: String,
    pub grid: GridSpec,
    pub channel: ChannelSpec,
    pub snr_db: Vec<f64>,
    /// Gauss-Hermite order for the exact data CRLB.
    #[serde(default = "default_gh_order")]
    pub gh_order: usize,
    /// Seed for the channel realization (random-phase models only).
    #[serde(default)]
    pub channel_seed: u64,
}

/// SNR-sweep config for the `zzb` subcommand.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZzbConfig {
    pub schema_version: u64,
    pub job: String,
    pub grid: GridSpec,
    pub channel: ChannelSpec,
    pub snr_db: Vec<f64>,
    /// Which cell population informs the bound.
    pub selection: ResourceSelection,
    #[serde(default)]
    pub zzb: ZzbSettings,
    #[serde(default)]
    pub channel_seed: u64,
    /// Also write the sampled `max_φ₁ Pmin(z₁)` profile per SNR point.
    #[serde(default)]
    pub emit_pmin_profile: bool,
}

/// Single-observation config for the `estimate` subcommand. Seed streams
/// match the Monte Carlo sweep's first trial (snr index 0, realization 0,
/// trial 0), so an `estimate` run reproduces one `mc` trial exactly.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub schema_version: u64,
    pub job: String,
    pub grid: GridSpec,
    pub channel: ChannelSpec,
    pub snr_db: f64,
    pub modes: Vec<EstimatorMode>,
    #[serde(default = "default_delta_z")]
    pub delta_z: f64,
    #[serde(default = "default_delta_phi")]
    pub delta_phi: f64,
    #[serde(default)]
    pub truth: TruthSpec,
    pub master_seed: u64,
}

/// Envelope for the `mc` subcommand; the sweep itself is the library's
/// experiment spec.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub schema_version: u64,
    pub job: String,
    pub experiment: ExperimentSpec,
}

/// Exhaustive pilot-block allocation search config (`prs-search`).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrsSearchConfig {
    pub schema_version: u64,
    pub job: String,
    /// Number of equal blocks the band is divided into.
    pub n_blocks: usize,
    /// Subcarriers per block.
    pub block_size: usize,
    /// Comb factor inside a pilot block (1 pilot per `comb` subcarriers per
    /// symbol, on a diagonal lattice).
    pub comb: usize,
    /// How many blocks carry pilots; all C(n_blocks, n_prs) placements are
    /// evaluated.
    pub n_prs: usize,
    pub n_symbols: usize,
    pub delta_f_hz: f64,
    /// One-sided TOA search window in seconds.
    pub toa_window_s: f64,
    /// Per-cell SNR (dB) at which placements are ranked.
    pub snr_db: f64,
    #[serde(default)]
    pub zzb: ZzbSettings,
    /// How many leading candidates also get the pilot+data bound.
    #[serde(default = "default_top_eval")]
    pub top_eval: usize,
    #[serde(default)]
    pub pilot_seed: u64,
}

/// Envelope for the `leo` subcommand; the campaign itself is the library's
/// spec.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeoConfig {
    pub schema_version: u64,
    pub job: String,
    pub campaign: LeoCampaignSpec,
}

impl_job_config!(BoundsConfig, "bounds");
impl_job_config!(ZzbConfig, "zzb");
impl_job_config!(EstimateConfig, "estimate");
impl_job_config!(McConfig, "mc");
impl_job_config!(PrsSearchConfig, "prs-search");
impl_job_config!(LeoConfig, "leo");

/// Reads the raw config bytes, for hashing and parsing.
pub fn read_config_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| usage(format!("cannot read config `{}`: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Checks the envelope fields common to all jobs, then parses the typed
/// config with JSON-path error tracking.
pub fn parse_config<T: JobConfig>(bytes: &[u8]) -> Result<T, CliError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| schema("(document)", format!("config is not UTF-8: {e}")))?;
    let probe: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| schema("(document)", format!("not valid JSON: {e}")))?;
    let version = probe
        .get("schema_version")
        .ok_or_else(|| schema("schema_version", "missing field `schema_version`"))?
        .as_u64()
        .ok_or_else(|| schema("schema_version", "must be an unsigned integer"))?;
    if version != SCHEMA_VERSION {
        return Err(schema(
            "schema_version",
            format!("unsupported schema_version {version}; this tool supports {SCHEMA_VERSION}"),
        ));
    }
    let job = probe
        .get("job")
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| schema("job", "missing or non-string field `job`"))?;
    if job != T::JOB {
        return Err(schema(
            "job",
            format!("config declares job `{job}` but the `{}` subcommand was invoked", T::JOB),
        ));
    }

    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let message = e.inner().to_string();
        CliError::Schema { path: field_path(&e.path().to_string(), &message), message }
    })?;
    debug_assert_eq!(cfg.envelope(), (SCHEMA_VERSION, T::JOB));
    Ok(cfg)
}

/// Reads the `job` field so `validate` can dispatch without knowing the type.
pub fn peek_job(bytes: &[u8]) -> Result<String, CliError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| schema("(document)", format!("config is not UTF-8: {e}")))?;
    let probe: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| schema("(document)", format!("not valid JSON: {e}")))?;
    probe
        .get("job")
        .and_then(serde_json::Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| schema("job", "missing or non-string field `job`"))
}

/// Serde reports a missing field on its parent struct; append the field name
/// so the reported path points at the absent value itself.
fn field_path(parent: &str, message: &str) -> String {
    let missing = message
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next())
        .or_else(|| message.strip_prefix("unknown field `").and_then(|rest| rest.split('`').next()));
    match missing {
        Some(field) if parent == "." || parent.is_empty() => field.to_string(),
        // The path tracker already ends at unknown keys; don't double-append.
        Some(field) if parent == field || parent.ends_with(&format!(".{field}")) => {
            parent.to_string()
        }
        Some(field) => format!("{parent}.{field}"),
        None if parent == "." || parent.is_empty() => "(document)".to_string(),
        None => parent.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds_json() -> serde_json::Value {
        serde_json::json!({
            "schema_version": 1,
            "job": "bounds",
            "grid": {
                "subcarriers": 16,
                "n_symbols": 1,
                "delta_f_hz": 15000.0,
                "toa_window_s": 6.25e-6,
                "constellation": "qpsk",
                "cells": [ { "runs": [["data", 16]] } ],
                "pilot_symbols": { "seeded_qpsk": { "seed": 0 } }
            },
            "channel": { "flat": { "gain": 1.0 } },
            "snr_db": [0.0, 10.0]
        })
    }

    #[test]
    fn parses_a_good_bounds_config() {
        let bytes = serde_json::to_vec(&bounds_json()).unwrap();
        let cfg: BoundsConfig = parse_config(&bytes).unwrap();
        assert_eq!(cfg.snr_db, vec![0.0, 10.0]);
        assert_eq!(cfg.gh_order, 30);
    }

    #[test]
    fn missing_field_names_the_full_path() {
        let mut v = bounds_json();
        v["grid"].as_object_mut().unwrap().remove("delta_f_hz");
        let bytes = serde_json::to_vec(&v).unwrap();
        let err = parse_config::<BoundsConfig>(&bytes).unwrap_err();
        match err {
            CliError::Schema { path, .. } => assert_eq!(path, "grid.delta_f_hz"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected_with_its_path() {
        let mut v = bounds_json();
        v["grid"]["bandwidth"] = serde_json::json!(1.0);
        let bytes = serde_json::to_vec(&v).unwrap();
        let err = parse_config::<BoundsConfig>(&bytes).unwrap_err();
        match err {
            CliError::Schema { path, .. } => assert_eq!(path, "grid.bandwidth"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_job_and_wrong_version_are_schema_errors() {
        let bytes = serde_json::to_vec(&bounds_json()).unwrap();
        assert!(matches!(
            parse_config::<ZzbConfig>(&bytes).unwrap_err(),
            CliError::Schema { ref path, .. } if path == "job"
        ));
        let mut v = bounds_json();
        v["schema_version"] = serde_json::json!(7);
        let bytes = serde_json::to_vec(&v).unwrap();
        assert!(matches!(
            parse_config::<BoundsConfig>(&bytes).unwrap_err(),
            CliError::Schema { ref path, .. } if path == "schema_version"
        ));
    }
}
