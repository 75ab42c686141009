//! Deterministic file emission: 12-significant-digit numbers, atomic writes,
//! CSV assembly, and the run manifest every output references.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::fail::CliError;

/// Formats a float with 12 significant digits, locale-independent, stable
/// across platforms (scientific form, e.g. `5.80827079151e1`).
pub fn sig(x: f64) -> String {
    if x == 0.0 {
        // Covers -0.0 too; keeps zero columns clean.
        "0".to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// Optional float: empty cell when the value does not apply.
pub fn sig_opt(x: Option<f64>) -> String {
    x.map(sig).unwrap_or_default()
}

pub fn int(x: usize) -> String {
    x.to_string()
}

/// CSV buffer: one `# manifest=<hash>` comment line, a header row, then data
/// rows. Comma-separated, UTF-8, LF line endings.
pub struct Csv {
    lines: Vec<String>,
    width: usize,
}

impl Csv {
    pub fn new(manifest_hash: &str, header: &[&str]) -> Self {
        Csv {
            lines: vec![format!("# manifest={manifest_hash}"), header.join(",")],
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.width, "row width must match header");
        self.lines.push(cells.join(","));
    }

    pub fn finish(self) -> String {
        let mut text = self.lines.join("\n");
        text.push('\n');
        text
    }
}

/// Identity of one run. Output files cite `manifest_hash`, which covers the
/// subcommand, the config bytes, the effective seed, and the tool version —
/// but not the output location — so reruns of the same work are byte-identical
/// wherever they land.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u64,
    pub subcommand: String,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub out_dir: String,
    pub tool_version: String,
    pub manifest_hash: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_path: &Path, config_sha256: &str, seed: u64, out_dir: &Path) -> Self {
        let tool_version = env!("CARGO_PKG_VERSION").to_string();
        let mut hasher = Sha256::new();
        hasher.update(subcommand.as_bytes());
        hasher.update(b"\n");
        hasher.update(config_sha256.as_bytes());
        hasher.update(b"\n");
        hasher.update(seed.to_le_bytes());
        hasher.update(b"\n");
        hasher.update(tool_version.as_bytes());
        let manifest_hash = hex::encode(hasher.finalize());
        RunManifest {
            schema_version: crate::config::SCHEMA_VERSION,
            subcommand: subcommand.to_string(),
            config_path: config_path.display().to_string(),
            config_sha256: config_sha256.to_string(),
            seed,
            out_dir: out_dir.display().to_string(),
            tool_version,
            manifest_hash,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}

/// Writes via a temp file in the same directory plus an atomic rename, so a
/// crash never leaves a partial output at the final path.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let io = |e: std::io::Error| {
        CliError::Runtime(anyhow::anyhow!("writing `{}` in `{}`: {e}", name, dir.display()))
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".tmp-")
        .tempfile_in(dir)
        .map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.flush().map_err(io)?;
    let path = dir.join(name);
    tmp.persist(&path)
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("renaming into `{}`: {e}", path.display())))?;
    Ok(path)
}
