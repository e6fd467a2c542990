use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use evcharge::config::ExperimentConfig;
use evcharge::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "EVCHARGE_OUT_DIR";
pub const MANIFEST_FILE: &str = "manifest.json";

/// `--out-dir`, else `$EVCHARGE_OUT_DIR`, else `./evcharge-out`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("evcharge-out"))
}

/// Wall clock, or `SOURCE_DATE_EPOCH` when set so reruns are byte-identical.
pub fn timestamp() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|s| DateTime::<Utc>::from_timestamp(s, 0));
    pinned
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    ExperimentConfig::from_toml_str(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub code_version: String,
    pub config_hash: Option<String>,
    pub seeds: Vec<u64>,
    pub algorithm: Option<String>,
    pub n_agents: Option<usize>,
    pub started_at: String,
    pub finished_at: String,
    /// Paths relative to the manifest's directory.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, argv: &[OsString], started_at: String) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            argv: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: None,
            seeds: Vec::new(),
            algorithm: None,
            n_agents: None,
            started_at,
            finished_at: String::new(),
            outputs: Vec::new(),
        }
    }

    /// Checks every listed output exists, then writes `manifest.json`.
    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_at = timestamp();
        for o in &self.outputs {
            if !dir.join(o).exists() {
                return Err(Error::Contract(format!("manifest lists missing output {o}")));
            }
        }
        write_json(&dir.join(MANIFEST_FILE), &self)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Serde(format!("unsupported manifest schema {}", m.schema_version)));
        }
        Ok(m)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
