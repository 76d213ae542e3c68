//! Configuration-driven front end for the `sspd-core` models: parses
//! experiment configs, runs them and writes CSV curves, JSON-lines
//! diagnostics and a run manifest.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod presets;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

pub use config::Config;
pub use error::CliError;
use output::{sha256_hex, Artifact};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SSPDSIM_OUT";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("sspdsim-out"), PathBuf::from)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub config_sha256: String,
    pub checks_total: usize,
    pub checks_failed: usize,
}

/// Runs one experiment and writes its data files, `effective_config.cfg` and
/// `manifest.jsonl` into `out_dir`. Data files depend only on the config
/// (seed included) and the tool version; the manifest also records timing.
pub fn run(cfg: &Config, out_dir: &Path) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let outcome = experiments::execute(cfg)?;
    let effective = cfg.effective_text();
    let config_sha256 = sha256_hex(effective.as_bytes());

    let mut artifacts = outcome.artifacts;
    artifacts.push(Artifact {
        name: "effective_config.cfg".into(),
        contents: effective,
    });
    let outputs: Vec<_> = artifacts
        .iter()
        .map(|a| json!({"file": a.name, "sha256": sha256_hex(a.contents.as_bytes()), "bytes": a.contents.len()}))
        .collect();
    let mut files = output::write_all(out_dir, &artifacts)?;

    let manifest = json!({
        "tool": "sspdsim",
        "tool_version": VERSION,
        "experiment": cfg.experiment(),
        "config_sha256": config_sha256,
        "seed": cfg.u64("seed")?,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "outputs": outputs,
        "checks_total": outcome.checks_total,
        "checks_failed": outcome.checks_failed,
    });
    files.extend(output::write_all(out_dir, &[Artifact::jsonl("manifest.jsonl", &[manifest])])?);

    let report = RunReport {
        out_dir: out_dir.to_path_buf(),
        files,
        config_sha256,
        checks_total: outcome.checks_total,
        checks_failed: outcome.checks_failed,
    };
    if report.checks_failed > 0 {
        return Err(CliError::OracleFailed {
            failed: report.checks_failed,
            total: report.checks_total,
        });
    }
    Ok(report)
}

/// Overrides that `check-oracles --fast` applies: fewer detections and
/// shorter runs, same tolerances.
pub const FAST_ORACLE_OVERRIDES: [&str; 4] = [
    "oracle.count_rate_detections=100000",
    "oracle.hbt_duration_ns=1e9",
    "oracle.tcspc_counts=100000",
    "oracle.trace_duration_ns=2e4",
];

pub fn oracle_config(fast: bool, extra: &[String]) -> Result<Config, CliError> {
    let mut overrides: Vec<String> = Vec::new();
    if fast {
        overrides.extend(FAST_ORACLE_OVERRIDES.iter().map(|s| s.to_string()));
    }
    overrides.extend_from_slice(extra);
    Config::parse("experiment = oracle-check\n", &overrides, PathBuf::new())
}
