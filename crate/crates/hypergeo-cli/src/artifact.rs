//! Deterministic artifact emission: content-hashed filenames, `#`-comment
//! CSV headers, pretty JSON. No timestamps anywhere, so identical config
//! and seed reproduce identical bytes.

use crate::config::{Format, RunConfig};
use hypergeo::error::Result;
use serde_json::Value;
use std::fmt::Write as _;
use std::path::PathBuf;

/// What a command run produced: written paths plus the one-line summary.
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

/// `<command>-<model>-<hash8>.<ext>` inside the output directory.
pub fn artifact_path(cfg: &RunConfig, command: &str, detail: &Value) -> PathBuf {
    let hash = cfg.content_hash(command, detail);
    cfg.out_dir
        .join(format!("{command}-{}-{hash}.{}", cfg.model_name, cfg.format.extension()))
}

pub fn write_artifact(
    cfg: &RunConfig,
    command: &str,
    detail: &Value,
    body: &[u8],
) -> Result<PathBuf> {
    let path = artifact_path(cfg, command, detail);
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(&path, body)?;
    Ok(path)
}

/// Render one artifact in the configured format and write it: `csv` builds
/// the comma-separated body (comment lines included), `json` the document.
pub fn emit(
    cfg: &RunConfig,
    command: &str,
    detail: &Value,
    csv: impl FnOnce() -> Result<Vec<u8>>,
    json: impl FnOnce() -> Result<Value>,
) -> Result<PathBuf> {
    let body = match cfg.format {
        Format::Csv => csv()?,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json()?)
                .expect("artifact values contain no non-finite numbers");
            s.push('\n');
            s.into_bytes()
        }
    };
    write_artifact(cfg, command, detail, &body)
}

/// Shared CSV comment header.
pub fn preamble(command: &str, cfg: &RunConfig, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# command={command}");
    let _ = writeln!(s, "# model={}", cfg.model_name);
    let _ = writeln!(s, "# seed={}", cfg.seed);
    for (key, value) in extra {
        let _ = writeln!(s, "# {key}={value}");
    }
    s
}
