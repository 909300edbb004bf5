//! Serializers: CSV for sweep tables, JSON for everything else, and the
//! metadata sidecar written next to every output file.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use dqs_core::table::{Cell, SweepTable};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Float(f) => format_float(*f),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

pub fn table_to_csv(table: &SweepTable) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(table.headers())?;
    for row in table.rows() {
        w.write_record(row.iter().map(format_cell))?;
    }
    w.into_inner().context("flushing CSV")
}

pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Serialize)]
struct Sidecar<'a, S: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    timestamp: u64,
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a S>,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes `body` to the configured output, or stdout. File outputs get a
/// sidecar with the config echo, the tool version and a timestamp; the
/// output itself carries no timestamp so reruns are byte-identical.
pub fn emit<S: Serialize>(
    command: &str,
    config: &ExperimentConfig,
    body: &[u8],
    summary: Option<&S>,
) -> anyhow::Result<()> {
    match &config.out {
        None => {
            std::io::stdout()
                .write_all(body)
                .context("writing to stdout")?;
        }
        Some(path) => {
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
            let timestamp = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let meta = Sidecar {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command,
                timestamp,
                config,
                summary,
            };
            let side = sidecar_path(path);
            std::fs::write(&side, to_json(&meta)?)
                .with_context(|| format!("writing {}", side.display()))?;
        }
    }
    Ok(())
}
