//! CSV tables and JSON sidecars.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("cannot write {}: {e}", path.display()))
}

pub struct Table {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(header).map_err(|e| io_error(path, e))?;
        Ok(Table { path: path.to_path_buf(), writer })
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| io_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| io_error(&self.path, e))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_error(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_error(path, e))
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// SHA-256 of the compact JSON serialization with keys sorted, so that
/// re-serializing a sidecar's `config` block reproduces the hash.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let json = serde_json::to_string(&value).expect("json value serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Provenance<'a, C: Serialize, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config_hash: String,
    seed: Option<u64>,
    config: &'a C,
    details: T,
}

/// Writes `<out>.meta.json` with the effective configuration and its hash.
pub fn write_sidecar<C: Serialize, T: Serialize>(
    out: &Path,
    command: &str,
    config: &C,
    seed: Option<u64>,
    details: T,
) -> Result<(), CliError> {
    let record = Provenance {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config_hash(config),
        seed,
        config,
        details,
    };
    write_json(&sidecar_path(out), &record)
}
