//! Deterministic run artifacts: the JSON report and CSV tables.
//!
//! Reports carry no timestamps and no absolute environment data, so two runs
//! of the same config are byte-identical. Every input file read during a run
//! is recorded with a content hash in git object form (sha256 over
//! `"blob <len>\0"` plus the raw bytes), making the report a verifiable
//! record of exactly what it consumed.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::CliError;

/// Content address of one input file.
#[derive(Clone, Debug, Serialize)]
pub struct InputHash {
    pub path: String,
    pub blob_sha256: String,
}

/// Hash of `bytes` in git object form: sha256 over `"blob <len>\0"` + bytes.
pub fn blob_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(b"blob ");
    h.update(bytes.len().to_string().as_bytes());
    h.update([0u8]);
    h.update(bytes);
    let mut hex = String::with_capacity(64);
    for b in h.finalize() {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

/// Reads a text input file and records its content hash. A missing or
/// unreadable file is a validation error naming the path.
pub fn read_input(path: &Path, inputs: &mut Vec<InputHash>) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    inputs.push(InputHash {
        path: path.display().to_string(),
        blob_sha256: blob_sha256(&bytes),
    });
    String::from_utf8(bytes)
        .map_err(|_| CliError::Validation(format!("{} is not valid UTF-8", path.display())))
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    inputs: &'a [InputHash],
    artifacts: &'a [String],
    config: &'a Config,
    result: T,
}

/// Output directory collecting CSV artifacts and the final report.
pub struct OutDir {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<OutDir, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    /// Writes one CSV artifact: a header line plus one string per row.
    pub fn csv<I>(&mut self, name: &str, header: &str, rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = String>,
    {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        let path = self.dir.join(name);
        fs::write(&path, text)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Writes `report.json` embedding the resolved config, the hashes of all
    /// inputs, the artifact list, and the command-specific result.
    pub fn finish<T: Serialize>(
        &self,
        command: &str,
        seed: u64,
        inputs: &[InputHash],
        config: &Config,
        result: T,
    ) -> Result<(), CliError> {
        let report = Report {
            command,
            seed,
            inputs,
            artifacts: &self.artifacts,
            config,
            result,
        };
        let mut text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Validation(format!("cannot serialize report: {e}")))?;
        text.push('\n');
        let path = self.dir.join("report.json");
        fs::write(&path, text)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
    }
}
