//! Atomic file output and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::CliError;

/// Writes through a temp file in the target directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().flush().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub version: String,
    pub wall_time_seconds: f64,
}

/// Collects outputs of one command; `finish` writes `manifest.json` last.
pub struct Run {
    dir: PathBuf,
    command: String,
    parameters: BTreeMap<String, String>,
    seed: Option<u64>,
    outputs: Vec<String>,
    start: Instant,
}

impl Run {
    pub fn start(dir: &Path, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            parameters: BTreeMap::new(),
            seed: None,
            outputs: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn write(&mut self, name: &str, fill: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, fill)?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        self.write(name, |w| w.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new(name), e)))
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            command: self.command,
            parameters: self.parameters,
            seed: self.seed,
            outputs: self.outputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Usage(e.to_string()))?;
        write_atomic(&path, |w| {
            w.write_all(json.as_bytes())
                .and_then(|_| w.write_all(b"\n"))
                .map_err(|e| CliError::io(&path, e))
        })?;
        Ok(path)
    }
}
