//! Output directory bookkeeping and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, SCHEMA_VERSION};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance of one command run. Wall-clock data lives only here, so every
/// other output is a pure function of the config and the seed.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    /// SHA-256 of the raw config bytes.
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputEntry>,
}

/// Files written by a command, in creation order.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    started: (SystemTime, Instant),
}

impl Outputs {
    /// The directory must already exist.
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        if !dir.is_dir() {
            return Err(CliError::Config(format!(
                "output directory {} does not exist",
                dir.display()
            )));
        }
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: (SystemTime::now(), Instant::now()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let file = File::create(self.dir.join(name))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(BufWriter::new(file))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Hashes every output and writes the manifest.
    pub fn finish(
        mut self,
        command: &str,
        config_hash: &str,
        seed: u64,
    ) -> Result<RunManifest, CliError> {
        let outputs = self
            .files
            .iter()
            .map(|f| {
                let bytes = std::fs::read(self.dir.join(f))?;
                Ok(OutputEntry {
                    file: f.clone(),
                    sha256: sha256_hex(&bytes),
                    bytes: bytes.len() as u64,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let versions = BTreeMap::from([
            (
                "pdmp-control".to_string(),
                pdmp_control::VERSION.to_string(),
            ),
            (
                "pdmp-control-cli".to_string(),
                env!("CARGO_PKG_VERSION").to_string(),
            ),
        ]);
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            versions,
            started_unix: self
                .started
                .0
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_clock_seconds: self.started.1.elapsed().as_secs_f64(),
            outputs,
        };
        self.write_json(MANIFEST, &manifest)?;
        Ok(manifest)
    }
}
