use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::CliResult;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written once into every output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Effective configuration after flags, config file and defaults.
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: BTreeMap<String, FileDigest>,
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Reader that hashes what passes through it, for inputs such as stdin
/// that cannot be re-read. The digest is taken from the shared handle.
pub struct HashingReader<R> {
    inner: R,
    hasher: Rc<RefCell<Sha256>>,
}

#[derive(Clone)]
pub struct DigestHandle(Rc<RefCell<Sha256>>);

impl DigestHandle {
    pub fn hex_digest(&self) -> String {
        hex::encode(self.0.borrow().clone().finalize())
    }
}

impl<R: Read> HashingReader<R> {
    pub fn new(inner: R) -> (Self, DigestHandle) {
        let hasher = Rc::new(RefCell::new(Sha256::new()));
        (
            Self {
                inner,
                hasher: hasher.clone(),
            },
            DigestHandle(hasher),
        )
    }
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.borrow_mut().update(&buf[..n]);
        Ok(n)
    }
}

pub struct Run {
    command: &'static str,
    started: Instant,
    started_unix: f64,
    inputs: BTreeMap<String, FileDigest>,
    outputs: Vec<(String, PathBuf)>,
}

impl Run {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)?;
        self.input_digest(role, path.display().to_string(), sha256);
        Ok(())
    }

    pub fn input_digest(&mut self, role: &str, path: String, sha256: String) {
        self.inputs
            .insert(role.to_string(), FileDigest { path, sha256 });
    }

    pub fn output(&mut self, role: &str, path: PathBuf) {
        self.outputs.push((role.to_string(), path));
    }

    /// Writes `manifest.json` into `dir`, hashing the registered outputs.
    pub fn finish<C: Serialize>(self, dir: &Path, config: &C, seed: Option<u64>) -> CliResult<RunManifest> {
        let mut outputs = BTreeMap::new();
        for (role, path) in &self.outputs {
            outputs.insert(
                role.clone(),
                FileDigest {
                    path: path.display().to_string(),
                    sha256: sha256_file(path)?,
                },
            );
        }
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: serde_json::to_value(config)?,
            inputs: self.inputs,
            outputs,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        hazardforge_core::io::write_json(&dir.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}
