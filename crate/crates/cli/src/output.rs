//! Output directories: the run lock, file bookkeeping and `manifest.json`.

use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Read};
use std::path::{Path, PathBuf};

use hsi_core::envi::{write_envi_with, DataType, WriteOptions};
use hsi_core::{HyperCube, Interleave};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const LOCK_NAME: &str = ".hsi.lock";
pub const MANIFEST_NAME: &str = "manifest.json";
pub const METRICS_NAME: &str = "metrics.json";

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Exclusive claim on an output root, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let path = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                Err(CliError::Locked(root.to_path_buf()))
            }
            Err(e) => Err(io_err(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Streams `path` through SHA-256.
pub fn checksum(path: &Path) -> Result<FileRecord, CliError> {
    let mut file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(|e| io_err(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(FileRecord {
        path: path.display().to_string(),
        bytes,
        sha256: hex::encode(hasher.finalize()),
    })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a Value,
    inputs: &'a [FileRecord],
    outputs: &'a [FileRecord],
}

/// Directory one command writes into. Every file written through it is
/// listed, with its checksum, in the manifest.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Self {
            dir,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records an input file for the manifest.
    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    fn record(&mut self, name: String) {
        if !self.outputs.contains(&name) {
            self.outputs.push(name);
        }
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.record(name.to_string());
        Ok(path)
    }

    /// Pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        Ok(self.write_bytes(name, text.as_bytes())?)
    }

    /// Writes `<stem>.hdr` and `<stem>.img` in BSQ order.
    pub fn write_cube(
        &mut self,
        stem: &str,
        cube: &HyperCube,
        data_type: DataType,
    ) -> anyhow::Result<PathBuf> {
        let opts = WriteOptions {
            interleave: Interleave::Bsq,
            data_type,
            ..WriteOptions::default()
        };
        let paths = write_envi_with(cube, self.path(stem), &opts)?;
        for p in [&paths.header, &paths.binary] {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            self.record(name);
        }
        Ok(paths.header)
    }

    /// Records a file some other writer created inside this directory.
    pub fn adopt(&mut self, name: &str) {
        self.record(name.to_string());
    }

    /// Writes `manifest.json`. Output paths are relative to this directory,
    /// inputs are recorded as given.
    pub fn finish(self, command: &str, config: &Value) -> anyhow::Result<PathBuf> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| checksum(p))
            .collect::<Result<Vec<_>, _>>()?;
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for name in &self.outputs {
            let mut rec = checksum(&self.dir.join(name))?;
            rec.path = name.clone();
            outputs.push(rec);
        }
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs: &inputs,
            outputs: &outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_NAME);
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}
