//! Result bundles: files staged in memory, then written by one writer with
//! write-then-rename so a failure never leaves a half-written file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const LOG: &str = "run.log";
const MANIFEST_SCHEMA: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").expect("writing to a String");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub cli_version: String,
    pub core_version: String,
    pub seed: u64,
    pub config_hash: String,
    /// Digest over the sorted (path, sha256) list of every emitted file.
    /// Unlike the manifest bytes, it does not depend on the wall clock.
    pub bundle_sha256: String,
    pub wall_clock_s: f64,
    pub files: Vec<FileEntry>,
}

/// Files of one command run, keyed by path relative to the output directory.
#[derive(Debug, Default)]
pub struct ResultBundle {
    files: BTreeMap<String, Vec<u8>>,
    log: String,
}

impl ResultBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<String>, bytes: Vec<u8>) {
        let path = path.into();
        assert!(path != MANIFEST && path != LOG, "{path} is reserved");
        self.files.insert(path, bytes);
    }

    pub fn add_json<T: Serialize>(&mut self, path: impl Into<String>, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(path, bytes);
        Ok(())
    }

    /// Header plus rows; every field goes through the csv writer's quoting.
    pub fn add_csv<I, R>(&mut self, path: impl Into<String>, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        self.add(path, w.into_inner().context("flushing csv")?);
        Ok(())
    }

    /// Deterministic log lines; no timestamps so the log hashes stably.
    pub fn log(&mut self, line: impl AsRef<str>) {
        self.log.push_str(line.as_ref());
        self.log.push('\n');
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.get(path).map(Vec::as_slice)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Write every file, then the manifest last. Returns the manifest.
    pub fn commit(
        mut self,
        out: &Path,
        command: &str,
        seed: u64,
        config_hash: &str,
        wall_clock_s: f64,
    ) -> Result<Manifest> {
        self.files.insert(LOG.to_string(), std::mem::take(&mut self.log).into_bytes());
        let files: Vec<FileEntry> = self
            .files
            .iter()
            .map(|(p, b)| FileEntry {
                path: p.clone(),
                sha256: sha256_hex(b),
                bytes: b.len(),
            })
            .collect();
        let mut listing = String::new();
        for f in &files {
            writeln!(listing, "{}  {}", f.sha256, f.path).expect("writing to a String");
        }
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA,
            command: command.to_string(),
            cli_version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: nrcc_core::VERSION.to_string(),
            seed,
            config_hash: config_hash.to_string(),
            bundle_sha256: sha256_hex(listing.as_bytes()),
            wall_clock_s,
            files,
        };
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        for (p, b) in &self.files {
            write_atomic(&out.join(p), b)?;
        }
        let mut m = serde_json::to_vec_pretty(&manifest)?;
        m.push(b'\n');
        write_atomic(&out.join(MANIFEST), &m)?;
        Ok(manifest)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let name = path
        .file_name()
        .with_context(|| format!("{} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}
