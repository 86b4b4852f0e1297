use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use survey_dcn::rng::derive_seed;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".survey-dcn.lock";

/// Content hash in git's object style: SHA-256 over `blob <len>\0<bytes>`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub hash: String,
}

impl FileEntry {
    fn of(path: &Path, shown: String) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| survey_dcn::Error::io(path, e))?;
        Ok(FileEntry {
            path: shown,
            bytes: bytes.len() as u64,
            hash: content_hash(&bytes),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    pub sub_seeds: BTreeMap<String, u64>,
    pub config: RunConfig,
    pub inputs: Vec<FileEntry>,
    pub artifacts: Vec<FileEntry>,
    pub summary: BTreeMap<String, Value>,
    pub wall_seconds: f64,
}

/// The binary payload named by a JSON manifest's `payload` field, if present.
pub fn companion_payload(manifest: &Path) -> Option<PathBuf> {
    if manifest.extension().and_then(|e| e.to_str()) != Some("json") {
        return None;
    }
    let text = fs::read_to_string(manifest).ok()?;
    let value: Value = serde_json::from_str(&text).ok()?;
    let path = manifest.with_file_name(value.get("payload")?.as_str()?);
    path.is_file().then_some(path)
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| survey_dcn::Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Busy(format!(
                "{} exists; another run is writing to {} (remove the file if that run died)",
                path.display(),
                dir.display()
            ))),
            Err(e) => Err(survey_dcn::Error::io(&path, e).into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// What a subcommand read, wrote and derived, collected for the manifest.
#[derive(Debug)]
pub struct RunContext {
    out: PathBuf,
    artifacts: Vec<String>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    sub_seeds: BTreeMap<String, u64>,
    summary: BTreeMap<String, Value>,
}

impl RunContext {
    pub fn new(out: PathBuf, seed: Option<u64>) -> Self {
        RunContext {
            out,
            artifacts: Vec::new(),
            seed,
            inputs: Vec::new(),
            sub_seeds: BTreeMap::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    /// Path of an artifact inside the output directory; the file is listed
    /// in the manifest, together with its binary payload if it is a
    /// manifest-plus-payload file.
    pub fn artifact(&mut self, name: &str) -> PathBuf {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        self.out.join(name)
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Records the sub-seed a component derives from the run seed under `tag`.
    pub fn sub_seed(&mut self, tag: &str) -> u64 {
        let value = derive_seed(self.seed.unwrap_or_default(), tag);
        self.sub_seeds.insert(tag.to_string(), value);
        value
    }

    pub fn summarize(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    pub fn summary(&self) -> &BTreeMap<String, Value> {
        &self.summary
    }

    /// Hashes the inputs and every artifact this run wrote, then writes the manifest.
    pub fn finish(self, subcommand: &str, config: &RunConfig, wall_seconds: f64) -> CliResult<RunManifest> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| FileEntry::of(p, p.display().to_string()))
            .collect::<CliResult<Vec<_>>>()?;
        let mut names = Vec::new();
        for name in &self.artifacts {
            let path = self.out.join(name);
            if !path.is_file() {
                continue;
            }
            names.push(name.clone());
            if let Some(payload) = companion_payload(&path) {
                names.extend(payload.file_name().and_then(|n| n.to_str()).map(String::from));
            }
        }
        names.sort();
        names.dedup();
        let artifacts = names
            .into_iter()
            .map(|n| FileEntry::of(&self.out.join(&n), n))
            .collect::<CliResult<Vec<_>>>()?;
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            sub_seeds: self.sub_seeds,
            config: config.clone(),
            inputs,
            artifacts,
            summary: self.summary,
            wall_seconds,
        };
        let path = self.out.join(MANIFEST_FILE);
        let file = File::create(&path).map_err(|e| survey_dcn::Error::io(&path, e))?;
        serde_json::to_writer_pretty(file, &manifest).map_err(survey_dcn::Error::from)?;
        Ok(manifest)
    }
}
