//! Artifact bundle: stamped output files and the manifest that lists them.
//!
//! Every CSV starts with `# key: value` lines carrying the config hash and
//! seed; every JSON document has `config_hash` and `seed` fields. Files are
//! written in a fixed order so a bundle is a pure function of its inputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use optospring::series::write_meta;

use crate::error::CliError;

pub const MANIFEST: &str = "MANIFEST.json";
pub const ERROR_FILE: &str = "error.json";
pub const SEED_RULE: &str = "entry seed = master seed XOR entry index";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub seed_rule: String,
    pub complete: bool,
    pub stages: Vec<Stage>,
    pub files: Vec<FileEntry>,
}

/// JSON payload wrapped with the bundle stamp.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_hash: String,
    pub seed: u64,
    #[serde(flatten)]
    pub data: T,
}

pub struct Bundle {
    root: PathBuf,
    config_hash: String,
    seed: u64,
    files: Vec<FileEntry>,
    stages: Vec<Stage>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Bundle {
    pub fn create(root: &Path, config_hash: &str, seed: u64) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        for stale in [MANIFEST, ERROR_FILE] {
            let p = root.join(stale);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| CliError::io(&p, e))?;
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            config_hash: config_hash.to_string(),
            seed,
            files: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stamp(&self) -> Vec<(&'static str, String)> {
        vec![
            ("config_hash", self.config_hash.clone()),
            ("seed", self.seed.to_string()),
            ("seed_rule", SEED_RULE.to_string()),
        ]
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Writes the resolved profile as `scenario.toml` under a comment stamp.
    pub fn write_profile(&mut self, toml_text: &str) -> Result<(), CliError> {
        let mut text = String::new();
        for (k, v) in self.stamp() {
            text.push_str(&format!("# {k}: {v}\n"));
        }
        text.push_str(toml_text);
        self.write_bytes("scenario.toml", text.as_bytes())
    }

    /// Writes a CSV whose body is produced by `body`; `extra` metadata lines
    /// follow the stamp.
    pub fn write_csv<F>(&mut self, rel: &str, extra: &[(&str, String)], body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>, &[(&str, String)]) -> std::io::Result<()>,
    {
        let mut meta: Vec<(&str, String)> = self.stamp();
        meta.extend(extra.iter().cloned());
        let mut buf = Vec::new();
        body(&mut buf, &meta).map_err(|e| CliError::io(&self.root.join(rel), e))?;
        self.write_bytes(rel, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, data: &T) -> Result<(), CliError> {
        let stamped = Stamped {
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            data,
        };
        let mut bytes = serde_json::to_vec_pretty(&stamped).expect("serializable");
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }

    pub fn stage(&mut self, name: &str, status: StageStatus, detail: Option<String>) {
        self.stages.push(Stage {
            name: name.to_string(),
            status,
            detail,
        });
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            seed_rule: SEED_RULE.to_string(),
            complete: self.stages.iter().all(|s| s.status == StageStatus::Ok),
            stages: self.stages.clone(),
            files: self.files.clone(),
        }
    }

    /// Writes `MANIFEST.json`; it is not listed in itself.
    pub fn finish(self) -> Result<Manifest, CliError> {
        let manifest = self.manifest();
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable");
        bytes.push(b'\n');
        let path = self.root.join(MANIFEST);
        fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

/// Writes `error.json` into `root`, creating it if needed.
pub fn write_error(root: &Path, record: &crate::error::ErrorRecord) -> Result<(), CliError> {
    fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let path = root.join(ERROR_FILE);
    let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut bytes = serde_json::to_vec_pretty(record).expect("serializable");
    bytes.push(b'\n');
    f.write_all(&bytes).map_err(|e| CliError::io(&path, e))
}

pub fn read_manifest(root: &Path) -> Result<Manifest, CliError> {
    let path = root.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::io(&path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
}

/// Writes a `# key: value` preamble followed by a header and rows.
pub fn write_table<W: Write>(out: &mut W, meta: &[(&str, String)], header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    write_meta(out, meta)?;
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
