//! On-disk artifacts shared by the subcommands. Every manifest records the
//! stage that wrote it, that stage's hash, the full config hash and the
//! resolved config itself.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use crstc::dsp::{read_matrix_bin, write_matrix_bin, FeatureMatrix};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Stage};
use crate::Failure;

pub const MANIFEST: &str = "manifest.json";
pub const MODEL_META: &str = "model.json";
pub const MODEL_CKPT: &str = "model.ckpt";
pub const BEST_CKPT: &str = "best.ckpt";
pub const LOSS_LOG: &str = "loss.csv";
pub const SEGMENTS: &str = "segments.json";
pub const FEATURE_EXT: &str = "feat";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub stage: Stage,
    pub stage_hash: String,
    pub config_hash: String,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(stage: Stage, cfg: &RunConfig) -> Self {
        Self {
            stage,
            stage_hash: cfg.stage_hash(stage),
            config_hash: cfg.hash(),
            config: cfg.clone(),
        }
    }

    /// Compares the recorded stage hash against `cfg`. With `force` a
    /// mismatch is only logged.
    pub fn check(&self, cfg: &RunConfig, artifact: &Path, force: bool) -> Result<(), Failure> {
        let expected = cfg.stage_hash(self.stage);
        if expected == self.stage_hash {
            return Ok(());
        }
        if force {
            log::warn!(
                "{}: config hash {} differs from the current {expected}; continuing because of --force",
                artifact.display(),
                self.stage_hash
            );
            return Ok(());
        }
        Err(Failure::HashMismatch {
            artifact: artifact.display().to_string(),
            found: self.stage_hash.clone(),
            expected,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

/// Manifest of a feature directory, written by `features` and `synth`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureManifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    /// `log-mel`, `mfcc` or `synthetic`.
    pub kind: String,
    pub files: Vec<FeatureEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub feature_dim: usize,
    pub sequences: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub final_loss: f64,
    pub best_loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub name: String,
    pub frames: usize,
    pub clusters: usize,
    pub events: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentManifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    /// How clusters were named cry / non-cry in the written events.
    pub mapping: String,
    /// Set when that naming used no ground truth.
    pub heuristic: bool,
    pub files: Vec<SegmentEntry>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("malformed {}", path.display()))
}

pub fn feature_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.{FEATURE_EXT}"))
}

pub fn write_features(dir: &Path, name: &str, m: &FeatureMatrix) -> Result<()> {
    let path = feature_path(dir, name);
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
    write_matrix_bin(&mut w, m).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

pub fn read_features(dir: &Path, entry: &FeatureEntry) -> Result<FeatureMatrix> {
    let path = feature_path(dir, &entry.name);
    let f = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let m = read_matrix_bin(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
    if (m.rows, m.cols) != (entry.rows, entry.cols) {
        anyhow::bail!(
            "{}: shape {}x{} disagrees with the manifest ({}x{})",
            path.display(),
            m.rows,
            m.cols,
            entry.rows,
            entry.cols
        );
    }
    Ok(m)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))
}

/// File name without directory or extension.
pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
