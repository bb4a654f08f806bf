//! Run configuration: one TOML file mirroring every module default, plus
//! `--set section.key=value` overrides, and the hashes that tie artifacts to
//! the configuration that produced them.

use std::path::Path;

use crstc::annotations::LabelVocabulary;
use crstc::clustering::{Method, DEFAULT_K_CANDIDATES};
use crstc::dsp::{FeatureConfig, FrameGrid};
use crstc::metrics::DEFAULT_IOU_THRESHOLD;
use crstc::segmentation::MappingMode;
use crstc::stvae::StvaeConfig;
use crstc::synthgen::SynthConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub method: Method,
    pub k: usize,
    /// Pick k from `candidates` by silhouette instead of using `k`.
    pub auto_k: bool,
    pub candidates: Vec<usize>,
    /// Mean-shift bandwidth; 0 selects half the median pairwise distance.
    pub bandwidth: f64,
    /// Cluster all files together instead of one file at a time.
    pub pooled: bool,
    pub seed: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            method: Method::Kmeans,
            k: 2,
            auto_k: false,
            candidates: DEFAULT_K_CANDIDATES.to_vec(),
            bandwidth: 0.0,
            pooled: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub smooth_window: usize,
    pub min_event_s: f64,
    pub max_gap_s: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            smooth_window: 5,
            min_event_s: 0.1,
            max_gap_s: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub iou_threshold: f64,
    /// `eval` names clusters against the ground truth; `energy-heuristic`
    /// scores the events written by `segment` as they are.
    pub mapping: MappingMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            mapping: MappingMode::Eval,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationConfig {
    pub vocabulary: LabelVocabulary,
    /// TextGrid tier to read; the first interval tier when absent.
    pub tier: Option<String>,
    pub train_frac: f64,
    pub split_seed: u64,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            vocabulary: LabelVocabulary::default(),
            tier: None,
            train_frac: 0.8,
            split_seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: FrameGrid,
    pub features: FeatureConfig,
    pub synth: SynthConfig,
    pub stvae: StvaeConfig,
    pub clustering: ClusteringConfig,
    pub segmentation: SegmentationConfig,
    pub metrics: MetricsConfig,
    pub annotations: AnnotationConfig,
}

/// Pipeline stages, each hashed over the sections that can change its output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Features,
    Synth,
    Train,
    Segment,
    Eval,
    Aggregate,
}

impl Stage {
    fn sections(self) -> &'static [&'static str] {
        match self {
            Stage::Features => &["grid", "features"],
            Stage::Synth => &["grid", "synth"],
            Stage::Train => &["grid", "features", "synth", "stvae"],
            Stage::Segment => &["grid", "features", "synth", "stvae", "clustering", "segmentation"],
            Stage::Eval => &[
                "grid",
                "features",
                "synth",
                "stvae",
                "clustering",
                "segmentation",
                "metrics",
                "annotations",
            ],
            Stage::Aggregate => &["grid", "annotations"],
        }
    }
}

fn digest(value: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(value).expect("JSON values always serialize");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies `key=value`
    /// overrides, then `seed` to every seed field.
    pub fn resolve(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self, Failure> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Failure::Config(e.to_string()))?;
        if let Some(s) = seed {
            cfg.synth.seed = s;
            cfg.stvae.seed = s;
            cfg.clustering.seed = s;
            cfg.annotations.split_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::Config(m));
        self.grid.validate().map_err(|e| Failure::Config(e.to_string()))?;
        self.synth.validate().map_err(|e| Failure::Config(e.to_string()))?;
        self.stvae.validate().map_err(|e| Failure::Config(e.to_string()))?;
        if self.clustering.k < 1 {
            return bad("clustering.k must be >= 1".into());
        }
        if self.clustering.bandwidth.is_nan() || self.clustering.bandwidth < 0.0 {
            return bad("clustering.bandwidth must be >= 0".into());
        }
        if self.segmentation.smooth_window.is_multiple_of(2) {
            return bad(format!(
                "segmentation.smooth_window must be odd, got {}",
                self.segmentation.smooth_window
            ));
        }
        if !(self.segmentation.min_event_s >= 0.0 && self.segmentation.max_gap_s >= 0.0) {
            return bad("segmentation durations must be >= 0".into());
        }
        let t = self.metrics.iou_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return bad(format!("metrics.iou_threshold must lie in (0, 1], got {t}"));
        }
        let f = self.annotations.train_frac;
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("annotations.train_frac must lie in (0, 1), got {f}"));
        }
        Ok(())
    }

    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config always serializes")
    }

    /// Hash of the whole resolved configuration.
    pub fn hash(&self) -> String {
        digest(&self.json())
    }

    /// Hash of the sections that feed `stage`.
    pub fn stage_hash(&self, stage: Stage) -> String {
        let all = self.json();
        let picked: serde_json::Map<String, serde_json::Value> = stage
            .sections()
            .iter()
            .map(|s| (s.to_string(), all[*s].clone()))
            .collect();
        digest(&serde_json::Value::Object(picked))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes to TOML")
    }
}

/// `a.b.c=value`; the value is parsed as a TOML literal and falls back to a
/// bare string.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), Failure> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("override `{assignment}` is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut node = table;
    for p in path {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Failure::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
