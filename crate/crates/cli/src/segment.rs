//! `crstc segment`: transition embeddings, clustering, smoothing and
//! energy-based naming of clusters, written as per-clip event lists.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crstc::clustering::{bisecting_kmeans, default_bandwidth, kmeans, mean_shift, select_k, zscore, Method};
use crstc::dsp::{frame_log_energy, FeatureKind, FeatureMatrix, FrameGrid};
use crstc::segmentation::{
    events_to_labels, labels_to_events, map_clusters_energy, min_duration_filter, smooth, write_events_csv,
    write_events_json, ClusterMapping, Event,
};
use crstc::stvae::{extract_embeddings, Stvae};
use rayon::prelude::*;
use serde::Deserialize;

use crate::artifacts::{
    create_dir, read_json, write_json, ModelMeta, Provenance, SegmentEntry, SegmentManifest, MODEL_CKPT, MODEL_META,
};
use crate::config::{ClusteringConfig, RunConfig, SegmentationConfig, Stage};
use crate::train::load_feature_dir;

const MEAN_SHIFT_MAX_ITER: usize = 300;

pub fn clusters_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.clusters.csv"))
}

pub fn events_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.events.csv"))
}

/// Cluster ids for standardized copies of `points`.
pub fn cluster(points: &[Vec<f64>], cfg: &ClusteringConfig) -> Result<Vec<usize>> {
    let scaled = zscore(points);
    let k = if cfg.auto_k {
        select_k(&scaled, &cfg.candidates, cfg.seed)?
    } else {
        cfg.k
    };
    let result = match cfg.method {
        Method::Kmeans => kmeans(&scaled, k, cfg.seed)?,
        Method::Bisecting => bisecting_kmeans(&scaled, k, cfg.seed)?,
        Method::MeanShift => {
            let bw = if cfg.bandwidth > 0.0 {
                cfg.bandwidth
            } else {
                default_bandwidth(&scaled)?
            };
            mean_shift(&scaled, bw, MEAN_SHIFT_MAX_ITER)?
        }
    };
    Ok(result.labels)
}

/// Cluster labels to binary frames and events: name clusters, assemble
/// events, merge gaps and drop short events, then re-grid.
pub fn postprocess(
    clusters: &[usize],
    mapping: &ClusterMapping,
    grid: &FrameGrid,
    seg: &SegmentationConfig,
) -> Result<(Vec<u8>, Vec<Event>)> {
    let binary = mapping.apply(clusters);
    let events = labels_to_events(&binary, grid.frame_len_s);
    let events = min_duration_filter(&events, seg.min_event_s, seg.max_gap_s);
    let frames = events_to_labels(&events, grid)?;
    Ok((frames, events))
}

pub fn write_clusters(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    writeln!(w, "frame,cluster")?;
    for (t, c) in labels.iter().enumerate() {
        writeln!(w, "{t},{c}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ClusterRow {
    frame: usize,
    cluster: usize,
}

pub fn read_clusters(path: &Path) -> Result<Vec<usize>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(f));
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ClusterRow>().enumerate() {
        let row = row.with_context(|| format!("{} row {}", path.display(), i + 1))?;
        if row.frame != i {
            bail!(
                "{} row {}: expected frame {i}, found {}",
                path.display(),
                i + 1,
                row.frame
            );
        }
        out.push(row.cluster);
    }
    Ok(out)
}

fn write_events(dir: &Path, name: &str, events: &[Event]) -> Result<()> {
    let csv_path = events_path(dir, name);
    let mut w =
        BufWriter::new(File::create(&csv_path).with_context(|| format!("cannot create {}", csv_path.display()))?);
    write_events_csv(&mut w, events)?;
    w.flush()?;
    let json_path = dir.join(format!("{name}.events.json"));
    let mut w =
        BufWriter::new(File::create(&json_path).with_context(|| format!("cannot create {}", json_path.display()))?);
    write_events_json(&mut w, events)?;
    w.flush()?;
    Ok(())
}

/// Frame energies used to name clusters; synthetic data falls back to the
/// log-mel rule (log-sum-exp of each row).
fn energies(m: &FeatureMatrix, kind: &str) -> Vec<f64> {
    let kind = if kind == "mfcc" {
        FeatureKind::Mfcc
    } else {
        FeatureKind::LogMel
    };
    frame_log_energy(m, kind)
}

pub fn run(cfg: &RunConfig, feature_dir: &Path, model_dir: &Path, out: &Path, force: bool) -> Result<SegmentManifest> {
    let meta_path = model_dir.join(MODEL_META);
    let meta: ModelMeta = read_json(&meta_path)?;
    meta.provenance.check(cfg, &meta_path, force)?;
    let ckpt = model_dir.join(MODEL_CKPT);
    let f = File::open(&ckpt).with_context(|| format!("cannot open {}", ckpt.display()))?;
    let model = Stvae::load_params(
        meta.provenance.config.stvae.clone(),
        meta.feature_dim,
        BufReader::new(f),
    )
    .with_context(|| format!("loading {}", ckpt.display()))?;

    let (manifest, data) = load_feature_dir(cfg, feature_dir, force)?;
    for (entry, d) in manifest.files.iter().zip(&data) {
        if d.cols() != meta.feature_dim {
            bail!(
                "checkpoint/feature dimension mismatch: `{}` has {} columns, the model expects {}",
                entry.name,
                d.cols(),
                meta.feature_dim
            );
        }
    }
    let embeddings = data
        .par_iter()
        .map(|d| Ok(extract_embeddings(&model, d)?.points()))
        .collect::<Result<Vec<_>>>()?;
    let energy: Vec<Vec<f64>> = data
        .iter()
        .map(|d| {
            let m = FeatureMatrix::new(d.rows(), d.cols(), d.data().to_vec()).expect("tensor shape is consistent");
            energies(&m, &manifest.kind)
        })
        .collect();

    let smoothed: Vec<Vec<usize>> = if cfg.clustering.pooled {
        let all: Vec<Vec<f64>> = embeddings.concat();
        let labels = cluster(&all, &cfg.clustering)?;
        let mut offset = 0;
        embeddings
            .iter()
            .map(|e| {
                let part = &labels[offset..offset + e.len()];
                offset += e.len();
                Ok(smooth(part, cfg.segmentation.smooth_window)?)
            })
            .collect::<Result<_>>()?
    } else {
        embeddings
            .par_iter()
            .map(|e| Ok(smooth(&cluster(e, &cfg.clustering)?, cfg.segmentation.smooth_window)?))
            .collect::<Result<_>>()?
    };
    let mappings: Vec<ClusterMapping> = if cfg.clustering.pooled {
        let mapping = map_clusters_energy(&smoothed.concat(), &energy.concat())?;
        vec![mapping; smoothed.len()]
    } else {
        smoothed
            .iter()
            .zip(&energy)
            .map(|(l, e)| Ok(map_clusters_energy(l, e)?))
            .collect::<Result<_>>()?
    };

    create_dir(out)?;
    let mut files = Vec::with_capacity(smoothed.len());
    for ((entry, labels), mapping) in manifest.files.iter().zip(&smoothed).zip(&mappings) {
        let grid = FrameGrid {
            frame_len_s: cfg.grid.frame_len_s,
            n_frames: labels.len(),
        };
        let (_, events) = postprocess(labels, mapping, &grid, &cfg.segmentation)?;
        write_clusters(&clusters_path(out, &entry.name), labels)?;
        write_events(out, &entry.name, &events)?;
        files.push(SegmentEntry {
            name: entry.name.clone(),
            frames: labels.len(),
            clusters: labels.iter().max().map_or(0, |m| m + 1),
            events: events.len(),
        });
    }
    let manifest = SegmentManifest {
        provenance: Provenance::new(Stage::Segment, cfg),
        mapping: "energy-heuristic".into(),
        heuristic: true,
        files,
    };
    write_json(&out.join(crate::artifacts::SEGMENTS), &manifest)?;
    log::info!("segmented {} files into {}", manifest.files.len(), out.display());
    Ok(manifest)
}
