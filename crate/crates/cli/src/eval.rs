//! `crstc eval`: score segmentations against ground truth.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use crstc::dsp::FrameGrid;
use crstc::metrics::{evaluate_corpus, write_summary_row, CorpusReport, FileOutcome};
use crstc::segmentation::{events_to_labels, labels_to_events, map_clusters_eval, read_events_csv, MappingMode};
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_json, write_json, Provenance, SegmentManifest, SEGMENTS};
use crate::config::{RunConfig, Stage};
use crate::segment::{clusters_path, events_path, postprocess, read_clusters};
use crate::truth::{load_truth, truth_frames};

pub const REPORT: &str = "report.json";
pub const SUMMARY: &str = "summary.csv";

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub segments_hash: String,
    pub mapping: MappingMode,
    /// True when clusters were named without ground truth.
    pub heuristic: bool,
    pub report: CorpusReport,
}

pub fn run(cfg: &RunConfig, seg_dir: &Path, truth_path: &Path, force: bool) -> Result<EvalReport> {
    let manifest_path = seg_dir.join(SEGMENTS);
    let segments: SegmentManifest = read_json(&manifest_path)?;
    segments.provenance.check(cfg, &manifest_path, force)?;
    let truth = load_truth(truth_path, &cfg.annotations)?;
    let seg_cfg = &segments.provenance.config;

    let mut grids = Vec::new();
    let mut truths = Vec::new();
    for entry in &segments.files {
        let t = truth
            .get(&entry.name)
            .with_context(|| format!("missing ground truth for `{}` in {}", entry.name, truth_path.display()))?;
        let grid = FrameGrid {
            frame_len_s: seg_cfg.grid.frame_len_s,
            n_frames: entry.frames,
        };
        truths.push(truth_frames(&entry.name, t, &grid)?);
        grids.push(grid);
    }

    let preds: Vec<Vec<u8>> = match cfg.metrics.mapping {
        MappingMode::Eval => {
            let clusters: Vec<Vec<usize>> = segments
                .files
                .iter()
                .map(|e| read_clusters(&clusters_path(seg_dir, &e.name)))
                .collect::<Result<_>>()?;
            let mappings = if seg_cfg.clustering.pooled {
                let m = map_clusters_eval(&clusters.concat(), &truths.concat())?;
                vec![m; clusters.len()]
            } else {
                clusters
                    .iter()
                    .zip(&truths)
                    .map(|(c, t)| Ok(map_clusters_eval(c, t)?))
                    .collect::<Result<Vec<_>>>()?
            };
            clusters
                .iter()
                .zip(&mappings)
                .zip(&grids)
                .map(|((c, m), g)| Ok(postprocess(c, m, g, &seg_cfg.segmentation)?.0))
                .collect::<Result<_>>()?
        }
        MappingMode::EnergyHeuristic => segments
            .files
            .iter()
            .zip(&grids)
            .map(|(e, g)| {
                let path = events_path(seg_dir, &e.name);
                let f = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
                let events =
                    read_events_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
                Ok(events_to_labels(&events, g)?)
            })
            .collect::<Result<_>>()?,
    };

    let outcomes: Vec<FileOutcome> = segments
        .files
        .iter()
        .zip(preds)
        .zip(truths)
        .zip(&grids)
        .map(|(((e, pred), truth), g)| FileOutcome {
            name: e.name.clone(),
            pred_events: labels_to_events(&pred, g.frame_len_s),
            truth_events: labels_to_events(&truth, g.frame_len_s),
            pred_frames: pred,
            truth_frames: truth,
        })
        .collect();
    if outcomes.is_empty() {
        bail!("{} lists no segmented files", manifest_path.display());
    }
    let report = evaluate_corpus(&outcomes, cfg.metrics.iou_threshold)?;
    Ok(EvalReport {
        provenance: Provenance::new(Stage::Eval, cfg),
        segments_hash: segments.provenance.stage_hash,
        mapping: cfg.metrics.mapping,
        heuristic: cfg.metrics.mapping == MappingMode::EnergyHeuristic,
        report,
    })
}

/// Writes `report.json` and a one-row `summary.csv` into `out`.
pub fn write_outputs(report: &EvalReport, out: &Path, run_name: &str) -> Result<()> {
    crate::artifacts::create_dir(out)?;
    write_json(&out.join(REPORT), report)?;
    let path = out.join(SUMMARY);
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
    write_summary_row(&mut w, run_name, &report.provenance.config_hash, &report.report, true)?;
    w.flush()?;
    Ok(())
}
