//! `crstc features`: WAV directory to one feature matrix per clip.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use crstc::dsp::{extract_features, pad_or_trim, read_wav, resample};
use rayon::prelude::*;

use crate::artifacts::{
    create_dir, stem, write_features, write_json, FeatureEntry, FeatureManifest, Provenance, MANIFEST,
};
use crate::config::{RunConfig, Stage};

fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut wavs: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    wavs.sort();
    Ok(wavs)
}

fn process(path: &Path, cfg: &RunConfig, out: &Path) -> Result<FeatureEntry> {
    let clip = read_wav(path)?;
    let clip = if clip.sample_rate == cfg.features.sample_rate {
        clip
    } else {
        resample(&clip, cfg.features.sample_rate)?
    };
    let clip = pad_or_trim(&clip, cfg.grid.clip_len_s())?;
    let seq = extract_features(&clip, &cfg.grid, &cfg.features)?;
    let name = stem(path);
    write_features(out, &name, &seq.frames)?;
    Ok(FeatureEntry {
        name,
        rows: seq.frames.rows,
        cols: seq.frames.cols,
    })
}

pub fn run(cfg: &RunConfig, wav_dir: &Path, out: &Path) -> Result<FeatureManifest> {
    let wavs = list_wavs(wav_dir)?;
    create_dir(out)?;
    let files = wavs
        .par_iter()
        .map(|p| process(p, cfg, out).with_context(|| format!("{}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let kind = serde_json::to_value(cfg.features.kind)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let manifest = FeatureManifest {
        provenance: Provenance::new(Stage::Features, cfg),
        kind,
        files,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    log::info!("wrote {} feature matrices to {}", manifest.files.len(), out.display());
    Ok(manifest)
}
