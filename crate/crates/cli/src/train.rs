//! `crstc train`: fit the ST-VAE on a feature directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use crstc::stvae::{train, write_loss_log, Stvae};
use crstc::tensor::Tensor;
use rayon::prelude::*;

use crate::artifacts::{
    create_dir, read_features, read_json, write_json, FeatureManifest, ModelMeta, Provenance, BEST_CKPT, LOSS_LOG,
    MANIFEST, MODEL_CKPT, MODEL_META,
};
use crate::config::{RunConfig, Stage};

/// Loads every matrix of a feature directory after checking its hash.
pub fn load_feature_dir(cfg: &RunConfig, dir: &Path, force: bool) -> Result<(FeatureManifest, Vec<Tensor>)> {
    let path = dir.join(MANIFEST);
    let manifest: FeatureManifest = read_json(&path)?;
    manifest.provenance.check(cfg, &path, force)?;
    let data = manifest
        .files
        .par_iter()
        .map(|e| {
            let m = read_features(dir, e)?;
            Ok(Tensor::from_matrix(m.rows, m.cols, m.data)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, data))
}

fn save(model: &Stvae, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    model.save_params(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn run(cfg: &RunConfig, feature_dir: &Path, out: &Path, force: bool) -> Result<ModelMeta> {
    let (_, data) = load_feature_dir(cfg, feature_dir, force)?;
    let Some(first) = data.first() else {
        bail!("{} holds no feature matrices", feature_dir.display());
    };
    let feature_dim = first.cols();
    if let Some(bad) = data.iter().find(|d| d.cols() != feature_dim) {
        bail!("feature dimension mismatch: {} vs {}", bad.cols(), feature_dim);
    }
    let outcome = train(&data, &cfg.stvae)?;
    create_dir(out)?;
    save(&outcome.final_model, &out.join(MODEL_CKPT))?;
    save(&outcome.best_model, &out.join(BEST_CKPT))?;
    let log_path = out.join(LOSS_LOG);
    let mut w =
        BufWriter::new(File::create(&log_path).with_context(|| format!("cannot create {}", log_path.display()))?);
    write_loss_log(&mut w, &outcome.log)?;
    w.flush()?;
    let loss_at = |epoch: usize| outcome.log[epoch - 1].loss.total;
    let meta = ModelMeta {
        provenance: Provenance::new(Stage::Train, cfg),
        feature_dim,
        sequences: data.len(),
        epochs: outcome.log.len(),
        best_epoch: outcome.best_epoch,
        final_loss: loss_at(outcome.log.len()),
        best_loss: loss_at(outcome.best_epoch),
    };
    write_json(&out.join(MODEL_META), &meta)?;
    log::info!(
        "trained {} epochs on {} sequences; final loss {:.4}, best {:.4} at epoch {}",
        meta.epochs,
        meta.sequences,
        meta.final_loss,
        meta.best_loss,
        meta.best_epoch
    );
    Ok(meta)
}
