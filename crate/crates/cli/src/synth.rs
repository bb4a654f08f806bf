//! `crstc synth`: a synthetic dataset in the feature-directory layout, plus
//! per-frame domain labels.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use crstc::dsp::FeatureMatrix;
use crstc::synthgen::generate;

use crate::artifacts::{create_dir, write_features, write_json, FeatureEntry, FeatureManifest, Provenance, MANIFEST};
use crate::config::{RunConfig, Stage};

pub const SYNTHETIC_KIND: &str = "synthetic";

pub fn run(cfg: &RunConfig, out: &Path) -> Result<FeatureManifest> {
    let (_, seqs) = generate(&cfg.synth)?;
    create_dir(out)?;
    let mut files = Vec::with_capacity(seqs.len());
    for (i, seq) in seqs.iter().enumerate() {
        let name = format!("seq_{i:04}");
        let m = FeatureMatrix::new(seq.x.len(), cfg.synth.obs_dim, seq.x.concat())?;
        write_features(out, &name, &m)?;
        let path = out.join(format!("{name}.labels.csv"));
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
        writeln!(w, "frame,u")?;
        for (t, u) in seq.u.iter().enumerate() {
            writeln!(w, "{t},{u}")?;
        }
        w.flush()?;
        files.push(FeatureEntry {
            name,
            rows: m.rows,
            cols: m.cols,
        });
    }
    let manifest = FeatureManifest {
        provenance: Provenance::new(Stage::Synth, cfg),
        kind: SYNTHETIC_KIND.into(),
        files,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    log::info!(
        "wrote {} synthetic sequences to {}",
        manifest.files.len(),
        out.display()
    );
    Ok(manifest)
}
