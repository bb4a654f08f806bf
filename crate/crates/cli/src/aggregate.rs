//! `crstc aggregate`: majority vote across annotators, plus a seeded
//! train/test split of the voted clips.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crstc::annotations::{majority_vote, split};
use crstc::segmentation::{labels_to_events, CRY};
use serde::{Deserialize, Serialize};

use crate::artifacts::{create_dir, write_json, Provenance};
use crate::config::{RunConfig, Stage};
use crate::truth::{load_truth, truth_frames};

pub const VOTES: &str = "votes.csv";
pub const AGGREGATE: &str = "aggregate.json";
pub const SPLIT: &str = "split.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct VotedFile {
    pub name: String,
    pub frames: usize,
    pub cry_frames: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AggregateManifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub annotators: Vec<PathBuf>,
    pub files: Vec<VotedFile>,
}

pub fn run(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<AggregateManifest> {
    if inputs.is_empty() {
        bail!("aggregate needs at least one annotator");
    }
    let sources = inputs
        .iter()
        .map(|p| load_truth(p, &cfg.annotations))
        .collect::<Result<Vec<_>>>()?;
    let names: BTreeSet<&String> = sources.iter().flat_map(|s| s.keys()).collect();
    let mut voted: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for name in names {
        let per_annotator = sources
            .iter()
            .zip(inputs)
            .map(|(s, p)| {
                let t = s
                    .get(name)
                    .with_context(|| format!("annotator {} has no annotation for `{name}`", p.display()))?;
                truth_frames(name, t, &cfg.grid)
            })
            .collect::<Result<Vec<_>>>()?;
        voted.insert(name.clone(), majority_vote(&per_annotator)?);
    }

    create_dir(out)?;
    let path = out.join(VOTES);
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
    writeln!(w, "file,onset_s,offset_s,label")?;
    for (name, labels) in &voted {
        for e in labels_to_events(labels, cfg.grid.frame_len_s) {
            writeln!(w, "{name},{},{},{}", e.onset_s, e.offset_s, e.label)?;
        }
    }
    w.flush()?;

    let ids: Vec<String> = voted.keys().cloned().collect();
    if !ids.is_empty() {
        write_json(
            &out.join(SPLIT),
            &split(&ids, cfg.annotations.train_frac, cfg.annotations.split_seed)?,
        )?;
    }
    let manifest = AggregateManifest {
        provenance: Provenance::new(Stage::Aggregate, cfg),
        annotators: inputs.to_vec(),
        files: voted
            .iter()
            .map(|(name, l)| VotedFile {
                name: name.clone(),
                frames: l.len(),
                cry_frames: l.iter().filter(|&&v| v == CRY).count(),
            })
            .collect(),
    };
    write_json(&out.join(AGGREGATE), &manifest)?;
    Ok(manifest)
}
