//! Ground-truth loading for `eval` and `aggregate`.
//!
//! A truth source is either an annotation CSV (`file,onset_s,offset_s,label`)
//! or a directory holding, per clip, one of `<name>.TextGrid`,
//! `<name>.events.csv` or a synthetic `<name>.labels.csv` (`frame,u`).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use crstc::annotations::{parse_csv_annotations, parse_textgrid_bytes, tier_events};
use crstc::dsp::FrameGrid;
use crstc::segmentation::{events_to_labels, read_events_csv, Event, CRY, NON_CRY};
use serde::Deserialize;

use crate::artifacts::stem;
use crate::config::AnnotationConfig;

#[derive(Clone, Debug, PartialEq)]
pub enum Truth {
    Events(Vec<Event>),
    Frames(Vec<u8>),
}

#[derive(Deserialize)]
struct DomainRow {
    frame: usize,
    u: usize,
}

fn read_domain_labels(path: &Path) -> Result<Vec<u8>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<DomainRow>().enumerate() {
        let row = row.with_context(|| format!("{} row {}", path.display(), i + 1))?;
        if row.frame != i {
            bail!(
                "{} row {}: expected frame {i}, found {}",
                path.display(),
                i + 1,
                row.frame
            );
        }
        out.push(if row.u == 0 { NON_CRY } else { CRY });
    }
    Ok(out)
}

fn cry_only(events: Vec<Event>) -> Vec<Event> {
    events.into_iter().filter(|e| e.label == CRY).collect()
}

fn load_entry(path: &Path, cfg: &AnnotationConfig) -> Result<Option<(String, Truth)>> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let lower = name.to_ascii_lowercase();
    if let Some(base) = lower.strip_suffix(".labels.csv").map(|b| name[..b.len()].to_string()) {
        return Ok(Some((base, Truth::Frames(read_domain_labels(path)?))));
    }
    if let Some(base) = lower.strip_suffix(".events.csv").map(|b| name[..b.len()].to_string()) {
        let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let events = read_events_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
        return Ok(Some((base, Truth::Events(cry_only(events)))));
    }
    if lower.ends_with(".textgrid") {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let tg = parse_textgrid_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))?;
        let tier = tg.tier(cfg.tier.as_deref()).with_context(|| match &cfg.tier {
            Some(t) => format!("{}: no interval tier named \"{t}\"", path.display()),
            None => format!("{}: no interval tier", path.display()),
        })?;
        return Ok(Some((stem(path), Truth::Events(tier_events(tier, &cfg.vocabulary)))));
    }
    Ok(None)
}

pub fn load_truth(path: &Path, cfg: &AnnotationConfig) -> Result<BTreeMap<String, Truth>> {
    let mut out = BTreeMap::new();
    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)
            .with_context(|| format!("cannot list {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for p in entries.iter().filter(|p| p.is_file()) {
            if let Some((name, truth)) = load_entry(p, cfg)? {
                if out.insert(name.clone(), truth).is_some() {
                    bail!("{}: more than one ground-truth file for `{name}`", path.display());
                }
            }
        }
    } else {
        let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let by_file = parse_csv_annotations(BufReader::new(f), &cfg.vocabulary)
            .with_context(|| format!("reading {}", path.display()))?;
        for (file, events) in by_file {
            out.insert(stem(Path::new(&file)), Truth::Events(cry_only(events)));
        }
    }
    Ok(out)
}

/// Frame labels on `grid`. Events past the clip end are cut at the clip
/// boundary, as clips are padded or trimmed to the grid length.
pub fn truth_frames(name: &str, truth: &Truth, grid: &FrameGrid) -> Result<Vec<u8>> {
    match truth {
        Truth::Frames(f) => {
            if f.len() != grid.n_frames {
                bail!(
                    "ground truth for `{name}` has {} frames, expected {}",
                    f.len(),
                    grid.n_frames
                );
            }
            Ok(f.clone())
        }
        Truth::Events(events) => {
            let end = grid.clip_len_s();
            let clipped: Vec<Event> = events
                .iter()
                .filter(|e| e.onset_s < end)
                .map(|e| Event {
                    offset_s: e.offset_s.min(end),
                    ..*e
                })
                .collect();
            events_to_labels(&clipped, grid).with_context(|| format!("ground truth for `{name}`"))
        }
    }
}
