//! From per-frame cluster labels to binary cry events: majority smoothing,
//! cluster-to-class mapping, run extraction and duration filtering.
//!
//! Class labels are `u8` with 1 = cry and 0 = non-cry; cluster labels are
//! `usize`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::FrameGrid;

/// Float slack for comparisons against frame-grid boundaries.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("smoothing window must be odd and >= 1, got {0}")]
    EvenWindow(usize),
    #[error("reference length {got} does not match {expected} frames")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{0} clusters exceed the exhaustive mapping limit of 8")]
    TooManyClusters(usize),
    #[error("event [{onset}, {offset}] lies outside the clip [0, {clip}] or is empty")]
    OutOfClip { onset: f64, offset: f64, clip: f64 },
    #[error("event file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SegmentError>;

pub const CRY: u8 = 1;
pub const NON_CRY: u8 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub onset_s: f64,
    pub offset_s: f64,
    pub label: u8,
}

impl Event {
    pub fn cry(onset_s: f64, offset_s: f64) -> Self {
        Self {
            onset_s,
            offset_s,
            label: CRY,
        }
    }

    pub fn duration(&self) -> f64 {
        self.offset_s - self.onset_s
    }
}

/// Centered majority vote. Windows are truncated at the edges; when the
/// top count is shared the frame keeps its own label.
pub fn smooth(labels: &[usize], window: usize) -> Result<Vec<usize>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(SegmentError::EvenWindow(window));
    }
    let half = window / 2;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    Ok((0..labels.len())
        .map(|i| {
            counts.iter_mut().for_each(|c| *c = 0);
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(labels.len());
            labels[lo..hi].iter().for_each(|&l| counts[l] += 1);
            let top = *counts.iter().max().expect("k >= 1");
            let mut winners = (0..k).filter(|&c| counts[c] == top);
            match (winners.next(), winners.next()) {
                (Some(only), None) => only,
                _ => labels[i],
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingMode {
    /// Uses ground truth; for evaluation only.
    Eval,
    /// Clusters louder than the median frame are cry.
    EnergyHeuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterMapping {
    pub mode: MappingMode,
    /// Class for each cluster id.
    pub classes: Vec<u8>,
}

impl ClusterMapping {
    pub fn apply(&self, labels: &[usize]) -> Vec<u8> {
        labels
            .iter()
            .map(|&l| self.classes.get(l).copied().unwrap_or(NON_CRY))
            .collect()
    }
}

/// Cluster-to-class assignment with the highest frame accuracy against
/// `reference`, searched over all `2^k` assignments. Ties go to the
/// assignment whose bitmask (bit c = cluster c is cry) is smallest.
pub fn map_clusters_eval(labels: &[usize], reference: &[u8]) -> Result<ClusterMapping> {
    if labels.len() != reference.len() {
        return Err(SegmentError::LengthMismatch {
            expected: labels.len(),
            got: reference.len(),
        });
    }
    let k = labels.iter().max().map_or(1, |m| m + 1);
    if k > 8 {
        return Err(SegmentError::TooManyClusters(k));
    }
    let correct = |mask: u32| {
        labels
            .iter()
            .zip(reference)
            .filter(|(&l, &r)| ((mask >> l) & 1) as u8 == r)
            .count()
    };
    let mut best = (0u32, correct(0));
    for mask in 1u32..(1 << k) {
        let c = correct(mask);
        if c > best.1 {
            best = (mask, c);
        }
    }
    Ok(ClusterMapping {
        mode: MappingMode::Eval,
        classes: (0..k).map(|c| ((best.0 >> c) & 1) as u8).collect(),
    })
}

/// Clusters whose mean frame energy exceeds the median over all frames map
/// to cry.
pub fn map_clusters_energy(labels: &[usize], energy: &[f64]) -> Result<ClusterMapping> {
    if labels.len() != energy.len() {
        return Err(SegmentError::LengthMismatch {
            expected: labels.len(),
            got: energy.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    if labels.is_empty() {
        return Ok(ClusterMapping {
            mode: MappingMode::EnergyHeuristic,
            classes: vec![],
        });
    }
    let mut sorted = energy.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (&l, &e) in labels.iter().zip(energy) {
        sum[l] += e;
        count[l] += 1;
    }
    let classes = (0..k)
        .map(|c| {
            if count[c] > 0 && sum[c] / count[c] as f64 > median {
                CRY
            } else {
                NON_CRY
            }
        })
        .collect();
    Ok(ClusterMapping {
        mode: MappingMode::EnergyHeuristic,
        classes,
    })
}

/// Maximal runs of cry frames as events on the frame grid.
pub fn labels_to_events(labels: &[u8], frame_len_s: f64) -> Vec<Event> {
    let mut events = Vec::new();
    let mut start = None;
    for (i, &l) in labels.iter().chain(std::iter::once(&NON_CRY)).enumerate() {
        match (l == CRY, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                events.push(Event::cry(s as f64 * frame_len_s, i as f64 * frame_len_s));
                start = None;
            }
            _ => {}
        }
    }
    events
}

fn union(events: &[Event]) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = events
        .iter()
        .filter(|e| e.label == CRY)
        .map(|e| (e.onset_s, e.offset_s))
        .collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// A frame is cry iff cry events cover at least half of it.
pub fn events_to_labels(events: &[Event], grid: &FrameGrid) -> Result<Vec<u8>> {
    let clip = grid.clip_len_s();
    for e in events {
        if !(e.onset_s >= -GRID_EPS && e.offset_s <= clip + GRID_EPS && e.onset_s < e.offset_s) {
            return Err(SegmentError::OutOfClip {
                onset: e.onset_s,
                offset: e.offset_s,
                clip,
            });
        }
    }
    let cover = union(events);
    let f = grid.frame_len_s;
    Ok((0..grid.n_frames)
        .map(|i| {
            let (lo, hi) = (i as f64 * f, (i + 1) as f64 * f);
            let covered: f64 = cover.iter().map(|&(a, b)| (b.min(hi) - a.max(lo)).max(0.0)).sum();
            if covered >= 0.5 * f - GRID_EPS {
                CRY
            } else {
                NON_CRY
            }
        })
        .collect())
}

/// Merges same-label events separated by less than `max_gap_s`, then drops
/// events shorter than `min_s`.
pub fn min_duration_filter(events: &[Event], min_s: f64, max_gap_s: f64) -> Vec<Event> {
    let mut sorted = events.to_vec();
    sorted.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.label.cmp(&b.label)));
    let mut merged: Vec<Event> = Vec::with_capacity(sorted.len());
    for e in sorted {
        match merged.iter_mut().rev().find(|m| m.label == e.label) {
            Some(prev) if e.onset_s - prev.offset_s < max_gap_s - GRID_EPS => {
                prev.offset_s = prev.offset_s.max(e.offset_s);
            }
            _ => merged.push(e),
        }
    }
    merged.retain(|e| e.duration() >= min_s - GRID_EPS);
    merged
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    onset_s: f64,
    offset_s: f64,
    label: u8,
}

/// CSV with header `onset_s,offset_s,label`.
pub fn write_events_csv<W: Write>(w: W, events: &[Event]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if events.is_empty() {
        out.write_record(["onset_s", "offset_s", "label"])
            .map_err(|e| SegmentError::Format(e.to_string()))?;
    }
    for e in events {
        out.serialize(EventRow {
            onset_s: e.onset_s,
            offset_s: e.offset_s,
            label: e.label,
        })
        .map_err(|e| SegmentError::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_events_csv<R: Read>(r: R) -> Result<Vec<Event>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(|e| SegmentError::Format(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["onset_s", "offset_s", "label"] {
        return Err(SegmentError::Format("expected header onset_s,offset_s,label".into()));
    }
    rdr.deserialize::<EventRow>()
        .map(|row| {
            let row = row.map_err(|e| SegmentError::Format(e.to_string()))?;
            Ok(Event {
                onset_s: row.onset_s,
                offset_s: row.offset_s,
                label: row.label,
            })
        })
        .collect()
}

pub fn write_events_json<W: Write>(w: W, events: &[Event]) -> Result<()> {
    serde_json::to_writer_pretty(w, events).map_err(|e| SegmentError::Format(e.to_string()))
}

pub fn read_events_json<R: Read>(r: R) -> Result<Vec<Event>> {
    serde_json::from_reader(r).map_err(|e| SegmentError::Format(e.to_string()))
}
