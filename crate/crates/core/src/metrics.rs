//! Frame-level accuracy/precision/recall/F1, event-level F1 with one-to-one
//! IoU matching, and coverage IoU, with corpus aggregation.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmentation::{Event, CRY};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction has {pred} frames, truth has {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("IoU threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
    #[error("no files to evaluate")]
    Empty,
    #[error("report output: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl FrameReport {
    /// Ratios from confusion counts; every 0/0 is 0 except accuracy on an
    /// empty set, which is 1.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let total = tp + fp + fn_ + tn;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            tp,
            fp,
            fn_,
            tn,
            accuracy: if total == 0 { 1.0 } else { ratio(tp + tn, total) },
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

/// Confusion counts with cry (1) as the positive class.
pub fn frame_metrics(pred: &[u8], truth: &[u8]) -> Result<FrameReport> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == CRY, t == CRY) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(FrameReport::from_counts(tp, fp, fn_, tn))
}

pub fn interval_iou(a: &Event, b: &Event) -> f64 {
    let inter = (a.offset_s.min(b.offset_s) - a.onset_s.max(b.onset_s)).max(0.0);
    let union = a.duration() + b.duration() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `(pred index, truth index, IoU)` for each match.
    pub matches: Vec<(usize, usize, f64)>,
}

impl EventReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: f1(precision, recall),
            matches: Vec::new(),
        }
    }

    /// Mean IoU over matched pairs; 0 without matches.
    pub fn mean_matched_iou(&self) -> f64 {
        if self.matches.is_empty() {
            0.0
        } else {
            self.matches.iter().map(|m| m.2).sum::<f64>() / self.matches.len() as f64
        }
    }
}

/// Greedy one-to-one matching of cry events in descending IoU order; a pair
/// matches when its IoU reaches `threshold`. Equal IoUs resolve by
/// prediction index, then truth index.
pub fn event_f1(pred: &[Event], truth: &[Event], threshold: f64) -> Result<EventReport> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(MetricsError::Threshold(threshold));
    }
    let pred: Vec<&Event> = pred.iter().filter(|e| e.label == CRY).collect();
    let truth: Vec<&Event> = truth.iter().filter(|e| e.label == CRY).collect();
    let mut pairs = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let iou = interval_iou(p, t);
            if iou >= threshold {
                pairs.push((i, j, iou));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut pred_used = vec![false; pred.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut matches = Vec::new();
    for (i, j, iou) in pairs {
        if !pred_used[i] && !truth_used[j] {
            pred_used[i] = true;
            truth_used[j] = true;
            matches.push((i, j, iou));
        }
    }
    let tp = matches.len();
    let mut report = EventReport::from_counts(tp, pred.len() - tp, truth.len() - tp);
    report.matches = matches;
    Ok(report)
}

fn coverage(events: &[Event]) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = events
        .iter()
        .filter(|e| e.label == CRY && e.offset_s > e.onset_s)
        .map(|e| (e.onset_s, e.offset_s))
        .collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn total(iv: &[(f64, f64)]) -> f64 {
    iv.iter().map(|(a, b)| b - a).sum()
}

/// |pred ∩ truth| / |pred ∪ truth| over the time covered by cry events;
/// 1 when neither side has any coverage.
pub fn event_iou(pred: &[Event], truth: &[Event]) -> f64 {
    let p = coverage(pred);
    let t = coverage(truth);
    let (mut i, mut j, mut inter) = (0, 0, 0.0);
    while i < p.len() && j < t.len() {
        inter += (p[i].1.min(t[j].1) - p[i].0.max(t[j].0)).max(0.0);
        if p[i].1 < t[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let union = total(&p) + total(&t) - inter;
    if union <= 0.0 {
        1.0
    } else {
        inter / union
    }
}

/// One file's frame labels and events.
#[derive(Clone, Debug)]
pub struct FileOutcome {
    pub name: String,
    pub pred_frames: Vec<u8>,
    pub truth_frames: Vec<u8>,
    pub pred_events: Vec<Event>,
    pub truth_events: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub name: String,
    pub frame: FrameReport,
    pub event: EventReport,
    pub event_iou: f64,
    pub matched_iou: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub files: usize,
    /// Pooled over every frame of every file.
    pub frame: FrameReport,
    /// Pooled tp/fp/fn over files.
    pub event: EventReport,
    /// Coverage IoU averaged over files.
    pub event_iou: f64,
    /// Matched-pair IoU averaged over files.
    pub matched_iou: f64,
    pub iou_threshold: f64,
    pub per_file: Vec<FileReport>,
}

pub fn evaluate_file(f: &FileOutcome, threshold: f64) -> Result<FileReport> {
    let event = event_f1(&f.pred_events, &f.truth_events, threshold)?;
    Ok(FileReport {
        name: f.name.clone(),
        frame: frame_metrics(&f.pred_frames, &f.truth_frames)?,
        matched_iou: event.mean_matched_iou(),
        event,
        event_iou: event_iou(&f.pred_events, &f.truth_events),
    })
}

pub fn evaluate_corpus(files: &[FileOutcome], threshold: f64) -> Result<CorpusReport> {
    if files.is_empty() {
        return Err(MetricsError::Empty);
    }
    let per_file = files
        .iter()
        .map(|f| evaluate_file(f, threshold))
        .collect::<Result<Vec<_>>>()?;
    let sum = |g: fn(&FileReport) -> usize| per_file.iter().map(g).sum::<usize>();
    let frame = FrameReport::from_counts(
        sum(|r| r.frame.tp),
        sum(|r| r.frame.fp),
        sum(|r| r.frame.fn_),
        sum(|r| r.frame.tn),
    );
    let event = EventReport::from_counts(sum(|r| r.event.tp), sum(|r| r.event.fp), sum(|r| r.event.fn_));
    let n = per_file.len() as f64;
    Ok(CorpusReport {
        files: per_file.len(),
        frame,
        event,
        event_iou: per_file.iter().map(|r| r.event_iou).sum::<f64>() / n,
        matched_iou: per_file.iter().map(|r| r.matched_iou).sum::<f64>() / n,
        iou_threshold: threshold,
        per_file,
    })
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "run",
    "config_hash",
    "files",
    "frame_accuracy",
    "frame_f1",
    "event_f1",
    "event_iou",
    "matched_iou",
    "frame_precision",
    "frame_recall",
];

/// One CSV summary row, optionally preceded by the header.
pub fn write_summary_row<W: Write>(w: W, run: &str, config_hash: &str, r: &CorpusReport, header: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| MetricsError::Output(e.to_string());
    if header {
        out.write_record(SUMMARY_HEADER).map_err(err)?;
    }
    out.write_record([
        run.to_string(),
        config_hash.to_string(),
        r.files.to_string(),
        format!("{:.6}", r.frame.accuracy),
        format!("{:.6}", r.frame.f1),
        format!("{:.6}", r.event.f1),
        format!("{:.6}", r.event_iou),
        format!("{:.6}", r.matched_iou),
        format!("{:.6}", r.frame.precision),
        format!("{:.6}", r.frame.recall),
    ])
    .map_err(err)?;
    out.flush().map_err(|e| MetricsError::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(a: f64, b: f64) -> Event {
        Event::cry(a, b)
    }

    #[test]
    fn frame_worked_example() {
        let r = frame_metrics(&[1, 0, 0, 0, 1, 0], &[1, 1, 0, 0, 0, 0]).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_, r.tn), (1, 1, 1, 3));
        assert_eq!(r.accuracy, 4.0 / 6.0);
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn frame_degenerate_cases() {
        let r = frame_metrics(&[0; 5], &[0; 5]).unwrap();
        assert_eq!((r.accuracy, r.f1), (1.0, 0.0));
        let r = frame_metrics(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((r.accuracy, r.f1), (1.0, 1.0));
        assert!(frame_metrics(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn event_worked_example() {
        let truth = [ev(0.0, 1.0), ev(2.0, 3.0)];
        let pred = [ev(0.1, 0.9), ev(2.5, 4.0)];
        assert!((interval_iou(&pred[0], &truth[0]) - 0.8).abs() < 1e-12);
        assert!((interval_iou(&pred[1], &truth[1]) - 0.25).abs() < 1e-12);
        let r = event_f1(&pred, &truth, 0.5).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 1));
        assert_eq!(r.f1, 0.5);
    }

    #[test]
    fn event_edge_cases() {
        let truth = [ev(0.0, 1.0), ev(2.0, 3.0)];
        assert_eq!(event_f1(&truth, &truth, 0.5).unwrap().f1, 1.0);
        assert_eq!(event_f1(&[], &truth, 0.5).unwrap().f1, 0.0);
        assert!(event_f1(&truth, &truth, 0.0).is_err());
        assert!(event_f1(&truth, &truth, 1.5).is_err());
        assert_eq!(event_f1(&truth, &truth, 1.0).unwrap().tp, 2);
    }

    #[test]
    fn greedy_prefers_highest_iou() {
        // p0 has IoU 2/3 with t0 and 0.9 with t1
        let truth = [ev(0.0, 1.0), ev(0.3, 1.2)];
        let pred = [ev(0.2, 1.2)];
        let r = event_f1(&pred, &truth, 0.5).unwrap();
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].1, 1);
    }

    #[test]
    fn coverage_iou() {
        assert!((event_iou(&[ev(1.0, 3.0)], &[ev(2.0, 4.0)]) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(event_iou(&[ev(1.0, 2.0)], &[ev(1.0, 2.0)]), 1.0);
        assert_eq!(event_iou(&[ev(0.0, 1.0)], &[ev(2.0, 3.0)]), 0.0);
        assert_eq!(event_iou(&[], &[]), 1.0);
        let split = [ev(1.0, 2.0), ev(2.0, 3.0)];
        assert_eq!(
            event_iou(&split, &[ev(2.0, 4.0)]),
            event_iou(&[ev(1.0, 3.0)], &[ev(2.0, 4.0)])
        );
    }

    fn outcome(pred: Vec<u8>, truth: Vec<u8>) -> FileOutcome {
        let pe = crate::segmentation::labels_to_events(&pred, 0.05);
        let te = crate::segmentation::labels_to_events(&truth, 0.05);
        FileOutcome {
            name: "f".into(),
            pred_frames: pred,
            truth_frames: truth,
            pred_events: pe,
            truth_events: te,
        }
    }

    #[test]
    fn corpus_pools_frames() {
        let a = outcome(vec![1, 0, 1, 0], vec![1, 0, 1, 0]);
        let b = outcome(vec![1, 1, 0, 0], vec![1, 0, 1, 0]);
        let single = evaluate_corpus(std::slice::from_ref(&a), 0.5).unwrap();
        let file = evaluate_file(&a, 0.5).unwrap();
        assert_eq!(single.frame, file.frame);
        assert_eq!(single.event_iou, file.event_iou);
        let both = evaluate_corpus(&[a.clone(), b.clone()], 0.5).unwrap();
        assert_eq!(both.frame.accuracy, 0.75);
        let doubled = evaluate_corpus(&[a.clone(), b.clone(), a, b], 0.5).unwrap();
        assert_eq!(doubled.frame.accuracy, both.frame.accuracy);
        assert_eq!(doubled.frame.f1, both.frame.f1);
        assert!(evaluate_corpus(&[], 0.5).is_err());
    }

    #[test]
    fn summary_row_has_header() {
        let r = evaluate_corpus(&[outcome(vec![1, 0], vec![1, 0])], 0.5).unwrap();
        let mut buf = Vec::new();
        write_summary_row(&mut buf, "run1", "abc", &r, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("run,config_hash"));
        assert!(lines[1].starts_with("run1,abc,1,1.000000,1.000000"));
    }
}
