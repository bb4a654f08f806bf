//! Ground-truth annotations: TextGrid and CSV readers, a label vocabulary
//! mapping interval text to cry / non-cry, per-frame majority vote across
//! annotators, and seeded train/test splits.

mod textgrid;

pub use textgrid::{parse_textgrid, parse_textgrid_bytes, serialize_textgrid, AnnotationTier, Interval, TextGrid};

use std::collections::BTreeMap;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmentation::{Event, CRY, NON_CRY};

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("TextGrid line {line}: {msg}")]
    TextGrid { line: usize, msg: String },
    #[error("unknown text encoding: {0}")]
    Encoding(String),
    #[error("annotation CSV row {row}: {msg}")]
    Csv { row: usize, msg: String },
    #[error("annotators disagree on frame count ({expected} vs {got})")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no annotators")]
    NoAnnotators,
    #[error("cannot split an empty id list")]
    EmptySplit,
    #[error("train fraction must lie in (0, 1), got {0}")]
    Fraction(f64),
}

pub type Result<T> = std::result::Result<T, AnnotationError>;

/// Texts that mean "no cry"; everything else is cry. Comparison ignores
/// case and surrounding whitespace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelVocabulary {
    pub non_cry: Vec<String>,
}

impl Default for LabelVocabulary {
    fn default() -> Self {
        Self {
            non_cry: vec![String::new(), "silence".into(), "noise".into()],
        }
    }
}

impl LabelVocabulary {
    pub fn classify(&self, text: &str) -> u8 {
        let t = text.trim();
        if self.non_cry.iter().any(|n| n.trim().eq_ignore_ascii_case(t)) {
            NON_CRY
        } else {
            CRY
        }
    }
}

/// Cry intervals of a tier as events, with abutting cry intervals joined.
pub fn tier_events(tier: &AnnotationTier, vocab: &LabelVocabulary) -> Vec<Event> {
    let mut events: Vec<Event> = Vec::new();
    for iv in tier.intervals.iter().filter(|iv| vocab.classify(&iv.text) == CRY) {
        match events.last_mut() {
            Some(last) if last.offset_s == iv.start_s => last.offset_s = iv.end_s,
            _ => events.push(Event::cry(iv.start_s, iv.end_s)),
        }
    }
    events
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    file: String,
    onset_s: f64,
    offset_s: f64,
    label: String,
}

/// Reads `file,onset_s,offset_s,label` rows into per-file event lists
/// sorted by onset. Labels `0`/`1` are taken literally; other text goes
/// through the vocabulary.
pub fn parse_csv_annotations<R: Read>(r: R, vocab: &LabelVocabulary) -> Result<BTreeMap<String, Vec<Event>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers().map_err(|e| AnnotationError::Csv {
        row: 0,
        msg: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["file", "onset_s", "offset_s", "label"] {
        return Err(AnnotationError::Csv {
            row: 0,
            msg: "expected header file,onset_s,offset_s,label".into(),
        });
    }
    let mut files: BTreeMap<String, Vec<(usize, Event)>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| AnnotationError::Csv {
            row: row_no,
            msg: e.to_string(),
        })?;
        if !(row.offset_s > row.onset_s) || !row.onset_s.is_finite() || !row.offset_s.is_finite() {
            return Err(AnnotationError::Csv {
                row: row_no,
                msg: format!("offset {} must exceed onset {}", row.offset_s, row.onset_s),
            });
        }
        let label = match row.label.as_str() {
            "0" => NON_CRY,
            "1" => CRY,
            text => vocab.classify(text),
        };
        files.entry(row.file).or_default().push((
            row_no,
            Event {
                onset_s: row.onset_s,
                offset_s: row.offset_s,
                label,
            },
        ));
    }
    let mut out = BTreeMap::new();
    for (file, mut rows) in files {
        rows.sort_by(|a, b| a.1.onset_s.total_cmp(&b.1.onset_s));
        for label in [NON_CRY, CRY] {
            let same: Vec<&(usize, Event)> = rows.iter().filter(|(_, e)| e.label == label).collect();
            for w in same.windows(2) {
                if w[1].1.onset_s < w[0].1.offset_s {
                    return Err(AnnotationError::Csv {
                        row: w[1].0,
                        msg: format!("overlaps another event of the same label in `{file}`"),
                    });
                }
            }
        }
        out.insert(file, rows.into_iter().map(|(_, e)| e).collect());
    }
    Ok(out)
}

/// Per-frame majority across annotators; cry needs strictly more than
/// half of the votes.
pub fn majority_vote(annotators: &[Vec<u8>]) -> Result<Vec<u8>> {
    let first = annotators.first().ok_or(AnnotationError::NoAnnotators)?;
    for a in annotators {
        if a.len() != first.len() {
            return Err(AnnotationError::LengthMismatch {
                expected: first.len(),
                got: a.len(),
            });
        }
    }
    Ok((0..first.len())
        .map(|t| {
            let votes = annotators.iter().filter(|a| a[t] == CRY).count();
            if 2 * votes > annotators.len() {
                CRY
            } else {
                NON_CRY
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub train_frac: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded shuffle, then the first `round(frac · n)` ids train.
pub fn split(ids: &[String], train_frac: f64, seed: u64) -> Result<Split> {
    if ids.is_empty() {
        return Err(AnnotationError::EmptySplit);
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(AnnotationError::Fraction(train_frac));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_frac * ids.len() as f64).round() as usize;
    let test = shuffled.split_off(n_train.min(ids.len()));
    Ok(Split {
        seed,
        train_frac,
        train: shuffled,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn vocabulary_defaults() {
        let v = LabelVocabulary::default();
        assert_eq!(v.classify(""), NON_CRY);
        assert_eq!(v.classify("  Silence "), NON_CRY);
        assert_eq!(v.classify("noise"), NON_CRY);
        assert_eq!(v.classify("cry"), CRY);
        assert_eq!(v.classify("fussing"), CRY);
    }

    #[test]
    fn tier_to_events() {
        let tier = AnnotationTier {
            name: "t".into(),
            xmin: 0.0,
            xmax: 8.0,
            intervals: vec![
                Interval {
                    start_s: 0.0,
                    end_s: 2.0,
                    text: "cry".into(),
                },
                Interval {
                    start_s: 2.0,
                    end_s: 8.0,
                    text: String::new(),
                },
            ],
        };
        assert_eq!(
            tier_events(&tier, &LabelVocabulary::default()),
            vec![Event::cry(0.0, 2.0)]
        );
    }

    #[test]
    fn csv_annotations() {
        let v = LabelVocabulary::default();
        assert!(parse_csv_annotations(&b"file,onset_s,offset_s,label\n"[..], &v)
            .unwrap()
            .is_empty());
        let text = "file,onset_s,offset_s,label\nb,3.0,4.0,cry\na,1.0,2.0,1\nb,0.5,1.0,cry\n";
        let m = parse_csv_annotations(text.as_bytes(), &v).unwrap();
        assert_eq!(m["a"], vec![Event::cry(1.0, 2.0)]);
        assert_eq!(m["b"], vec![Event::cry(0.5, 1.0), Event::cry(3.0, 4.0)]);

        let overlap = "file,onset_s,offset_s,label\na,1.0,2.0,1\na,1.5,3.0,1\n";
        assert!(parse_csv_annotations(overlap.as_bytes(), &v).is_err());
        let reversed = "file,onset_s,offset_s,label\na,2.0,2.0,1\n";
        assert!(parse_csv_annotations(reversed.as_bytes(), &v).is_err());
        let bad_header = "name,onset_s,offset_s,label\n";
        assert!(parse_csv_annotations(bad_header.as_bytes(), &v).is_err());
    }

    #[test]
    fn vote_examples() {
        assert_eq!(
            majority_vote(&[vec![1, 0], vec![1, 0], vec![0, 0]]).unwrap(),
            vec![1, 0]
        );
        assert_eq!(majority_vote(&[vec![1, 0, 1]]).unwrap(), vec![1, 0, 1]);
        assert_eq!(majority_vote(&[vec![1, 0], vec![0, 1]]).unwrap(), vec![0, 0]);
        assert!(majority_vote(&[]).is_err());
        assert!(majority_vote(&[vec![1], vec![1, 0]]).is_err());
    }

    #[test]
    fn split_partitions() {
        let ids: Vec<String> = (0..10).map(|i| format!("f{i}")).collect();
        let s = split(&ids, 0.8, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        assert_eq!(s, split(&ids, 0.8, 3).unwrap());
        let all: HashSet<&String> = s.train.iter().chain(&s.test).collect();
        assert_eq!(all.len(), 10);
        assert!(split(&[], 0.8, 0).is_err());
        assert!(split(&ids, 1.0, 0).is_err());
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.contains("\"train_frac\":0.8"));
    }
}
