//! Property tests over randomly generated inputs.

use crstc::annotations::{
    majority_vote, parse_textgrid, serialize_textgrid, split, AnnotationTier, Interval, TextGrid,
};
use crstc::clustering::{kmeans, silhouette};
use crstc::dsp::{pad_or_trim, resample, AudioClip, FrameGrid};
use crstc::metrics::{event_f1, event_iou};
use crstc::segmentation::{events_to_labels, labels_to_events, min_duration_filter, smooth, Event};
use crstc::synthgen::identifiability_score;
use crstc::tensor::{read_checkpoint, write_checkpoint, ParamStore, Tensor};
use proptest::prelude::*;

fn binary(max_len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, 1..=max_len)
}

/// Sorted, non-overlapping cry events on a coarse grid inside [0, 20].
fn events() -> impl Strategy<Value = Vec<Event>> {
    prop::collection::vec((0u32..40, 1u32..6), 0..6).prop_map(|raw| {
        let mut t = 0.0;
        let mut out = Vec::new();
        for (gap, len) in raw {
            let on = t + gap as f64 * 0.25;
            let off = on + len as f64 * 0.25;
            out.push(Event::cry(on, off));
            t = off;
        }
        out
    })
}

proptest! {
    #[test]
    fn labels_events_round_trip(x in binary(160)) {
        let grid = FrameGrid { frame_len_s: 0.05, n_frames: x.len() };
        let events = labels_to_events(&x, 0.05);
        prop_assert_eq!(events_to_labels(&events, &grid).unwrap(), x);
        for w in events.windows(2) {
            prop_assert!(w[0].offset_s < w[1].onset_s);
        }
    }

    #[test]
    fn smoothing_stays_within_window_labels(x in prop::collection::vec(0usize..4, 1..60), half in 0usize..4) {
        let window = 2 * half + 1;
        let y = smooth(&x, window).unwrap();
        prop_assert_eq!(y.len(), x.len());
        for (i, &l) in y.iter().enumerate() {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            prop_assert!(x[lo..hi].contains(&l));
        }
        prop_assert_eq!(smooth(&x, 1).unwrap(), x);
    }

    #[test]
    fn coverage_iou_is_symmetric_and_split_invariant(p in events(), t in events(), cut in 0.1f64..0.9) {
        let a = event_iou(&p, &t);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - event_iou(&t, &p)).abs() < 1e-12);
        if let Some(first) = p.first().copied() {
            let mid = first.onset_s + cut * first.duration();
            let mut split_p = vec![Event::cry(first.onset_s, mid), Event::cry(mid, first.offset_s)];
            split_p.extend_from_slice(&p[1..]);
            prop_assert!((event_iou(&split_p, &t) - a).abs() < 1e-12);
        }
    }

    #[test]
    fn event_f1_is_symmetric(p in events(), t in events(), thr in 0.05f64..=1.0) {
        let ab = event_f1(&p, &t, thr).unwrap();
        let ba = event_f1(&t, &p, thr).unwrap();
        prop_assert_eq!(ab.tp, ba.tp);
        prop_assert_eq!(ab.fp, ba.fn_);
        prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
        prop_assert!((ab.precision - ba.recall).abs() < 1e-12);
    }

    #[test]
    fn zero_thresholds_filter_is_identity(p in events()) {
        let separated: Vec<Event> = p.iter().filter(|e| e.duration() > 0.0).copied().collect();
        let out = min_duration_filter(&separated, 0.0, 0.0);
        prop_assert_eq!(out, separated);
    }

    #[test]
    fn vote_is_order_invariant(
        (len, mut annotators) in (1usize..30).prop_flat_map(|len| {
            (Just(len), prop::collection::vec(prop::collection::vec(0u8..=1, len), 1..6))
        }),
    ) {
        let vote = majority_vote(&annotators).unwrap();
        prop_assert_eq!(vote.len(), len);
        annotators.reverse();
        prop_assert_eq!(majority_vote(&annotators).unwrap(), vote.clone());
        annotators.rotate_left(1);
        prop_assert_eq!(majority_vote(&annotators).unwrap(), vote.clone());
        for (t, &v) in vote.iter().enumerate() {
            prop_assert!(v == 0 || annotators.iter().any(|a| a[t] == v));
        }
    }

    #[test]
    fn split_partitions_ids(n in 1usize..50, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        let s = split(&ids, frac, seed).unwrap();
        prop_assert_eq!(s.train.len() + s.test.len(), n);
        let mut all: Vec<String> = s.train.iter().chain(&s.test).cloned().collect();
        all.sort();
        let mut expected = ids.clone();
        expected.sort();
        prop_assert_eq!(all, expected);
    }

    #[test]
    fn pad_or_trim_is_idempotent(len in 0usize..300, target in 1u32..40) {
        let clip = AudioClip::new((0..len).map(|i| (i as f64).sin() * 0.5).collect(), 20).unwrap();
        let once = pad_or_trim(&clip, target as f64 / 10.0).unwrap();
        prop_assert_eq!(once.samples.len(), 2 * target as usize);
        prop_assert_eq!(pad_or_trim(&once, target as f64 / 10.0).unwrap(), once);
    }

    #[test]
    fn resampling_constant_keeps_value(v in -1.0f64..1.0, len in 1usize..200, from in 1u32..50_000, to in 1u32..50_000) {
        let clip = AudioClip::new(vec![v; len], from).unwrap();
        let out = resample(&clip, to).unwrap();
        prop_assert!(out.samples.iter().all(|s| (s - v).abs() < 1e-12));
    }

    #[test]
    fn kmeans_labels_and_inertia_are_consistent(
        pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 3..30),
        k in 1usize..4,
        seed in any::<u64>(),
    ) {
        let r = kmeans(&pts, k, seed).unwrap();
        prop_assert_eq!(r.k(), k);
        let mut seen = vec![false; k];
        for &l in &r.labels { seen[l] = true; }
        prop_assert!(seen.iter().all(|&s| s));
        let recomputed: f64 = pts.iter().zip(&r.labels)
            .map(|(p, &l)| p.iter().zip(&r.centroids[l]).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum();
        prop_assert!((recomputed - r.inertia).abs() < 1e-9);
        let s = silhouette(&pts, &r.labels);
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn score_ignores_label_names(truth in prop::collection::vec(0usize..3, 1..100), perm in Just([2usize, 0, 1])) {
        let relabeled: Vec<usize> = truth.iter().map(|&u| perm[u]).collect();
        prop_assert_eq!(identifiability_score(&relabeled, &truth).unwrap(), 1.0);
    }

    #[test]
    fn textgrid_round_trip(
        cuts in prop::collection::btree_set(1u32..1000, 0..8),
        texts in prop::collection::vec("[a-z \"]{0,6}", 9),
        name in "[A-Za-z0-9 _\"]{0,10}",
    ) {
        let mut bounds = vec![0.0];
        bounds.extend(cuts.iter().map(|&c| c as f64 * 0.0081));
        bounds.push(8.1);
        let intervals = bounds.windows(2).zip(&texts).map(|(w, t)| Interval {
            start_s: w[0],
            end_s: w[1],
            text: t.clone(),
        }).collect();
        let tg = TextGrid {
            xmin: 0.0,
            xmax: 8.1,
            tiers: vec![AnnotationTier { name, xmin: 0.0, xmax: 8.1, intervals }],
            skipped: vec![],
        };
        let text = serialize_textgrid(&tg);
        let back = parse_textgrid(&text).unwrap();
        prop_assert_eq!(&back, &tg);
        prop_assert_eq!(serialize_textgrid(&back), text);
    }

    #[test]
    fn checkpoint_round_trip(values in prop::collection::vec(-1e6f64..1e6, 1..40), cols in 1usize..5) {
        let rows = values.len().div_ceil(cols);
        let mut data = values.clone();
        data.resize(rows * cols, 0.25);
        let mut store = ParamStore::new();
        store.insert("a", Tensor::from_matrix(rows, cols, data).unwrap());
        store.insert("b.c", Tensor::scalar(values[0]));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &store).unwrap();
        prop_assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), store);
    }
}
