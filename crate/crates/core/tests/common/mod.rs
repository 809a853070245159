#![allow(dead_code)]

use std::path::{Path, PathBuf};

use evscore::annot::{normalize_pair, parse_annotation, AnnotationDoc, Event, LabelId, LabelMap};
use rand::Rng;

pub const SEIZ: LabelId = LabelId(0);
pub const BCKG: LabelId = LabelId(1);

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn load(rel: &str) -> AnnotationDoc {
    let text = std::fs::read_to_string(fixture(rel)).unwrap();
    parse_annotation(&text, &LabelMap::seizure()).unwrap()
}

/// Loads and normalizes a fixture pair.
pub fn pair(ref_rel: &str, hyp_rel: &str) -> (AnnotationDoc, AnnotationDoc) {
    normalize_pair(&load(ref_rel), &load(hyp_rel), BCKG).unwrap()
}

pub fn doc(events: &[(f64, f64, LabelId)], duration: f64) -> AnnotationDoc {
    let ev = events
        .iter()
        .map(|&(a, b, l)| Event::new(a, b, l))
        .collect();
    AnnotationDoc::new(ev, Some(duration)).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// A gap-free document on a 0.01 s grid with `n_labels` labels and random
/// confidences. Adjacent events may share a label.
pub fn random_tiled<R: Rng>(
    rng: &mut R,
    duration_hundredths: u32,
    n_labels: usize,
    max_events: usize,
) -> AnnotationDoc {
    let n_cuts = rng.random_range(0..max_events.max(1));
    let mut cuts: Vec<u32> = (0..n_cuts)
        .map(|_| rng.random_range(1..duration_hundredths))
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(duration_hundredths);
    let events = bounds
        .windows(2)
        .map(|w| {
            Event::new(
                w[0] as f64 / 100.0,
                w[1] as f64 / 100.0,
                LabelId(rng.random_range(0..n_labels)),
            )
            .with_confidence(rng.random_range(0.0..1.0))
        })
        .collect();
    AnnotationDoc::new(events, Some(duration_hundredths as f64 / 100.0)).unwrap()
}

/// Sparse target events on a 0.01 s grid; no gap filling.
pub fn random_sparse<R: Rng>(
    rng: &mut R,
    duration_hundredths: u32,
    label: LabelId,
    max_events: usize,
) -> AnnotationDoc {
    let n = rng.random_range(0..=max_events) * 2;
    let mut pts: Vec<u32> = (0..n)
        .map(|_| rng.random_range(0..=duration_hundredths))
        .collect();
    pts.sort_unstable();
    pts.dedup();
    let events = pts
        .chunks_exact(2)
        .map(|c| {
            Event::new(c[0] as f64 / 100.0, c[1] as f64 / 100.0, label)
                .with_confidence(rng.random_range(0.0..1.0))
        })
        .collect();
    AnnotationDoc::new(events, Some(duration_hundredths as f64 / 100.0)).unwrap()
}

/// A random seizure-vocabulary pair, normalized.
pub fn random_pair<R: Rng>(
    rng: &mut R,
    duration_hundredths: u32,
    max_events: usize,
) -> (AnnotationDoc, AnnotationDoc) {
    let r = random_sparse(rng, duration_hundredths, SEIZ, max_events);
    let h = random_sparse(rng, duration_hundredths, SEIZ, max_events);
    normalize_pair(&r, &h, BCKG).unwrap()
}
