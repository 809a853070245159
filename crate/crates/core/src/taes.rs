//! Time-aligned event scoring. Every reference event is worth one unit,
//! split between TP and FN in proportion to how much of it the hypothesis
//! covers. Hypothesis time outside every reference event of its label is
//! charged as a fractional false alarm, at most one per hypothesis event.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annot::{AnnotationDoc, Event, LabelMap};
use crate::counts::ConfusionCounts;
use crate::error::Error;

/// What happens when one hypothesis event overlaps several reference events.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiRefPolicy {
    /// Only the earliest overlapped reference event is credited; the later
    /// ones count as full misses unless another hypothesis credits them.
    #[default]
    FirstOnly,
    /// Every overlapped reference event is credited with its overlap.
    CreditAll,
}

impl FromStr for MultiRefPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first-only" => Ok(Self::FirstOnly),
            "credit-all" => Ok(Self::CreditAll),
            other => Err(Error::Config(format!(
                "unknown TAES policy '{other}' (expected first-only or credit-all)"
            ))),
        }
    }
}

impl std::fmt::Display for MultiRefPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FirstOnly => "first-only",
            Self::CreditAll => "credit-all",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TaesParams {
    pub multi_ref_policy: MultiRefPolicy,
}

/// Fractional outcome for one reference event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefFraction {
    pub duration_ref: f64,
    /// Overlap credited to this event.
    pub duration_correct: f64,
    pub tp: f64,
    pub fn_: f64,
    /// Some hypothesis overlapped the event, credited or not.
    pub overlapped: bool,
    /// The event received TP credit under the active policy.
    pub credited: bool,
}

/// Fractional false-alarm outcome for one hypothesis event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypFraction {
    pub duration_spurious: f64,
    pub fp: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaesFractions {
    pub refs: Vec<RefFraction>,
    pub hyps: Vec<HypFraction>,
}

impl TaesFractions {
    pub fn totals(&self) -> (f64, f64, f64) {
        let tp = self.refs.iter().map(|r| r.tp).sum();
        let fn_ = self.refs.iter().map(|r| r.fn_).sum();
        let fp = self.hyps.iter().map(|h| h.fp).sum();
        (tp, fn_, fp)
    }
}

/// Correctly detected duration of reference `r` by hypothesis `h`, for
/// events that overlap.
pub fn duration_correct(h: &Event, r: &Event) -> f64 {
    if h.start >= r.start && h.stop <= r.stop {
        // hypothesis inside the reference
        h.stop - h.start
    } else if h.start < r.start && h.stop <= r.stop {
        // starts early
        h.stop - r.start
    } else if h.start >= r.start && h.stop > r.stop {
        // ends late
        r.stop - h.start
    } else {
        // spans the reference
        r.stop - r.start
    }
}

/// Fraction of a reference event charged for `spurious` seconds, capped at one.
pub fn spurious_fraction(spurious: f64, duration_ref: f64) -> f64 {
    if spurious < duration_ref {
        spurious / duration_ref
    } else {
        1.0
    }
}

fn overlapping(refs: &[Event], h: &Event) -> std::ops::Range<usize> {
    let lo = refs.partition_point(|r| r.stop <= h.start);
    let hi = lo + refs[lo..].partition_point(|r| r.start < h.stop);
    lo..hi
}

/// Scores one label's sorted, non-overlapping event lists.
pub fn taes_fractions(refs: &[Event], hyps: &[Event], policy: MultiRefPolicy) -> TaesFractions {
    let mut credit = vec![0.0f64; refs.len()];
    let mut credited = vec![false; refs.len()];
    let mut overlapped = vec![false; refs.len()];
    let mut hyp_out = Vec::with_capacity(hyps.len());

    for h in hyps {
        let range = overlapping(refs, h);
        if range.is_empty() {
            hyp_out.push(HypFraction {
                duration_spurious: h.duration(),
                fp: 1.0,
            });
            continue;
        }
        for i in range.clone() {
            overlapped[i] = true;
            if policy == MultiRefPolicy::CreditAll || i == range.start {
                credit[i] += duration_correct(h, &refs[i]);
                credited[i] = true;
            }
        }

        // Each maximal spurious piece is charged against the nearest
        // overlapped reference; a piece between two references goes to the
        // earlier one.
        let mut spurious = 0.0;
        let mut fp = 0.0;
        let first = &refs[range.start];
        if h.start < first.start {
            let d = first.start - h.start;
            spurious += d;
            fp += spurious_fraction(d, first.duration());
        }
        for i in range.start..range.end - 1 {
            let gap = refs[i + 1].start - refs[i].stop;
            if gap > 0.0 {
                spurious += gap;
                fp += spurious_fraction(gap, refs[i].duration());
            }
        }
        let last = &refs[range.end - 1];
        if h.stop > last.stop {
            let d = h.stop - last.stop;
            spurious += d;
            fp += spurious_fraction(d, last.duration());
        }
        hyp_out.push(HypFraction {
            duration_spurious: spurious,
            fp: fp.min(1.0),
        });
    }

    let ref_out = refs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let duration_ref = r.duration();
            let tp = if credited[i] {
                (credit[i] / duration_ref).min(1.0)
            } else {
                0.0
            };
            RefFraction {
                duration_ref,
                duration_correct: credit[i],
                tp,
                fn_: 1.0 - tp,
                overlapped: overlapped[i],
                credited: credited[i],
            }
        })
        .collect();

    TaesFractions {
        refs: ref_out,
        hyps: hyp_out,
    }
}

pub fn score_taes(
    reference: &AnnotationDoc,
    hypothesis: &AnnotationDoc,
    params: &TaesParams,
    labels: &LabelMap,
) -> ConfusionCounts {
    let mut counts = ConfusionCounts::zero(labels);
    counts.total_duration = reference.duration();
    for id in labels.ids() {
        let refs = reference.events_with(id);
        let hyps = hypothesis.events_with(id);
        let (tp, fn_, fp) = taes_fractions(&refs, &hyps, params.multi_ref_policy).totals();
        let c = counts.label_mut(labels.name(id));
        c.tp = tp;
        c.fn_ = fn_;
        c.fp = fp;
        c.n_ref = refs.len() as u64;
        c.n_hyp = hyps.len() as u64;
    }
    counts.set_complement_tn();
    counts
}
