//! Any-overlap scoring. A reference event is detected when any hypothesis
//! event of the same label touches its guard-band-expanded span; a
//! hypothesis event is a false alarm only if it touches no expanded
//! reference event of its label.

use crate::annot::{AnnotationDoc, Event, LabelMap};
use crate::counts::ConfusionCounts;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OvlpParams {
    /// Seconds added on both sides of each reference event.
    pub guard_band: f64,
}

impl OvlpParams {
    pub fn new(guard_band: f64) -> Result<Self> {
        if !(guard_band >= 0.0 && guard_band.is_finite()) {
            return Err(Error::Config(format!(
                "guard band must be non-negative, got {guard_band}"
            )));
        }
        Ok(Self { guard_band })
    }
}

/// Per-label (tp, fn, fp) over sorted, non-overlapping event lists.
pub(crate) fn ovlp_label(refs: &[Event], hyps: &[Event], guard: f64) -> (f64, f64, f64) {
    let (mut tp, mut fn_, mut fp) = (0.0, 0.0, 0.0);
    for r in refs {
        let (lo, hi) = (r.start - guard, r.stop + guard);
        let i = hyps.partition_point(|h| h.stop <= lo);
        if i < hyps.len() && hyps[i].start < hi {
            tp += 1.0;
        } else {
            fn_ += 1.0;
        }
    }
    for h in hyps {
        let i = refs.partition_point(|r| r.stop + guard <= h.start);
        let touched = i < refs.len() && refs[i].start - guard < h.stop;
        if !touched {
            fp += 1.0;
        }
    }
    (tp, fn_, fp)
}

pub fn score_ovlp(
    reference: &AnnotationDoc,
    hypothesis: &AnnotationDoc,
    params: &OvlpParams,
    labels: &LabelMap,
) -> ConfusionCounts {
    let mut counts = ConfusionCounts::zero(labels);
    counts.total_duration = reference.duration();
    for id in labels.ids() {
        let refs = reference.events_with(id);
        let hyps = hypothesis.events_with(id);
        let (tp, fn_, fp) = ovlp_label(&refs, &hyps, params.guard_band);
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
