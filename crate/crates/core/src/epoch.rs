//! Epoch-based scoring: both annotations are sampled at the midpoint of
//! every fixed-length epoch and the sampled labels are tallied into a full
//! confusion matrix.

use crate::annot::{AnnotationDoc, LabelMap};
use crate::counts::{ConfusionCounts, ConfusionMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_EPOCH_DURATION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochParams {
    pub epoch_duration: f64,
}

impl Default for EpochParams {
    fn default() -> Self {
        Self {
            epoch_duration: DEFAULT_EPOCH_DURATION,
        }
    }
}

impl EpochParams {
    pub fn new(epoch_duration: f64) -> Result<Self> {
        if !(epoch_duration > 0.0 && epoch_duration.is_finite()) {
            return Err(Error::Config(format!(
                "epoch duration must be positive, got {epoch_duration}"
            )));
        }
        Ok(Self { epoch_duration })
    }
}

/// Midpoint of epoch `k`.
#[inline]
pub fn epoch_midpoint(k: usize, epoch_duration: f64) -> f64 {
    (k as f64 + 0.5) * epoch_duration
}

/// Number of epochs whose midpoint falls inside `[0, duration)`.
pub fn epoch_count(duration: f64, epoch_duration: f64) -> usize {
    let mut k = (duration / epoch_duration).floor() as usize;
    // settle rounding at the boundary using the exact midpoint expression
    while k > 0 && epoch_midpoint(k - 1, epoch_duration) >= duration {
        k -= 1;
    }
    while epoch_midpoint(k, epoch_duration) < duration {
        k += 1;
    }
    k
}

/// Scores two gap-filled documents of the same duration.
pub fn score_epoch(
    reference: &AnnotationDoc,
    hypothesis: &AnnotationDoc,
    params: &EpochParams,
    labels: &LabelMap,
) -> Result<ConfusionCounts> {
    if reference.duration() != hypothesis.duration() {
        return Err(Error::DurationMismatch(format!(
            "reference is {} s, hypothesis is {} s",
            reference.duration(),
            hypothesis.duration()
        )));
    }
    let duration = reference.duration();
    let n_epochs = epoch_count(duration, params.epoch_duration);
    let mut matrix = ConfusionMatrix::zero(labels);

    let (re, he) = (reference.events(), hypothesis.events());
    let (mut ri, mut hi) = (0usize, 0usize);
    for k in 0..n_epochs {
        let t = epoch_midpoint(k, params.epoch_duration);
        while ri < re.len() && re[ri].stop <= t {
            ri += 1;
        }
        while hi < he.len() && he[hi].stop <= t {
            hi += 1;
        }
        let r = re.get(ri).filter(|e| e.start <= t);
        let h = he.get(hi).filter(|e| e.start <= t);
        match (r, h) {
            (Some(r), Some(h)) => matrix.cells[r.label.0][h.label.0] += 1.0,
            _ => {
                return Err(Error::DurationMismatch(format!(
                    "instant {t} is not covered by both annotations; fill gaps before scoring"
                )))
            }
        }
    }

    let mut counts = ConfusionCounts::zero(labels);
    counts.total_duration = duration;
    let total = matrix.total();
    for id in labels.ids() {
        let i = id.0;
        let tp = matrix.cells[i][i];
        let fn_: f64 = matrix.cells[i].iter().sum::<f64>() - tp;
        let fp: f64 = matrix.cells.iter().map(|row| row[i]).sum::<f64>() - tp;
        let c = counts.label_mut(labels.name(id));
        c.tp = tp;
        c.fn_ = fn_;
        c.fp = fp;
        c.tn = total - tp - fn_ - fp;
        c.n_ref = reference.events().iter().filter(|e| e.label == id).count() as u64;
        c.n_hyp = hypothesis.events().iter().filter(|e| e.label == id).count() as u64;
    }
    counts.matrix = Some(matrix);
    Ok(counts)
}
