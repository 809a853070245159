//! Actual term-weighted value.
//!
//! Each label is treated as a search term. A hypothesis event is a correct
//! detection when its midpoint falls inside a still-unclaimed reference
//! event of the same label (boundaries inclusive); hypothesis events are
//! visited in temporal order and each claims at most one reference event.
//! Every other kept hypothesis event is spurious.
//!
//! ```text
//! P_miss = 1 - N_correct / N_ref
//! P_fa   = N_spurious / (T_source - N_ref)
//! TWV    = 1 - P_miss - beta * P_fa
//! ```
//!
//! `T_source` is the signal duration in seconds and `N_ref` an event count;
//! the subtraction mixes units on purpose so numbers match the reference
//! definition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annot::{AnnotationDoc, Event, LabelMap};
use crate::counts::ConfusionCounts;
use crate::error::{Error, Result};

pub const DEFAULT_BETA: f64 = 999.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtwvParams {
    pub beta: f64,
    /// Hypothesis events with confidence below this are ignored.
    pub theta: f64,
}

impl Default for AtwvParams {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            theta: 0.0,
        }
    }
}

impl AtwvParams {
    pub fn new(beta: f64, theta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Config(format!(
                "theta must lie in [0, 1], got {theta}"
            )));
        }
        Ok(Self { beta, theta })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TermCounts {
    pub n_correct: u64,
    pub n_spurious: u64,
    pub n_ref: u64,
    /// Seconds of source signal.
    pub t_source: f64,
}

impl TermCounts {
    pub fn n_nt(&self) -> f64 {
        self.t_source - self.n_ref as f64
    }

    pub fn p_miss(&self) -> Option<f64> {
        (self.n_ref > 0).then(|| 1.0 - self.n_correct as f64 / self.n_ref as f64)
    }

    pub fn p_fa(&self) -> Option<f64> {
        let nt = self.n_nt();
        (nt > 0.0).then(|| self.n_spurious as f64 / nt)
    }

    pub fn twv(&self, beta: f64) -> Option<f64> {
        Some(1.0 - self.p_miss()? - beta * self.p_fa()?)
    }

    fn add(&self, o: &Self) -> Self {
        Self {
            n_correct: self.n_correct + o.n_correct,
            n_spurious: self.n_spurious + o.n_spurious,
            n_ref: self.n_ref + o.n_ref,
            t_source: self.t_source + o.t_source,
        }
    }
}

/// Per-label detection tallies; these accumulate across files and the TWV
/// is computed from the totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AtwvCounts {
    pub terms: BTreeMap<String, TermCounts>,
}

impl AtwvCounts {
    pub fn accumulate(&self, other: &Self) -> Result<Self> {
        if self.terms.is_empty() {
            return Ok(other.clone());
        }
        if other.terms.is_empty() {
            return Ok(self.clone());
        }
        if self.terms.keys().ne(other.terms.keys()) {
            return Err(Error::LabelSetMismatch);
        }
        Ok(Self {
            terms: self
                .terms
                .iter()
                .zip(other.terms.values())
                .map(|((k, a), b)| (k.clone(), a.add(b)))
                .collect(),
        })
    }

    pub fn twv(&self, beta: f64) -> BTreeMap<String, Option<f64>> {
        self.terms
            .iter()
            .map(|(k, t)| (k.clone(), t.twv(beta)))
            .collect()
    }

    /// Unweighted mean of the defined per-label TWVs.
    pub fn atwv(&self, beta: f64) -> Option<f64> {
        let vals: Vec<f64> = self.terms.values().filter_map(|t| t.twv(beta)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtwvResult {
    pub counts: ConfusionCounts,
    pub terms: AtwvCounts,
    pub twv: BTreeMap<String, Option<f64>>,
    pub atwv: Option<f64>,
}

/// Midpoint matching for one label. Returns `(n_correct, n_spurious)`.
pub(crate) fn match_label(refs: &[Event], hyps: &[Event]) -> (u64, u64) {
    let mut claimed = vec![false; refs.len()];
    let (mut correct, mut spurious) = (0, 0);
    for h in hyps {
        let m = h.midpoint();
        let mut i = refs.partition_point(|r| r.stop < m);
        let mut hit = false;
        while i < refs.len() && refs[i].start <= m {
            if !claimed[i] {
                claimed[i] = true;
                hit = true;
                break;
            }
            i += 1;
        }
        if hit {
            correct += 1;
        } else {
            spurious += 1;
        }
    }
    (correct, spurious)
}

/// Scores a pair. The reference should be gap-filled; the hypothesis may be
/// either gap-filled or raw (a raw empty hypothesis has no detections at all
/// and scores TWV 0 for every label).
pub fn score_atwv(
    reference: &AnnotationDoc,
    hypothesis: &AnnotationDoc,
    params: &AtwvParams,
    labels: &LabelMap,
) -> Result<AtwvResult> {
    if params.theta > 0.0 {
        if let Some(e) = hypothesis.events().iter().find(|e| e.confidence.is_none()) {
            return Err(Error::MissingConfidence {
                start: e.start,
                stop: e.stop,
            });
        }
    }
    let mut counts = ConfusionCounts::zero(labels);
    counts.total_duration = reference.duration();
    let mut terms = AtwvCounts::default();
    for id in labels.ids() {
        let refs = reference.events_with(id);
        let kept: Vec<Event> = hypothesis
            .events()
            .iter()
            .filter(|e| e.label == id && e.score() >= params.theta)
            .copied()
            .collect();
        let (n_correct, n_spurious) = match_label(&refs, &kept);
        let name = labels.name(id);
        let c = counts.label_mut(name);
        c.tp = n_correct as f64;
        c.fn_ = (refs.len() as u64 - n_correct) as f64;
        c.fp = n_spurious as f64;
        c.n_ref = refs.len() as u64;
        c.n_hyp = kept.len() as u64;
        terms.terms.insert(
            name.to_string(),
            TermCounts {
                n_correct,
                n_spurious,
                n_ref: refs.len() as u64,
                t_source: reference.duration(),
            },
        );
    }
    counts.set_complement_tn();
    Ok(AtwvResult {
        counts,
        twv: terms.twv(params.beta),
        atwv: terms.atwv(params.beta),
        terms,
    })
}
