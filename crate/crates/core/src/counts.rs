//! Confusion-count algebra and the scalar measures derived from it.
//!
//! Tallies are real-valued so that fractional scorers (TAES) share the same
//! representation as the integer ones. Ratios with a zero denominator are
//! `None`, never 0 or 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annot::LabelMap;
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// TP/TN/FP/FN for one label, plus how many events of that label each side
/// contained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub tp: f64,
    pub tn: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub n_ref: u64,
    pub n_hyp: u64,
}

impl LabelCounts {
    pub fn total(&self) -> f64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    fn add(&self, o: &Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            n_ref: self.n_ref + o.n_ref,
            n_hyp: self.n_hyp + o.n_hyp,
        }
    }
}

/// Full reference-by-hypothesis confusion matrix; rows are reference
/// labels, columns hypothesis labels, both in label-map order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub cells: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn zero(labels: &LabelMap) -> Self {
        let n = labels.len();
        Self {
            labels: labels.names().to_vec(),
            cells: vec![vec![0.0; n]; n],
        }
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub labels: BTreeMap<String, LabelCounts>,
    /// Seconds of signal these counts were collected over.
    pub total_duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<ConfusionMatrix>,
}

impl ConfusionCounts {
    pub fn zero(labels: &LabelMap) -> Self {
        Self {
            labels: labels
                .names()
                .iter()
                .map(|n| (n.clone(), LabelCounts::default()))
                .collect(),
            total_duration: 0.0,
            matrix: None,
        }
    }

    pub fn get(&self, label: &str) -> Option<&LabelCounts> {
        self.labels.get(label)
    }

    pub fn label_mut(&mut self, label: &str) -> &mut LabelCounts {
        self.labels.get_mut(label).expect("label present in counts")
    }

    /// Sets each label's TN to the sum of TP over every other label. This is
    /// how event-based scorers get a true-negative count: correct detections
    /// of the complementary classes.
    pub fn set_complement_tn(&mut self) {
        let total_tp: f64 = self.labels.values().map(|c| c.tp).sum();
        for c in self.labels.values_mut() {
            c.tn = total_tp - c.tp;
        }
    }

    /// Element-wise sum. Label sets must agree.
    pub fn accumulate(&self, other: &Self) -> Result<Self> {
        accumulate(self, other)
    }
}

/// Element-wise sum of two count sets; durations add. A missing matrix
/// counts as zero.
pub fn accumulate(a: &ConfusionCounts, b: &ConfusionCounts) -> Result<ConfusionCounts> {
    if a.labels.len() != b.labels.len() || a.labels.keys().zip(b.labels.keys()).any(|(x, y)| x != y)
    {
        return Err(Error::LabelSetMismatch);
    }
    let labels = a
        .labels
        .iter()
        .zip(b.labels.values())
        .map(|((k, x), y)| (k.clone(), x.add(y)))
        .collect();
    let matrix = match (&a.matrix, &b.matrix) {
        (None, None) => None,
        (Some(m), None) | (None, Some(m)) => Some(m.clone()),
        (Some(x), Some(y)) => {
            if x.labels != y.labels {
                return Err(Error::LabelSetMismatch);
            }
            let cells = x
                .cells
                .iter()
                .zip(&y.cells)
                .map(|(rx, ry)| rx.iter().zip(ry).map(|(p, q)| p + q).collect())
                .collect();
            Some(ConfusionMatrix {
                labels: x.labels.clone(),
                cells,
            })
        }
    };
    Ok(ConfusionCounts {
        labels,
        total_duration: a.total_duration + b.total_duration,
        matrix,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivedMeasures {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub fa_per_24h: Option<f64>,
    pub kappa: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Derives the scalar measures for `focus`. Unknown labels yield an
/// all-undefined result.
pub fn derive(counts: &ConfusionCounts, focus: &str) -> DerivedMeasures {
    let Some(c) = counts.get(focus) else {
        return DerivedMeasures::default();
    };
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    let f1 = match (precision, sensitivity) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    DerivedMeasures {
        sensitivity,
        specificity: ratio(c.tn, c.tn + c.fp),
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        f1,
        fa_per_24h: ratio(c.fp * SECONDS_PER_DAY, counts.total_duration),
        kappa: kappa(counts, focus).ok(),
    }
}

/// Cohen's kappa. Uses the full confusion matrix when the counts carry one
/// (EPOCH), otherwise the focus label's one-vs-rest 2x2 table.
pub fn kappa(counts: &ConfusionCounts, focus: &str) -> Result<f64> {
    if let Some(m) = &counts.matrix {
        return kappa_from_matrix(&m.cells);
    }
    let c = counts.get(focus).ok_or(Error::NoObservations)?;
    kappa_from_matrix(&[vec![c.tp, c.fn_], vec![c.fp, c.tn]])
}

/// kappa = (p_o - p_e) / (1 - p_e) on a square ref-by-hyp matrix.
pub fn kappa_from_matrix(cells: &[Vec<f64>]) -> Result<f64> {
    let n: f64 = cells.iter().flatten().sum();
    if n <= 0.0 {
        return Err(Error::NoObservations);
    }
    let k = cells.len();
    let diag: f64 = (0..k).map(|i| cells[i][i]).sum();
    let p_o = diag / n;
    let p_e: f64 = (0..k)
        .map(|i| {
            let row: f64 = cells[i].iter().sum();
            let col: f64 = cells.iter().map(|r| r[i]).sum();
            (row / n) * (col / n)
        })
        .sum();
    if p_e >= 1.0 {
        // Both raters used a single label for everything.
        return Ok(if p_o >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
