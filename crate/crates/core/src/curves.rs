//! Threshold sweeps over hypothesis confidences, producing DET operating
//! points and the area under the DET and ROC curves.
//!
//! At each threshold, target-label hypothesis events below it revert to the
//! background label and the whole corpus is rescored. Both areas are
//! trapezoidal over the false-positive rate after extending the curve to the
//! corners: `(0, 1)` and `(1, 0)` for DET, `(0, 0)` and `(1, 1)` for ROC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annot::{AnnotationDoc, LabelId, LabelMap};
use crate::counts::{accumulate, ConfusionCounts};
use crate::error::{Error, Result};
use crate::scoring::{score_pair, Metric, ScoringParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetCurve {
    pub metric: Metric,
    pub points: Vec<DetPoint>,
    pub auc: f64,
    pub roc_auc: f64,
}

impl DetCurve {
    pub fn new(metric: Metric, points: Vec<DetPoint>) -> Self {
        let auc = det_auc(&points);
        let roc_auc = roc_auc(&points);
        Self {
            metric,
            points,
            auc,
            roc_auc,
        }
    }

    /// Plain-text columns `threshold fp_rate fn_rate`.
    pub fn to_columns(&self) -> String {
        let mut s = format!(
            "# metric: {}\n# det_auc: {:.6}\n# roc_auc: {:.6}\n# threshold fp_rate fn_rate\n",
            self.metric, self.auc, self.roc_auc
        );
        for p in &self.points {
            s.push_str(&format!(
                "{:.6} {:.6} {:.6}\n",
                p.threshold, p.fp_rate, p.fn_rate
            ));
        }
        s
    }
}

pub fn auc(curve: &DetCurve) -> f64 {
    det_auc(&curve.points)
}

fn trapezoid(mut pts: Vec<(f64, f64)>) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
        .sum()
}

/// Area under the miss-rate curve over the full false-positive range.
pub fn det_auc(points: &[DetPoint]) -> f64 {
    // Sorting by (fp, -fn) keeps vertical segments from contributing area.
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.fp_rate, -p.fn_rate)).collect();
    pts.push((0.0, -1.0));
    pts.push((1.0, 0.0));
    -trapezoid(pts)
}

/// Area under the ROC curve (TP rate against FP rate).
pub fn roc_auc(points: &[DetPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.fp_rate, 1.0 - p.fn_rate))
        .collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    trapezoid(pts)
}

/// Sorted distinct confidences of target-label hypothesis events.
pub fn exact_grid(pairs: &[(AnnotationDoc, AnnotationDoc)], labels: &LabelMap) -> Result<Vec<f64>> {
    let target = labels.target();
    let mut grid: Vec<f64> = pairs
        .iter()
        .flat_map(|(_, h)| h.events().iter())
        .filter(|e| e.label == target)
        .filter_map(|e| e.confidence)
        .collect();
    if grid.is_empty() {
        return Err(Error::NoConfidences);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

/// `n` evenly spaced thresholds over `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Corpus counts with target events under `threshold` reverted to `background`.
pub fn score_at_threshold(
    pairs: &[(AnnotationDoc, AnnotationDoc)],
    metric: Metric,
    threshold: f64,
    params: &ScoringParams,
    labels: &LabelMap,
    background: LabelId,
) -> Result<ConfusionCounts> {
    let target = labels.target();
    let mut params = *params;
    params.atwv.theta = 0.0;
    let mut total = ConfusionCounts::zero(labels);
    for (r, h) in pairs {
        let filtered =
            h.revert_to_background(background, |e| e.label == target && e.score() < threshold);
        let s = score_pair(metric, r, &filtered, &params, labels)?;
        total = accumulate(&total, &s.counts)?;
    }
    Ok(total)
}

/// Sweeps `thresholds` (strictly increasing) over normalized pairs.
pub fn sweep(
    pairs: &[(AnnotationDoc, AnnotationDoc)],
    metric: Metric,
    thresholds: &[f64],
    params: &ScoringParams,
    labels: &LabelMap,
    background: LabelId,
) -> Result<DetCurve> {
    exact_grid(pairs, labels)?;
    if thresholds.is_empty() {
        return Err(Error::Config("empty threshold grid".into()));
    }
    if thresholds
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(Error::Config(
            "thresholds must be strictly increasing".into(),
        ));
    }
    let target_name = labels.name(labels.target()).to_string();
    let points = thresholds
        .par_iter()
        .map(|&t| {
            let counts = score_at_threshold(pairs, metric, t, params, labels, background)?;
            let c = counts.get(&target_name).copied().unwrap_or_default();
            let neg = c.fp + c.tn;
            let pos = c.fn_ + c.tp;
            if neg <= 0.0 || pos <= 0.0 {
                return Err(Error::InsufficientData(format!(
                    "threshold {t}: rates undefined (positives {pos}, negatives {neg})"
                )));
            }
            Ok(DetPoint {
                threshold: t,
                fp_rate: c.fp / neg,
                fn_rate: c.fn_ / pos,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DetCurve::new(metric, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(fp: f64, fnr: f64) -> DetPoint {
        DetPoint {
            threshold: 0.0,
            fp_rate: fp,
            fn_rate: fnr,
        }
    }

    #[test]
    fn corner_point_gives_half() {
        assert_eq!(det_auc(&[pt(0.0, 1.0)]), 0.5);
        assert_eq!(roc_auc(&[pt(0.0, 1.0)]), 0.5);
    }

    #[test]
    fn perfect_point() {
        assert_eq!(roc_auc(&[pt(0.0, 0.0)]), 1.0);
        assert_eq!(det_auc(&[pt(0.0, 0.0)]), 0.0);
    }

    #[test]
    fn roc_and_det_are_complementary() {
        let pts = [pt(0.1, 0.6), pt(0.3, 0.2), pt(0.7, 0.05), pt(0.3, 0.4)];
        assert!((roc_auc(&pts) + det_auc(&pts) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform() {
        assert_eq!(uniform_grid(3), vec![0.0, 0.5, 1.0]);
        assert!(uniform_grid(0).is_empty());
    }
}
