//! Metric selection and per-pair dispatch.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annot::{AnnotationDoc, LabelMap};
use crate::atwv::{score_atwv, AtwvCounts, AtwvParams};
use crate::counts::ConfusionCounts;
use crate::dpalign::score_dpalign;
use crate::epoch::{score_epoch, EpochParams};
use crate::error::{Error, Result};
use crate::ovlp::{score_ovlp, OvlpParams};
use crate::taes::{score_taes, TaesParams};

/// Declaration order is alphabetical so the derived `Ord` gives the
/// canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Atwv,
    Dpalign,
    Epoch,
    /// Cohen's kappa over EPOCH counts.
    Ira,
    Ovlp,
    Taes,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Atwv,
        Metric::Dpalign,
        Metric::Epoch,
        Metric::Ira,
        Metric::Ovlp,
        Metric::Taes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Atwv => "atwv",
            Metric::Dpalign => "dpalign",
            Metric::Epoch => "epoch",
            Metric::Ira => "ira",
            Metric::Ovlp => "ovlp",
            Metric::Taes => "taes",
        }
    }

    /// Metrics that produce their own counts (IRA reuses EPOCH's).
    pub fn is_primary(self) -> bool {
        self != Metric::Ira
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown metric '{s}'")))
    }
}

/// Parses a comma-separated metric list into a sorted, de-duplicated set.
pub fn parse_metric_list(s: &str) -> Result<Vec<Metric>> {
    let mut out: Vec<Metric> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Config("no metrics selected".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScoringParams {
    pub epoch: EpochParams,
    pub ovlp: OvlpParams,
    pub taes: TaesParams,
    pub atwv: AtwvParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub counts: ConfusionCounts,
    pub atwv: Option<AtwvCounts>,
}

/// Scores one normalized (gap-filled, common-duration) pair.
pub fn score_pair(
    metric: Metric,
    reference: &AnnotationDoc,
    hypothesis: &AnnotationDoc,
    params: &ScoringParams,
    labels: &LabelMap,
) -> Result<PairScore> {
    let counts = match metric {
        Metric::Epoch | Metric::Ira => score_epoch(reference, hypothesis, &params.epoch, labels)?,
        Metric::Ovlp => score_ovlp(reference, hypothesis, &params.ovlp, labels),
        Metric::Taes => score_taes(reference, hypothesis, &params.taes, labels),
        Metric::Dpalign => score_dpalign(reference, hypothesis, labels),
        Metric::Atwv => {
            let r = score_atwv(reference, hypothesis, &params.atwv, labels)?;
            return Ok(PairScore {
                counts: r.counts,
                atwv: Some(r.terms),
            });
        }
    };
    Ok(PairScore { counts, atwv: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_list() {
        let m = parse_metric_list("taes,epoch,epoch,ATWV").unwrap();
        assert_eq!(m, vec![Metric::Atwv, Metric::Epoch, Metric::Taes]);
        assert!(parse_metric_list("").is_err());
        assert!(parse_metric_list("wer").is_err());
    }

    #[test]
    fn canonical_order_is_by_name() {
        let mut names: Vec<_> = Metric::ALL.iter().map(|m| m.name()).collect();
        let sorted = names.clone();
        names.sort();
        assert_eq!(names, sorted);
    }
}
