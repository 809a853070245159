//! Time-ignorant label-sequence alignment by minimum edit distance with unit
//! substitution, insertion and deletion costs.

use std::fmt::Write as _;

use crate::annot::{AnnotationDoc, LabelId, LabelMap};
use crate::counts::ConfusionCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Hit,
    Sub,
    /// Reference symbol with no hypothesis counterpart.
    Del,
    /// Hypothesis symbol with no reference counterpart.
    Ins,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alignment {
    /// `(ref_slot, hyp_slot)`; `None` marks a gap.
    pub pairs: Vec<(Option<LabelId>, Option<LabelId>)>,
    pub hits: usize,
    pub subs: usize,
    pub ins: usize,
    pub dels: usize,
}

impl Alignment {
    pub fn errors(&self) -> usize {
        self.subs + self.ins + self.dels
    }

    pub fn ops(&self) -> impl Iterator<Item = EditOp> + '_ {
        self.pairs.iter().map(|p| match *p {
            (Some(r), Some(h)) if r == h => EditOp::Hit,
            (Some(_), Some(_)) => EditOp::Sub,
            (Some(_), None) => EditOp::Del,
            (None, Some(_)) => EditOp::Ins,
            (None, None) => unreachable!("empty alignment column"),
        })
    }

    /// Two-line printout: correct tokens lowercase, errors uppercase, gaps
    /// as asterisks, followed by the error summary.
    pub fn render(&self, labels: &LabelMap) -> String {
        let mut ref_line = String::from("Ref:");
        let mut hyp_line = String::from("Hyp:");
        for (op, (r, h)) in self.ops().zip(&self.pairs) {
            let fmt = |slot: &Option<LabelId>, width: usize| -> String {
                let tok = match slot {
                    Some(id) if op == EditOp::Hit => labels.name(*id).to_lowercase(),
                    Some(id) => labels.name(*id).to_uppercase(),
                    None => "*".repeat(width),
                };
                format!("{tok:<width$}")
            };
            let width = [r, h]
                .iter()
                .filter_map(|s| s.map(|id| labels.name(id).len()))
                .max()
                .unwrap_or(4)
                .max(4);
            let _ = write!(ref_line, " {}", fmt(r, width));
            let _ = write!(hyp_line, " {}", fmt(h, width));
        }
        format!(
            "{}\n{}\n(Hits: {} Sub: {} Ins: {} Del: {} Total Errors: {})\n",
            ref_line.trim_end(),
            hyp_line.trim_end(),
            self.hits,
            self.subs,
            self.ins,
            self.dels,
            self.errors()
        )
    }
}

/// Minimum-edit-distance alignment. On backtrace ties a hit is preferred
/// over a substitution, a substitution over a deletion, and a deletion
/// over an insertion.
pub fn align(reference: &[LabelId], hypothesis: &[LabelId]) -> Alignment {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0u32; (n + 1) * w];
    for (j, cell) in d[..w].iter_mut().enumerate() {
        *cell = j as u32;
    }
    for i in 1..=n {
        d[i * w] = i as u32;
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + u32::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = diag.min(del).min(ins);
        }
    }

    let mut out = Alignment::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let cur = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            let diag = d[(i - 1) * w + j - 1];
            if same && diag == cur {
                out.hits += 1;
                out.pairs
                    .push((Some(reference[i - 1]), Some(hypothesis[j - 1])));
                i -= 1;
                j -= 1;
                continue;
            }
            if !same && diag + 1 == cur {
                out.subs += 1;
                out.pairs
                    .push((Some(reference[i - 1]), Some(hypothesis[j - 1])));
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == cur {
            out.dels += 1;
            out.pairs.push((Some(reference[i - 1]), None));
            i -= 1;
        } else {
            out.ins += 1;
            out.pairs.push((None, Some(hypothesis[j - 1])));
            j -= 1;
        }
    }
    out.pairs.reverse();
    out
}

/// Aligns the two label sequences and converts the edit operations into
/// per-label counts. A substitution is a miss for its reference label and a
/// false alarm for its hypothesis label.
pub fn score_dpalign(
    reference: &AnnotationDoc,
    hypothesis: &AnnotationDoc,
    labels: &LabelMap,
) -> ConfusionCounts {
    let ali = align(&reference.label_sequence(), &hypothesis.label_sequence());
    counts_from_alignment(&ali, reference, hypothesis, labels)
}

pub fn counts_from_alignment(
    ali: &Alignment,
    reference: &AnnotationDoc,
    hypothesis: &AnnotationDoc,
    labels: &LabelMap,
) -> ConfusionCounts {
    let k = labels.len();
    let (mut tp, mut fn_, mut fp) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for (op, (r, h)) in ali.ops().zip(&ali.pairs) {
        match op {
            EditOp::Hit => tp[r.expect("hit has ref").0] += 1.0,
            EditOp::Sub => {
                fn_[r.expect("sub has ref").0] += 1.0;
                fp[h.expect("sub has hyp").0] += 1.0;
            }
            EditOp::Del => fn_[r.expect("del has ref").0] += 1.0,
            EditOp::Ins => fp[h.expect("ins has hyp").0] += 1.0,
        }
    }
    let mut counts = ConfusionCounts::zero(labels);
    counts.total_duration = reference.duration();
    for id in labels.ids() {
        let c = counts.label_mut(labels.name(id));
        c.tp = tp[id.0];
        c.fn_ = fn_[id.0];
        c.fp = fp[id.0];
        c.n_ref = reference.events().iter().filter(|e| e.label == id).count() as u64;
        c.n_hyp = hypothesis.events().iter().filter(|e| e.label == id).count() as u64;
    }
    counts.set_complement_tn();
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    const B: LabelId = LabelId(1);
    const S: LabelId = LabelId(0);

    #[test]
    fn extra_events_are_insertions() {
        let r = [B, S, B, S, B];
        let h = [B, S, B, S, B, S, B];
        let a = align(&r, &h);
        assert_eq!((a.hits, a.subs, a.ins, a.dels), (5, 0, 2, 0));
        let a = align(&h, &r);
        assert_eq!((a.hits, a.subs, a.ins, a.dels), (5, 0, 0, 2));
    }

    #[test]
    fn empty_sequences() {
        assert_eq!(align(&[], &[]), Alignment::default());
        let a = align(&[S, B], &[]);
        assert_eq!(a.dels, 2);
        let a = align(&[], &[S]);
        assert_eq!(a.ins, 1);
    }

    #[test]
    fn identical() {
        let r = [B, S, B, S];
        let a = align(&r, &r);
        assert_eq!((a.hits, a.errors()), (4, 0));
    }

    #[test]
    fn tie_prefers_substitution_over_indel() {
        let a = align(&[S], &[B]);
        assert_eq!((a.subs, a.ins, a.dels), (1, 0, 0));
    }

    #[test]
    fn render_layout() {
        let l = LabelMap::seizure();
        let a = align(&[B, S], &[B, S, B]);
        let text = a.render(&l);
        assert!(
            text.contains("(Hits: 2 Sub: 0 Ins: 1 Del: 0 Total Errors: 1)"),
            "{text}"
        );
        assert!(text.contains("****"), "{text}");
        assert!(text.contains("BCKG"), "{text}");
        assert!(text.starts_with("Ref:"), "{text}");
    }
}
