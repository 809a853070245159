//! Annotation data model: labels, events, validated documents, and the
//! plain-text term-file and pair-list formats.
//!
//! Term file:
//!
//! ```text
//! # comment
//! duration = 10.0000 secs
//! 0.0000 1.0000 bckg 1.0000
//! 1.0000 3.0000 seiz 0.8700
//! ```
//!
//! Data lines are `start stop label [confidence]`. The duration header is
//! optional. Gaps between events are legal and are closed by
//! [`AnnotationDoc::fill_gaps`]; overlaps are rejected.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a label inside a [`LabelMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelId(pub usize);

/// The closed set of labels a scoring run knows about. Exactly one label is
/// the target (positive) class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    names: Vec<String>,
    target: LabelId,
}

impl LabelMap {
    pub fn new<S: AsRef<str>>(names: &[S], target: &str) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::LabelMap("at least two labels are required".into()));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            if n.is_empty() || n.chars().any(char::is_whitespace) {
                return Err(Error::LabelMap(format!("invalid label name '{n}'")));
            }
            if !seen.insert(n.to_string()) {
                return Err(Error::LabelMap(format!("duplicate label '{n}'")));
            }
            out.push(n.to_string());
        }
        let target = out
            .iter()
            .position(|n| n == target)
            .map(LabelId)
            .ok_or_else(|| Error::LabelMap(format!("target label '{target}' is not in the map")))?;
        Ok(Self { names: out, target })
    }

    /// `seiz` (target) and `bckg`.
    pub fn seizure() -> Self {
        Self::new(&["seiz", "bckg"], "seiz").expect("static label map")
    }

    pub fn id(&self, name: &str) -> Option<LabelId> {
        self.names.iter().position(|n| n == name).map(LabelId)
    }

    pub fn require(&self, name: &str) -> Result<LabelId> {
        self.id(name)
            .ok_or_else(|| Error::LabelMap(format!("label '{name}' is not in the map")))
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id.0]
    }

    pub fn target(&self) -> LabelId {
        self.target
    }

    pub fn is_target(&self, id: LabelId) -> bool {
        id == self.target
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> + '_ {
        (0..self.names.len()).map(LabelId)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One labeled half-open interval `[start, stop)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub start: f64,
    pub stop: f64,
    pub label: LabelId,
    /// Detection confidence in `[0, 1]`; `None` when the file gave none.
    pub confidence: Option<f64>,
}

impl Event {
    pub fn new(start: f64, stop: f64, label: LabelId) -> Self {
        Self {
            start,
            stop,
            label,
            confidence: None,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn duration(&self) -> f64 {
        self.stop - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.stop)
    }

    /// Confidence with the documented default of 1.0.
    pub fn score(&self) -> f64 {
        self.confidence.unwrap_or(1.0)
    }

    fn validate(&self, line: usize) -> Result<()> {
        if !self.start.is_finite() || !self.stop.is_finite() || self.start < 0.0 {
            return Err(Error::Malformed {
                line,
                message: format!("invalid time range {} {}", self.start, self.stop),
            });
        }
        if self.stop <= self.start {
            return Err(Error::EmptyInterval {
                line,
                start: self.start,
                stop: self.stop,
            });
        }
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Malformed {
                    line,
                    message: format!("confidence {c} is outside [0, 1]"),
                });
            }
        }
        Ok(())
    }
}

/// A validated, time-ordered, non-overlapping sequence of events covering
/// one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationDoc {
    events: Vec<Event>,
    duration: f64,
    /// Set when the duration came from a header or was imposed explicitly,
    /// rather than inferred from the last stop time.
    duration_fixed: bool,
    pub source_id: String,
    pub patient_id: String,
}

impl AnnotationDoc {
    /// Validates and sorts `events`. When `duration` is `None` it is the
    /// maximum stop time.
    pub fn new(events: Vec<Event>, duration: Option<f64>) -> Result<Self> {
        let numbered: Vec<(usize, Event)> = events
            .into_iter()
            .enumerate()
            .map(|(i, e)| (i + 1, e))
            .collect();
        Self::from_numbered(numbered, duration)
    }

    fn from_numbered(mut events: Vec<(usize, Event)>, duration: Option<f64>) -> Result<Self> {
        for (line, e) in &events {
            e.validate(*line)?;
        }
        events.sort_by(|a, b| a.1.start.total_cmp(&b.1.start));
        for w in events.windows(2) {
            let (prev, (line, next)) = (&w[0].1, &w[1]);
            if next.start < prev.stop {
                return Err(Error::Overlap {
                    line: *line,
                    start: next.start,
                    stop: next.stop,
                });
            }
        }
        let max_stop = events.last().map_or(0.0, |(_, e)| e.stop);
        let (duration, duration_fixed) = match duration {
            Some(d) => {
                if !d.is_finite() || d < max_stop {
                    return Err(Error::DurationMismatch(format!(
                        "declared duration {d} is shorter than the last event stop {max_stop}"
                    )));
                }
                (d, true)
            }
            None => (max_stop, false),
        };
        Ok(Self {
            events: events.into_iter().map(|(_, e)| e).collect(),
            duration,
            duration_fixed,
            source_id: String::new(),
            patient_id: String::new(),
        })
    }

    pub fn with_ids(mut self, source_id: impl Into<String>, patient_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self.patient_id = patient_id.into();
        self
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn duration_fixed(&self) -> bool {
        self.duration_fixed
    }

    /// Extends the recording to `duration`, which must cover every event.
    pub fn with_duration(&self, duration: f64) -> Result<Self> {
        let max_stop = self.events.last().map_or(0.0, |e| e.stop);
        if !duration.is_finite() || duration < max_stop {
            return Err(Error::DurationMismatch(format!(
                "duration {duration} is shorter than the last event stop {max_stop}"
            )));
        }
        let mut out = self.clone();
        out.duration = duration;
        out.duration_fixed = true;
        Ok(out)
    }

    /// True when the events tile `[0, duration]` with no gaps.
    pub fn is_tiled(&self) -> bool {
        let mut cursor = 0.0;
        for e in &self.events {
            if e.start != cursor {
                return false;
            }
            cursor = e.stop;
        }
        cursor == self.duration
    }

    /// Fills every uncovered sub-interval of `[0, duration]` with a
    /// `default_label` event of confidence 1.0.
    pub fn fill_gaps(&self, default_label: LabelId) -> Self {
        let mut out = Vec::with_capacity(self.events.len() * 2 + 1);
        let mut cursor = 0.0;
        for e in &self.events {
            if e.start > cursor {
                out.push(Event::new(cursor, e.start, default_label).with_confidence(1.0));
            }
            out.push(*e);
            cursor = e.stop;
        }
        if self.duration > cursor {
            out.push(Event::new(cursor, self.duration, default_label).with_confidence(1.0));
        }
        Self {
            events: out,
            ..self.clone()
        }
    }

    /// Labels in temporal order.
    pub fn label_sequence(&self) -> Vec<LabelId> {
        self.events.iter().map(|e| e.label).collect()
    }

    pub fn events_with(&self, label: LabelId) -> Vec<Event> {
        self.events
            .iter()
            .filter(|e| e.label == label)
            .copied()
            .collect()
    }

    /// Label at instant `t` under half-open intervals.
    pub fn label_at(&self, t: f64) -> Option<LabelId> {
        let i = self.events.partition_point(|e| e.stop <= t);
        self.events.get(i).filter(|e| e.start <= t).map(|e| e.label)
    }

    /// Renders the doc in the term-file format. Times are written with at
    /// least four fractional digits and enough digits to round-trip exactly.
    pub fn serialize(&self, labels: &LabelMap) -> String {
        let mut s = String::new();
        if self.duration_fixed {
            let _ = writeln!(s, "duration = {} secs", fmt_time(self.duration));
        }
        for e in &self.events {
            let _ = write!(
                s,
                "{} {} {}",
                fmt_time(e.start),
                fmt_time(e.stop),
                labels.name(e.label)
            );
            if let Some(c) = e.confidence {
                let _ = write!(s, " {}", fmt_time(c));
            }
            s.push('\n');
        }
        s
    }

    /// Replaces events matched by `drop` with `background`, merging each
    /// run of consecutive background events that contains a replaced one.
    pub fn revert_to_background(
        &self,
        background: LabelId,
        mut drop: impl FnMut(&Event) -> bool,
    ) -> Self {
        let mapped: Vec<(Event, bool)> = self
            .events
            .iter()
            .map(|e| {
                if e.label != background && drop(e) {
                    (
                        Event::new(e.start, e.stop, background).with_confidence(1.0),
                        true,
                    )
                } else {
                    (*e, false)
                }
            })
            .collect();
        let mut out = Vec::with_capacity(mapped.len());
        let mut i = 0;
        while i < mapped.len() {
            if mapped[i].0.label != background {
                out.push(mapped[i].0);
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < mapped.len()
                && mapped[j].0.label == background
                && mapped[j].0.start == mapped[j - 1].0.stop
            {
                j += 1;
            }
            let run = &mapped[i..j];
            if run.iter().any(|(_, dropped)| *dropped) {
                out.push(
                    Event::new(run[0].0.start, run[run.len() - 1].0.stop, background)
                        .with_confidence(1.0),
                );
            } else {
                out.extend(run.iter().map(|(e, _)| *e));
            }
            i = j;
        }
        Self {
            events: out,
            ..self.clone()
        }
    }
}

fn fmt_time(t: f64) -> String {
    let fixed = format!("{t:.4}");
    if fixed.parse::<f64>().ok() == Some(t) {
        fixed
    } else {
        format!("{t}")
    }
}

/// Parses a term file. Events are sorted and validated; errors carry the
/// 1-based line number.
pub fn parse_annotation(text: &str, labels: &LabelMap) -> Result<AnnotationDoc> {
    let mut events = Vec::new();
    let mut duration = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("duration") {
            duration = Some(parse_duration_header(rest, line)?);
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::Malformed {
                line,
                message: format!(
                    "expected 'start stop label [confidence]', got {} fields",
                    fields.len()
                ),
            });
        }
        let start = parse_number(fields[0], line, "start time")?;
        let stop = parse_number(fields[1], line, "stop time")?;
        let label = labels.id(fields[2]).ok_or_else(|| Error::UnknownLabel {
            line,
            label: fields[2].to_string(),
        })?;
        let mut event = Event::new(start, stop, label);
        if let Some(c) = fields.get(3) {
            event.confidence = Some(parse_number(c, line, "confidence")?);
        }
        events.push((line, event));
    }
    AnnotationDoc::from_numbered(events, duration)
}

fn parse_duration_header(rest: &str, line: usize) -> Result<f64> {
    let malformed = || Error::Malformed {
        line,
        message: "expected 'duration = <secs> secs'".into(),
    };
    let rest = rest.trim_start().strip_prefix('=').ok_or_else(malformed)?;
    let mut it = rest.split_whitespace();
    let value = it.next().ok_or_else(malformed)?;
    match it.next() {
        None | Some("secs") | Some("sec") | Some("s") => {}
        Some(_) => return Err(malformed()),
    }
    if it.next().is_some() {
        return Err(malformed());
    }
    let d = parse_number(value, line, "duration")?;
    if d < 0.0 {
        return Err(malformed());
    }
    Ok(d)
}

fn parse_number(field: &str, line: usize, what: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Malformed {
            line,
            message: format!("invalid {what} '{field}'"),
        }),
    }
}

/// Brings a reference/hypothesis pair to a common duration and closes all
/// gaps with `default_label`.
///
/// A declared duration on either side wins; two different declared
/// durations, or a declared duration shorter than the other side's events,
/// are errors. Otherwise the common duration is the larger of the two.
pub fn normalize_pair(
    reference: &AnnotationDoc,
    hypothesis: &AnnotationDoc,
    default_label: LabelId,
) -> Result<(AnnotationDoc, AnnotationDoc)> {
    let duration = match (reference.duration_fixed, hypothesis.duration_fixed) {
        (true, true) if reference.duration != hypothesis.duration => {
            return Err(Error::DurationMismatch(format!(
                "reference declares {} s, hypothesis declares {} s",
                reference.duration, hypothesis.duration
            )))
        }
        (true, _) => reference.duration,
        (false, true) => hypothesis.duration,
        (false, false) => reference.duration.max(hypothesis.duration),
    };
    let r = reference.with_duration(duration)?.fill_gaps(default_label);
    let h = hypothesis.with_duration(duration)?.fill_gaps(default_label);
    Ok((r, h))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEntry {
    pub ref_path: String,
    pub hyp_path: String,
    pub patient_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairList {
    pub entries: Vec<PairEntry>,
}

/// Parses `ref_path hyp_path patient_id` lines. `#` starts a comment.
pub fn parse_pair_list(text: &str) -> Result<PairList> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Malformed {
                line,
                message: format!(
                    "expected 'ref_path hyp_path patient_id', got {} fields",
                    fields.len()
                ),
            });
        }
        if !seen.insert((fields[0].to_string(), fields[1].to_string())) {
            return Err(Error::DuplicatePair {
                line,
                ref_path: fields[0].into(),
                hyp_path: fields[1].into(),
            });
        }
        entries.push(PairEntry {
            ref_path: fields[0].into(),
            hyp_path: fields[1].into(),
            patient_id: fields[2].into(),
        });
    }
    Ok(PairList { entries })
}
