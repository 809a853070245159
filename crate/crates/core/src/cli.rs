//! Batch driver: load pair lists, score every pair with the selected
//! metrics, and build the corpus report, DET curves, or cross-system
//! statistics. `main.rs` is a thin argument-parsing shell around this.
//!
//! Pairs are scored in parallel but collected in input order and then
//! accumulated sequentially in canonical (ref path, hyp path) order, so the
//! output does not depend on the worker count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annot::{
    normalize_pair, parse_annotation, parse_pair_list, AnnotationDoc, LabelId, LabelMap, PairEntry,
};
use crate::atwv::{AtwvCounts, AtwvParams};
use crate::counts::{accumulate, derive, ConfusionCounts, DerivedMeasures};
use crate::curves::{exact_grid, sweep, uniform_grid, DetCurve};
use crate::epoch::EpochParams;
use crate::error::{Error, Result};
use crate::ovlp::OvlpParams;
use crate::scoring::{score_pair, Metric, ScoringParams};
use crate::stats::{
    ks_normality, pearson_r, render_correlation_matrix, render_significance_grid, z_test,
    Correlation, CorrelationMatrix, KsResult, ScoreVector, SignificanceGrid, ZTest,
};
use crate::taes::{MultiRefPolicy, TaesParams};

pub const TOOL_NAME: &str = "evscore";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdGrid {
    /// Every distinct target-label confidence in the hypotheses.
    Exact,
    /// `n` evenly spaced thresholds over `[0, 1]`.
    Uniform(usize),
}

impl std::str::FromStr for ThresholdGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(Self::Exact);
        }
        let n = s
            .strip_prefix("uniform:")
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|n| *n >= 2)
            .ok_or_else(|| {
                Error::Config(format!(
                    "invalid grid '{s}' (expected exact or uniform:N, N >= 2)"
                ))
            })?;
        Ok(Self::Uniform(n))
    }
}

/// Which patients to drop when a system produced no target detections.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionPolicy {
    /// Only for comparisons that involve the system in question.
    #[default]
    PerPair,
    /// From every comparison.
    Global,
}

impl std::str::FromStr for ExclusionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-pair" => Ok(Self::PerPair),
            "global" => Ok(Self::Global),
            _ => Err(Error::Config(format!(
                "invalid exclusion policy '{s}' (expected per-pair or global)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub pair_list: PathBuf,
    pub metrics: Vec<Metric>,
    pub params: ScoringParams,
    pub labels: LabelMap,
    pub default_label: String,
    pub alpha: f64,
    pub grid: ThresholdGrid,
    pub exclusion: ExclusionPolicy,
    /// Worker threads; `None` uses the rayon default.
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn new(pair_list: impl Into<PathBuf>) -> Self {
        Self {
            pair_list: pair_list.into(),
            metrics: Metric::ALL.to_vec(),
            params: ScoringParams::default(),
            labels: LabelMap::seizure(),
            default_label: "bckg".into(),
            alpha: crate::stats::DEFAULT_ALPHA,
            grid: ThresholdGrid::Exact,
            exclusion: ExclusionPolicy::PerPair,
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::Config("no metrics selected".into()));
        }
        EpochParams::new(self.params.epoch.epoch_duration)?;
        OvlpParams::new(self.params.ovlp.guard_band)?;
        AtwvParams::new(self.params.atwv.beta, self.params.atwv.theta)?;
        let bg = self.background()?;
        if bg == self.labels.target() {
            return Err(Error::Config(
                "the default label cannot be the target label".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn background(&self) -> Result<LabelId> {
        self.labels.id(&self.default_label).ok_or_else(|| {
            Error::Config(format!(
                "default label '{}' is not in the label map",
                self.default_label
            ))
        })
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            pair_list: self.pair_list.display().to_string(),
            metrics: self.metrics.clone(),
            epoch_duration: self.params.epoch.epoch_duration,
            guard_band: self.params.ovlp.guard_band,
            beta: self.params.atwv.beta,
            theta: self.params.atwv.theta,
            taes_policy: self.params.taes.multi_ref_policy,
            default_label: self.default_label.clone(),
            labels: self.labels.names().to_vec(),
            target: self.labels.name(self.labels.target()).to_string(),
        }
    }

    fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.jobs {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub pair_list: String,
    pub metrics: Vec<Metric>,
    pub epoch_duration: f64,
    pub guard_band: f64,
    pub beta: f64,
    pub theta: f64,
    pub taes_policy: MultiRefPolicy,
    pub default_label: String,
    pub labels: Vec<String>,
    pub target: String,
}

impl ConfigEcho {
    pub fn scoring_params(&self) -> ScoringParams {
        ScoringParams {
            epoch: EpochParams {
                epoch_duration: self.epoch_duration,
            },
            ovlp: OvlpParams {
                guard_band: self.guard_band,
            },
            taes: TaesParams {
                multi_ref_policy: self.taes_policy,
            },
            atwv: AtwvParams {
                beta: self.beta,
                theta: self.theta,
            },
        }
    }
}

/// A parsed and normalized reference/hypothesis pair.
#[derive(Debug, Clone)]
pub struct LoadedPair {
    pub entry: PairEntry,
    pub reference: AnnotationDoc,
    pub hypothesis: AnnotationDoc,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_doc(path: &Path, labels: &LabelMap, patient: &str) -> Result<AnnotationDoc> {
    let text = read(path)?;
    let doc = parse_annotation(&text, labels).map_err(|e| e.in_file(path))?;
    Ok(doc.with_ids(path.display().to_string(), patient))
}

/// Reads the pair list and every file it names. Relative paths resolve
/// against the pair list's directory; when `hyp_root` is given, hypothesis
/// paths resolve against it instead.
pub fn load_pairs(config: &RunConfig, hyp_root: Option<&Path>) -> Result<Vec<LoadedPair>> {
    let text = read(&config.pair_list)?;
    let list = parse_pair_list(&text).map_err(|e| e.in_file(&config.pair_list))?;
    let base = config
        .pair_list
        .parent()
        .unwrap_or(Path::new(""))
        .to_path_buf();
    let hyp_base = hyp_root
        .map(Path::to_path_buf)
        .unwrap_or_else(|| base.clone());
    let background = config.background()?;
    list.entries
        .par_iter()
        .map(|entry| {
            let ref_path = resolve(&base, &entry.ref_path);
            let hyp_path = resolve(&hyp_base, &entry.hyp_path);
            let r = load_doc(&ref_path, &config.labels, &entry.patient_id)?;
            let h = load_doc(&hyp_path, &config.labels, &entry.patient_id)?;
            let (reference, hypothesis) =
                normalize_pair(&r, &h, background).map_err(|e| e.in_file(&hyp_path))?;
            Ok(LoadedPair {
                entry: entry.clone(),
                reference,
                hypothesis,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtwvSummary {
    pub terms: AtwvCounts,
    pub twv: BTreeMap<String, Option<f64>>,
    pub atwv: Option<f64>,
}

impl AtwvSummary {
    fn new(terms: AtwvCounts, beta: f64) -> Self {
        Self {
            twv: terms.twv(beta),
            atwv: terms.atwv(beta),
            terms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileScore {
    pub ref_path: String,
    pub hyp_path: String,
    pub patient_id: String,
    pub counts: ConfusionCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atwv: Option<AtwvSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSection {
    pub metric: Metric,
    pub corpus: ConfusionCounts,
    pub measures: BTreeMap<String, DerivedMeasures>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atwv: Option<AtwvSummary>,
    pub files: Vec<FileScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tool: String,
    pub version: String,
    pub config: ConfigEcho,
    pub metrics: Vec<MetricSection>,
}

impl MetricReport {
    pub fn section(&self, metric: Metric) -> Option<&MetricSection> {
        self.metrics.iter().find(|s| s.metric == metric)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Scores every pair with `metric`; results come back in canonical order.
fn score_files(
    pairs: &[LoadedPair],
    metric: Metric,
    params: &ScoringParams,
    labels: &LabelMap,
) -> Result<Vec<FileScore>> {
    let mut files = pairs
        .par_iter()
        .map(|p| {
            let s = score_pair(metric, &p.reference, &p.hypothesis, params, labels)
                .map_err(|e| e.in_file(&p.hypothesis.source_id))?;
            Ok(FileScore {
                ref_path: p.entry.ref_path.clone(),
                hyp_path: p.entry.hyp_path.clone(),
                patient_id: p.entry.patient_id.clone(),
                counts: s.counts,
                atwv: s.atwv.map(|t| AtwvSummary::new(t, params.atwv.beta)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    files.sort_by(|a, b| (&a.ref_path, &a.hyp_path).cmp(&(&b.ref_path, &b.hyp_path)));
    Ok(files)
}

fn section_from_files(
    metric: Metric,
    files: Vec<FileScore>,
    labels: &LabelMap,
    beta: f64,
) -> Result<MetricSection> {
    let mut corpus = ConfusionCounts::zero(labels);
    let mut terms: Option<AtwvCounts> = None;
    for f in &files {
        corpus = accumulate(&corpus, &f.counts)?;
        if let Some(a) = &f.atwv {
            terms = Some(match terms {
                None => a.terms.clone(),
                Some(t) => t.accumulate(&a.terms)?,
            });
        }
    }
    let measures = corpus
        .labels
        .keys()
        .map(|k| (k.clone(), derive(&corpus, k)))
        .collect();
    Ok(MetricSection {
        metric,
        measures,
        atwv: terms.map(|t| AtwvSummary::new(t, beta)),
        corpus,
        files,
    })
}

/// Scores a loaded corpus.
pub fn score_corpus(pairs: &[LoadedPair], config: &RunConfig) -> Result<MetricReport> {
    let mut metrics = config.metrics.clone();
    metrics.sort();
    metrics.dedup();
    let mut sections = Vec::with_capacity(metrics.len());
    let mut epoch_files: Option<Vec<FileScore>> = None;
    for m in metrics {
        let files = match m {
            Metric::Epoch | Metric::Ira => match &epoch_files {
                Some(f) => f.clone(),
                None => {
                    let f = score_files(pairs, Metric::Epoch, &config.params, &config.labels)?;
                    epoch_files = Some(f.clone());
                    f
                }
            },
            _ => score_files(pairs, m, &config.params, &config.labels)?,
        };
        sections.push(section_from_files(
            m,
            files,
            &config.labels,
            config.params.atwv.beta,
        )?);
    }
    Ok(MetricReport {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        config: config.echo(),
        metrics: sections,
    })
}

pub fn run_score(config: &RunConfig) -> Result<MetricReport> {
    config.validate()?;
    config.in_pool(|| {
        let pairs = load_pairs(config, None)?;
        score_corpus(&pairs, config)
    })?
}

fn fmt_opt(v: Option<f64>, scale: f64, prec: usize) -> String {
    match v {
        Some(x) => format!("{:.*}", prec, x * scale),
        None => "--".into(),
    }
}

/// Aligned-column text rendering. Undefined values print as `--`.
pub fn render_report(report: &MetricReport) -> String {
    let mut s = String::new();
    let c = &report.config;
    let _ = writeln!(s, "{} {}", report.tool, report.version);
    let _ = writeln!(
        s,
        "pairs: {}  epoch: {} s  guard band: {} s  beta: {}  theta: {}  taes: {}  target: {}",
        c.pair_list, c.epoch_duration, c.guard_band, c.beta, c.theta, c.taes_policy, c.target
    );
    for sec in &report.metrics {
        let n_files = sec.files.len();
        let _ = writeln!(
            s,
            "\n== {} ({} file{}, {:.2} s) ==",
            sec.metric.name().to_uppercase(),
            n_files,
            if n_files == 1 { "" } else { "s" },
            sec.corpus.total_duration
        );
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>12} {:>8}",
            "label",
            "TP",
            "TN",
            "FP",
            "FN",
            "sens%",
            "spec%",
            "prec%",
            "F1",
            "acc%",
            "FA/24h",
            "kappa"
        );
        for (label, cnt) in &sec.corpus.labels {
            let d = &sec.measures[label];
            let _ = writeln!(
                s,
                "{:<8} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>12} {:>8}",
                label,
                cnt.tp,
                cnt.tn,
                cnt.fp,
                cnt.fn_,
                fmt_opt(d.sensitivity, 100.0, 2),
                fmt_opt(d.specificity, 100.0, 2),
                fmt_opt(d.precision, 100.0, 2),
                fmt_opt(d.f1, 1.0, 4),
                fmt_opt(d.accuracy, 100.0, 2),
                fmt_opt(d.fa_per_24h, 1.0, 2),
                fmt_opt(d.kappa, 1.0, 4),
            );
        }
        if let Some(a) = &sec.atwv {
            let parts: Vec<String> = a
                .twv
                .iter()
                .map(|(k, v)| format!("TWV({k}) = {}", fmt_opt(*v, 1.0, 4)))
                .collect();
            let _ = writeln!(
                s,
                "{}  ATWV = {}",
                parts.join("  "),
                fmt_opt(a.atwv, 1.0, 4)
            );
        }
        if sec.metric == Metric::Ira {
            let k = sec
                .corpus
                .matrix
                .as_ref()
                .and_then(|m| crate::counts::kappa_from_matrix(&m.cells).ok());
            let _ = writeln!(s, "kappa (all labels) = {}", fmt_opt(k, 1.0, 4));
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetReport {
    pub tool: String,
    pub version: String,
    pub config: ConfigEcho,
    pub grid: ThresholdGrid,
    pub curves: Vec<DetCurve>,
}

/// Builds one curve per selected metric. IRA shares EPOCH's counts and gets
/// no curve of its own.
pub fn det_corpus(pairs: &[LoadedPair], config: &RunConfig) -> Result<DetReport> {
    let docs: Vec<(AnnotationDoc, AnnotationDoc)> = pairs
        .iter()
        .map(|p| (p.reference.clone(), p.hypothesis.clone()))
        .collect();
    let thresholds = match config.grid {
        ThresholdGrid::Exact => exact_grid(&docs, &config.labels)?,
        ThresholdGrid::Uniform(n) => uniform_grid(n),
    };
    let background = config.background()?;
    let mut curves = Vec::new();
    for m in config.metrics.iter().copied().filter(|m| m.is_primary()) {
        curves.push(sweep(
            &docs,
            m,
            &thresholds,
            &config.params,
            &config.labels,
            background,
        )?);
    }
    if curves.is_empty() {
        return Err(Error::Config("no curve-capable metric selected".into()));
    }
    Ok(DetReport {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        config: config.echo(),
        grid: config.grid,
        curves,
    })
}

pub fn run_det(config: &RunConfig) -> Result<DetReport> {
    config.validate()?;
    config.in_pool(|| {
        let pairs = load_pairs(config, None)?;
        det_corpus(&pairs, config)
    })?
}

pub fn render_det(report: &DetReport) -> String {
    let mut s = String::new();
    for c in &report.curves {
        s.push_str(&c.to_columns());
        s.push('\n');
    }
    s
}

/// Metrics that take part in cross-metric statistics (IRA is derived).
pub const STATS_METRICS: [Metric; 5] = [
    Metric::Atwv,
    Metric::Dpalign,
    Metric::Epoch,
    Metric::Ovlp,
    Metric::Taes,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsEntry {
    pub system: String,
    pub metric: Metric,
    pub result: Option<KsResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemCorrelations {
    pub system: String,
    pub matrix: CorrelationMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: Metric,
    pub z_tests: SignificanceGrid,
    pub correlations: CorrelationMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureStats {
    pub measure: String,
    pub ks: Vec<KsEntry>,
    pub metric_correlations: Vec<SystemCorrelations>,
    pub system_comparisons: Vec<MetricComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusions {
    pub policy: ExclusionPolicy,
    /// Patients with no reference target events; dropped everywhere.
    pub no_reference_events: Vec<String>,
    /// Per system, patients for which it produced no target detection.
    pub no_detections: BTreeMap<String, Vec<String>>,
    pub excluded_count: usize,
    pub usable_patients: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub tool: String,
    pub version: String,
    pub config: ConfigEcho,
    pub alpha: f64,
    pub systems: Vec<String>,
    pub metrics: Vec<Metric>,
    pub exclusions: Exclusions,
    pub measures: Vec<MeasureStats>,
}

/// Per-patient derived measures for one system and metric.
#[derive(Debug, Clone, Default)]
struct PatientScores {
    measures: BTreeMap<String, DerivedMeasures>,
}

struct SystemData {
    name: String,
    by_metric: BTreeMap<Metric, PatientScores>,
    /// Patients whose hypotheses contain no target event.
    silent: BTreeSet<String>,
}

fn system_names(systems: &[PathBuf]) -> Vec<String> {
    let short: Vec<String> = systems
        .iter()
        .map(|p| {
            p.file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        })
        .collect();
    let unique: BTreeSet<&String> = short.iter().collect();
    if unique.len() == short.len() {
        short
    } else {
        systems.iter().map(|p| p.display().to_string()).collect()
    }
}

fn patient_table(
    pairs: &[LoadedPair],
    metric: Metric,
    config: &RunConfig,
) -> Result<PatientScores> {
    let files = score_files(pairs, metric, &config.params, &config.labels)?;
    let mut per_patient: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for f in files {
        let acc = per_patient
            .entry(f.patient_id.clone())
            .or_insert_with(|| ConfusionCounts::zero(&config.labels));
        *acc = accumulate(acc, &f.counts)?;
    }
    let target = config.labels.name(config.labels.target());
    Ok(PatientScores {
        measures: per_patient
            .into_iter()
            .map(|(p, c)| (p, derive(&c, target)))
            .collect(),
    })
}

fn vector(
    scores: &PatientScores,
    measure: &str,
    usable: &BTreeSet<String>,
    mask: &BTreeSet<String>,
) -> ScoreVector {
    ScoreVector::from_values(
        scores
            .measures
            .iter()
            .filter(|(p, _)| usable.contains(*p))
            .map(|(p, d)| {
                let v = if mask.contains(p) {
                    None
                } else if measure == "sensitivity" {
                    d.sensitivity
                } else {
                    d.specificity
                };
                (p.clone(), v)
            }),
    )
}

/// Cross-metric and cross-system statistics over per-patient scores.
pub fn stats_corpus(
    systems: &[(String, Vec<LoadedPair>)],
    config: &RunConfig,
) -> Result<StatsReport> {
    let metrics: Vec<Metric> = config
        .metrics
        .iter()
        .copied()
        .filter(|m| m.is_primary())
        .collect();
    if systems.len() < 2 && metrics.len() < 2 {
        return Err(Error::Config(
            "statistics need at least two systems or two metrics".into(),
        ));
    }
    let target = config.labels.target();

    let mut no_ref: BTreeSet<String> = BTreeSet::new();
    let mut all_patients: BTreeSet<String> = BTreeSet::new();
    let mut data = Vec::with_capacity(systems.len());
    for (name, pairs) in systems {
        let mut has_ref: BTreeMap<String, bool> = BTreeMap::new();
        let mut has_hyp: BTreeMap<String, bool> = BTreeMap::new();
        for p in pairs {
            let pid = &p.entry.patient_id;
            *has_ref.entry(pid.clone()).or_default() |=
                p.reference.events().iter().any(|e| e.label == target);
            *has_hyp.entry(pid.clone()).or_default() |=
                p.hypothesis.events().iter().any(|e| e.label == target);
        }
        no_ref.extend(has_ref.iter().filter(|(_, v)| !**v).map(|(k, _)| k.clone()));
        all_patients.extend(has_ref.keys().cloned());
        let silent = has_hyp
            .iter()
            .filter(|(_, v)| !**v)
            .map(|(k, _)| k.clone())
            .collect();
        let mut by_metric = BTreeMap::new();
        for &m in &metrics {
            by_metric.insert(m, patient_table(pairs, m, config)?);
        }
        data.push(SystemData {
            name: name.clone(),
            by_metric,
            silent,
        });
    }

    let global_silent: BTreeSet<String> =
        data.iter().flat_map(|d| d.silent.iter().cloned()).collect();
    let mut usable: BTreeSet<String> = all_patients.difference(&no_ref).cloned().collect();
    if config.exclusion == ExclusionPolicy::Global {
        usable = usable.difference(&global_silent).cloned().collect();
    }
    let excluded_count = no_ref.union(&global_silent).count();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable patients after exclusions, need at least 3",
            usable.len()
        )));
    }

    let empty = BTreeSet::new();
    let mut measures = Vec::new();
    for measure in ["sensitivity", "specificity"] {
        let mut ks = Vec::new();
        let mut metric_correlations = Vec::new();
        for d in &data {
            let mask = &d.silent;
            let vectors: Vec<(String, ScoreVector)> = metrics
                .iter()
                .map(|m| {
                    (
                        m.name().to_string(),
                        vector(&d.by_metric[m], measure, &usable, mask),
                    )
                })
                .collect();
            for (m, (_, v)) in metrics.iter().zip(&vectors) {
                ks.push(KsEntry {
                    system: d.name.clone(),
                    metric: *m,
                    result: ks_normality(v).ok(),
                });
            }
            metric_correlations.push(SystemCorrelations {
                system: d.name.clone(),
                matrix: crate::stats::correlation_matrix(&vectors),
            });
        }

        let mut system_comparisons = Vec::new();
        for &m in &metrics {
            let n = data.len();
            let names: Vec<String> = data.iter().map(|d| d.name.clone()).collect();
            let mut z_cells: Vec<Vec<Option<ZTest>>> = vec![vec![None; n]; n];
            let mut r_cells: Vec<Vec<Option<Correlation>>> = vec![vec![None; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let mask: BTreeSet<String> =
                        data[i].silent.union(&data[j].silent).cloned().collect();
                    let a = vector(&data[i].by_metric[&m], measure, &usable, &mask);
                    let b = vector(&data[j].by_metric[&m], measure, &usable, &mask);
                    z_cells[i][j] = z_test(&a, &b, config.alpha).ok();
                    let r = pearson_r(&a, &b).ok();
                    r_cells[i][j] = r;
                    r_cells[j][i] = r;
                }
            }
            let means = data
                .iter()
                .map(|d| {
                    let v = vector(&d.by_metric[&m], measure, &usable, &empty).defined();
                    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            system_comparisons.push(MetricComparison {
                metric: m,
                z_tests: SignificanceGrid {
                    names: names.clone(),
                    means,
                    alpha: config.alpha,
                    cells: z_cells,
                },
                correlations: CorrelationMatrix {
                    names,
                    cells: r_cells,
                },
            });
        }
        measures.push(MeasureStats {
            measure: measure.into(),
            ks,
            metric_correlations,
            system_comparisons,
        });
    }

    Ok(StatsReport {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        config: config.echo(),
        alpha: config.alpha,
        systems: data.iter().map(|d| d.name.clone()).collect(),
        metrics,
        exclusions: Exclusions {
            policy: config.exclusion,
            no_reference_events: no_ref.into_iter().collect(),
            no_detections: data
                .iter()
                .map(|d| (d.name.clone(), d.silent.iter().cloned().collect()))
                .collect(),
            excluded_count,
            usable_patients: usable.len(),
        },
        measures,
    })
}

pub fn run_stats(config: &RunConfig, systems: &[PathBuf]) -> Result<StatsReport> {
    config.validate()?;
    if systems.is_empty() {
        return Err(Error::Config(
            "at least one system directory is required".into(),
        ));
    }
    let names = system_names(systems);
    config.in_pool(|| {
        let loaded = systems
            .iter()
            .zip(names)
            .map(|(dir, name)| Ok((name, load_pairs(config, Some(dir))?)))
            .collect::<Result<Vec<_>>>()?;
        stats_corpus(&loaded, config)
    })?
}

pub fn render_stats(report: &StatsReport) -> String {
    let mut s = String::new();
    let ex = &report.exclusions;
    let _ = writeln!(
        s,
        "{} {}  systems: {}  usable patients: {}  excluded: {} ({} without reference events)",
        report.tool,
        report.version,
        report.systems.join(", "),
        ex.usable_patients,
        ex.excluded_count,
        ex.no_reference_events.len()
    );
    for (sys, pats) in &ex.no_detections {
        if !pats.is_empty() {
            let _ = writeln!(s, "  {sys}: no detections for {} patient(s)", pats.len());
        }
    }
    for m in &report.measures {
        let _ = writeln!(s, "\n##### {} #####", m.measure);
        let _ = writeln!(s, "\nKS normality (D, p):");
        for k in &m.ks {
            let cell = match &k.result {
                Some(r) => format!("D = {:.4}  p = {:.4}  n = {}", r.d, r.p, r.n),
                None => "--".into(),
            };
            let _ = writeln!(s, "  {:<16} {:<8} {}", k.system, k.metric, cell);
        }
        for c in &m.metric_correlations {
            let _ = writeln!(s, "\nMetric correlations for {}:", c.system);
            s.push_str(&render_correlation_matrix(&c.matrix));
        }
        if report.systems.len() > 1 {
            for c in &m.system_comparisons {
                let _ = writeln!(
                    s,
                    "\n{} z-tests (alpha {}):",
                    c.metric.name().to_uppercase(),
                    report.alpha
                );
                s.push_str(&render_significance_grid(&c.z_tests));
                let _ = writeln!(s, "{} system correlations:", c.metric.name().to_uppercase());
                s.push_str(&render_correlation_matrix(&c.correlations));
            }
        }
    }
    s
}
