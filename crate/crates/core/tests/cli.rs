mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use evscore::annot::{AnnotationDoc, Event, LabelMap};
use evscore::cli::{run_stats, ExclusionPolicy, MetricReport, RunConfig, StatsReport};
use evscore::counts::{derive, ConfusionCounts};
use evscore::scoring::Metric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn evscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evscore"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn opt_close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => close(x, y, 1e-9),
        (None, None) => true,
        _ => false,
    }
}

fn write_random_corpus(dir: &Path, n: usize, seed: u64) -> std::path::PathBuf {
    let l = LabelMap::seizure();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut list = String::new();
    for i in 0..n {
        let d = rng.random_range(2000..20000);
        let (r, h) = random_pair(&mut rng, d, 8);
        std::fs::write(dir.join(format!("r{i:03}.txt")), r.serialize(&l)).unwrap();
        std::fs::write(dir.join(format!("h{i:03}.txt")), h.serialize(&l)).unwrap();
        list.push_str(&format!("r{i:03}.txt h{i:03}.txt p{}\n", i % 7));
    }
    let path = dir.join("pairs.lst");
    std::fs::write(&path, list).unwrap();
    path
}

#[test]
fn score_reports_the_three_seizure_example() {
    let out = tempfile::tempdir().unwrap();
    let pairs = fixture("three_seizures/pairs.lst");
    let o = evscore(&[
        "score",
        "--pairs",
        pairs.to_str().unwrap(),
        "--epoch-duration",
        "1",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report =
        MetricReport::from_json(&std::fs::read_to_string(out.path().join("report.json")).unwrap())
            .unwrap();
    let names: Vec<Metric> = report.metrics.iter().map(|s| s.metric).collect();
    assert_eq!(names, Metric::ALL.to_vec());

    let e = report
        .section(Metric::Epoch)
        .unwrap()
        .corpus
        .get("seiz")
        .unwrap();
    assert_eq!((e.tp, e.fp, e.fn_, e.tn), (5.0, 3.0, 1.0, 1.0));
    let o_sens = report.section(Metric::Ovlp).unwrap().measures["seiz"].sensitivity;
    assert_eq!(o_sens, Some(1.0));
    let atwv = report
        .section(Metric::Atwv)
        .unwrap()
        .atwv
        .as_ref()
        .unwrap()
        .atwv
        .unwrap();
    assert!(close(atwv, 0.29, 0.01), "{atwv}");
    let k = report.section(Metric::Ira).unwrap().measures["seiz"]
        .kappa
        .unwrap();
    assert!(close(k, 0.09, 0.005), "{k}");

    let text = std::fs::read_to_string(out.path().join("report.txt")).unwrap();
    assert!(text.contains("== EPOCH") && text.contains("ATWV = 0.2917"));
}

#[test]
fn identical_hypotheses_score_perfectly() {
    let out = tempfile::tempdir().unwrap();
    let pairs = fixture("three_seizures/identity.lst");
    let o = evscore(&[
        "score",
        "--pairs",
        pairs.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report =
        MetricReport::from_json(&std::fs::read_to_string(out.path().join("report.json")).unwrap())
            .unwrap();
    for s in &report.metrics {
        let d = &s.measures["seiz"];
        assert_eq!(d.sensitivity, Some(1.0), "{}", s.metric);
        assert_eq!(d.specificity, Some(1.0), "{}", s.metric);
        assert_eq!(d.fa_per_24h, Some(0.0), "{}", s.metric);
        assert_eq!(d.kappa, Some(1.0), "{}", s.metric);
    }
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = write_random_corpus(dir.path(), 100, 41);
    let mut reports = Vec::new();
    for jobs in ["1", "3", "8"] {
        let out = dir.path().join(format!("out{jobs}"));
        let o = evscore(&[
            "score",
            "--pairs",
            pairs.to_str().unwrap(),
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert!(reports.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn report_order_is_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = write_random_corpus(dir.path(), 20, 42);
    let text = std::fs::read_to_string(&pairs).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.reverse();
    let shuffled = dir.path().join("reversed.lst");
    std::fs::write(&shuffled, lines.join("\n")).unwrap();
    let a = evscore::cli::run_score(&RunConfig::new(&pairs)).unwrap();
    let b = evscore::cli::run_score(&RunConfig::new(&shuffled)).unwrap();
    assert_eq!(a.metrics, b.metrics);
    let paths: Vec<&String> = a.metrics[0].files.iter().map(|f| &f.ref_path).collect();
    let mut sorted = paths.clone();
    sorted.sort();
    assert_eq!(paths, sorted);
}

#[test]
fn json_report_round_trips_to_its_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = write_random_corpus(dir.path(), 30, 43);
    let report = evscore::cli::run_score(&RunConfig::new(&pairs)).unwrap();
    let back = MetricReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
    let l = LabelMap::seizure();
    for s in &back.metrics {
        let mut total = ConfusionCounts::zero(&l);
        for f in &s.files {
            total = total.accumulate(&f.counts).unwrap();
        }
        for (label, c) in &s.corpus.labels {
            let t = total.get(label).unwrap();
            assert!(
                close(c.tp, t.tp, 1e-9) && close(c.fp, t.fp, 1e-9) && close(c.fn_, t.fn_, 1e-9)
            );
            let d = derive(&s.corpus, label);
            let m = &s.measures[label];
            for (x, y) in [
                (d.sensitivity, m.sensitivity),
                (d.specificity, m.specificity),
                (d.accuracy, m.accuracy),
                (d.precision, m.precision),
                (d.f1, m.f1),
                (d.fa_per_24h, m.fa_per_24h),
                (d.kappa, m.kappa),
            ] {
                assert!(opt_close(x, y), "{} {label}: {x:?} vs {y:?}", s.metric);
            }
        }
        if let Some(a) = &s.atwv {
            let beta = back.config.beta;
            assert!(opt_close(a.terms.atwv(beta), a.atwv));
        }
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&evscore(&["--help"])), 0);
    assert_eq!(code(&evscore(&["--version"])), 0);
    assert_eq!(code(&evscore(&["score"])), 1);
    assert_eq!(code(&evscore(&["score", "--pairs", "x", "--bogus"])), 1);
    let pairs = fixture("three_seizures/pairs.lst");
    let p = pairs.to_str().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    assert_eq!(
        code(&evscore(&[
            "score",
            "--pairs",
            p,
            "--metrics",
            "wer",
            "--out",
            o
        ])),
        1
    );
    assert_eq!(
        code(&evscore(&[
            "score",
            "--pairs",
            p,
            "--epoch-duration",
            "0",
            "--out",
            o
        ])),
        1
    );
    assert_eq!(
        code(&evscore(&[
            "score",
            "--pairs",
            p,
            "--taes-policy",
            "some",
            "--out",
            o
        ])),
        1
    );
    assert_eq!(
        code(&evscore(&[
            "det",
            "--pairs",
            p,
            "--grid",
            "uniform:1",
            "--out",
            o
        ])),
        1
    );
    assert_eq!(
        code(&evscore(&[
            "score",
            "--pairs",
            "/nonexistent/list",
            "--out",
            o
        ])),
        2
    );

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r.txt"), "0 5 seiz\n5 3 bckg\n").unwrap();
    std::fs::write(dir.path().join("h.txt"), "0 5 seiz\n").unwrap();
    std::fs::write(dir.path().join("pairs.lst"), "r.txt h.txt p1\n").unwrap();
    let list = dir.path().join("pairs.lst");
    let res = evscore(&["score", "--pairs", list.to_str().unwrap(), "--out", o]);
    assert_eq!(code(&res), 2);
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("r.txt") && err.contains("line 2"), "{err}");
}

#[test]
fn det_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = write_random_corpus(dir.path(), 10, 44);
    let out = dir.path().join("det");
    let o = evscore(&[
        "det",
        "--pairs",
        pairs.to_str().unwrap(),
        "--metrics",
        "epoch,ovlp,ira",
        "--grid",
        "uniform:11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cols = std::fs::read_to_string(out.join("det_epoch.txt")).unwrap();
    assert_eq!(cols.lines().filter(|l| !l.starts_with('#')).count(), 11);
    assert!(out.join("det_ovlp.txt").exists() && !out.join("det_ira.txt").exists());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("det.json")).unwrap()).unwrap();
    assert_eq!(json["curves"].as_array().unwrap().len(), 2);
}

#[test]
fn det_without_confidences_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r.txt"), "duration = 10\n1 3 seiz\n").unwrap();
    std::fs::write(dir.path().join("h.txt"), "duration = 10\n2 4 seiz\n").unwrap();
    std::fs::write(dir.path().join("pairs.lst"), "r.txt h.txt p1\n").unwrap();
    let list = dir.path().join("pairs.lst");
    let o = evscore(&[
        "det",
        "--pairs",
        list.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

/// Writes `patients` reference files plus one hypothesis directory per
/// entry of `silent`; patients listed there get no detections.
fn stats_corpus(
    dir: &Path,
    patients: usize,
    systems: &[(&str, u64, &[usize])],
) -> std::path::PathBuf {
    let l = LabelMap::seizure();
    let mut ref_rng = ChaCha8Rng::seed_from_u64(50);
    let mut refs = Vec::new();
    std::fs::create_dir_all(dir.join("refs")).unwrap();
    let mut list = String::new();
    for p in 0..patients {
        let mut ev = Vec::new();
        let mut t = ref_rng.random_range(5.0..30.0f64).round();
        while t < 500.0 {
            let len = ref_rng.random_range(5.0..40.0f64).round();
            ev.push(Event::new(t, t + len, SEIZ));
            t += len + ref_rng.random_range(20.0..120.0f64).round();
        }
        let r = AnnotationDoc::new(ev, Some(600.0)).unwrap();
        std::fs::write(dir.join(format!("refs/r{p}.txt")), r.serialize(&l)).unwrap();
        list.push_str(&format!("refs/r{p}.txt h{p}.txt pat{p:02}\n"));
        refs.push(r);
    }
    for (name, seed, silent) in systems {
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        let sys = dir.join(name);
        std::fs::create_dir_all(&sys).unwrap();
        for (p, r) in refs.iter().enumerate() {
            let mut ev = Vec::new();
            if !silent.contains(&p) {
                for e in r.events() {
                    if rng.random_bool(0.7) {
                        let a = e.start + rng.random_range(-2.0..2.0f64);
                        let b = (e.stop + rng.random_range(-2.0..2.0f64)).max(a + 0.5);
                        ev.push(Event::new(a, b, SEIZ).with_confidence(0.9));
                    }
                }
                for _ in 0..rng.random_range(0..3) {
                    let a = rng.random_range(0.0..590.0f64);
                    if !ev
                        .iter()
                        .chain(r.events())
                        .any(|e: &Event| e.start < a + 6.0 && a - 3.0 < e.stop)
                    {
                        ev.push(Event::new(a, a + 3.0, SEIZ).with_confidence(0.5));
                    }
                }
                if ev.is_empty() {
                    let e = r.events()[0];
                    ev.push(Event::new(e.start, e.stop, SEIZ).with_confidence(0.9));
                }
            }
            let h = AnnotationDoc::new(ev, Some(600.0)).unwrap();
            std::fs::write(sys.join(format!("h{p}.txt")), h.serialize(&l)).unwrap();
        }
    }
    let path = dir.join("pairs.lst");
    std::fs::write(&path, list).unwrap();
    path
}

fn stats(
    list: &Path,
    systems: &[&Path],
    exclusion: ExclusionPolicy,
) -> evscore::Result<StatsReport> {
    let mut c = RunConfig::new(list);
    c.exclusion = exclusion;
    let dirs: Vec<_> = systems.iter().map(|p| p.to_path_buf()).collect();
    run_stats(&c, &dirs)
}

#[test]
fn identical_systems_agree_completely() {
    let dir = tempfile::tempdir().unwrap();
    let list = stats_corpus(dir.path(), 12, &[("a", 60, &[]), ("b", 60, &[])]);
    let r = stats(
        &list,
        &[&dir.path().join("a"), &dir.path().join("b")],
        ExclusionPolicy::PerPair,
    )
    .unwrap();
    assert_eq!(r.systems, vec!["a".to_string(), "b".to_string()]);
    let mut seen = 0;
    for m in &r.measures {
        for cmp in &m.system_comparisons {
            if let Some(z) = cmp.z_tests.cells[0][1] {
                assert_eq!(z.z, 0.0);
                assert!(!z.significant);
                seen += 1;
            }
            if let Some(c) = cmp.correlations.cells[0][1] {
                assert!(close(c.r, 1.0, 1e-12));
                seen += 1;
            }
        }
    }
    assert!(seen >= 10, "{seen} comparisons defined");
}

#[test]
fn one_system_gets_a_five_by_five_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let list = stats_corpus(dir.path(), 10, &[("sys", 61, &[])]);
    let r = stats(&list, &[&dir.path().join("sys")], ExclusionPolicy::PerPair).unwrap();
    assert_eq!(
        r.metrics,
        vec![
            Metric::Atwv,
            Metric::Dpalign,
            Metric::Epoch,
            Metric::Ovlp,
            Metric::Taes
        ]
    );
    for m in &r.measures {
        let mat = &m.metric_correlations[0].matrix;
        assert_eq!(mat.names, vec!["atwv", "dpalign", "epoch", "ovlp", "taes"]);
        assert_eq!(mat.cells.len(), 5);
        for i in 0..5 {
            assert!(mat.cells[i][i].is_none());
            for j in 0..5 {
                assert_eq!(mat.cells[i][j].map(|c| c.r), mat.cells[j][i].map(|c| c.r));
            }
        }
        assert_eq!(m.ks.len(), 5);
    }
}

#[test]
fn silent_patients_are_excluded() {
    let dir = tempfile::tempdir().unwrap();
    let list = stats_corpus(dir.path(), 10, &[("a", 62, &[]), ("b", 63, &[2, 5])]);
    let systems = [dir.path().join("a"), dir.path().join("b")];
    let sys: Vec<&Path> = systems.iter().map(|p| p.as_path()).collect();

    let r = stats(&list, &sys, ExclusionPolicy::PerPair).unwrap();
    assert_eq!(
        r.exclusions.no_detections["b"],
        vec!["pat02".to_string(), "pat05".to_string()]
    );
    assert!(r.exclusions.no_detections["a"].is_empty());
    assert_eq!(r.exclusions.excluded_count, 2);
    assert_eq!(r.exclusions.usable_patients, 10);
    let sens = &r.measures[0];
    let ks_a = sens
        .ks
        .iter()
        .find(|k| k.system == "a" && k.metric == Metric::Epoch)
        .unwrap();
    let ks_b = sens
        .ks
        .iter()
        .find(|k| k.system == "b" && k.metric == Metric::Epoch)
        .unwrap();
    assert_eq!(ks_a.result.unwrap().n, 10);
    assert_eq!(ks_b.result.unwrap().n, 8);

    let g = stats(&list, &sys, ExclusionPolicy::Global).unwrap();
    assert_eq!(g.exclusions.usable_patients, 8);
    let ks_a = g.measures[0]
        .ks
        .iter()
        .find(|k| k.system == "a" && k.metric == Metric::Epoch)
        .unwrap();
    assert_eq!(ks_a.result.unwrap().n, 8);
}

#[test]
fn stats_needs_three_patients() {
    let dir = tempfile::tempdir().unwrap();
    let list = stats_corpus(dir.path(), 2, &[("a", 64, &[]), ("b", 65, &[])]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let err = stats(&list, &[&a, &b], ExclusionPolicy::PerPair).unwrap_err();
    assert!(matches!(err, evscore::Error::InsufficientData(_)));
    let o = evscore(&[
        "stats",
        "--pairs",
        list.to_str().unwrap(),
        "--system",
        a.to_str().unwrap(),
        "--system",
        b.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn stats_command_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let list = stats_corpus(dir.path(), 8, &[("a", 66, &[]), ("b", 67, &[1])]);
    let out = dir.path().join("out");
    let o = evscore(&[
        "stats",
        "--pairs",
        list.to_str().unwrap(),
        "--system",
        dir.path().join("a").to_str().unwrap(),
        "--system",
        dir.path().join("b").to_str().unwrap(),
        "--exclusion",
        "global",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: StatsReport =
        serde_json::from_str(&std::fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert_eq!(r.exclusions.policy, ExclusionPolicy::Global);
    let text = std::fs::read_to_string(out.join("stats.txt")).unwrap();
    assert!(text.contains("sensitivity") && text.contains("z-tests"));
}
