use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geodisambig"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn");
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, entities: usize) {
    run_ok(bin().args(["synth", "--seed", "42", "--entities", &entities.to_string(), "--out"]).arg(dir));
}

fn disambiguate(corpus: &Path, out: &Path, extra: &[&str]) -> Output {
    run_ok(
        bin()
            .arg("disambiguate")
            .arg("--mentions")
            .arg(corpus.join("mentions.tsv"))
            .arg("--contexts")
            .arg(corpus.join("contexts.tsv"))
            .arg("--fixture")
            .arg(corpus.join("geocodes.tsv"))
            .arg("--out")
            .arg(out)
            .args(extra),
    )
}

fn key_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn synth_disambiguate_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, 60);
    let out = tmp.path().join("out");
    let d = disambiguate(&corpus, &out, &[]);
    assert!(String::from_utf8_lossy(&d.stdout).contains("IDs after mobile merge"));
    assert!(out.join("entity_map.tsv").exists());
    assert!(out.join("summary.txt").exists());

    let report_path = tmp.path().join("report.txt");
    let e = run_ok(
        bin()
            .arg("evaluate")
            .arg("--entity-map")
            .arg(&out)
            .arg("--mentions")
            .arg(corpus.join("mentions.tsv"))
            .arg("--benchmark")
            .arg(corpus.join("benchmark.tsv"))
            .arg("--out")
            .arg(&report_path),
    );
    let report = String::from_utf8(e.stdout).unwrap();
    assert_eq!(fs::read_to_string(&report_path).unwrap(), report);
    for role in ["inventor", "assignee"] {
        assert!(key_value(&report, &format!("{role}.precision")) >= 0.95);
        assert!(key_value(&report, &format!("{role}.recall")) >= 0.90);
    }
}

#[test]
fn pipeline_beats_baseline_recall() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, 60);
    let mut recall = Vec::new();
    for (name, extra) in [("pipe", &[][..]), ("base", &["--baseline"][..])] {
        let out = tmp.path().join(name);
        disambiguate(&corpus, &out, extra);
        let e = run_ok(
            bin()
                .args(["evaluate", "--role", "inventor", "--entity-map"])
                .arg(out.join("entity_map.tsv"))
                .arg("--mentions")
                .arg(corpus.join("mentions.tsv"))
                .arg("--benchmark")
                .arg(corpus.join("benchmark.tsv")),
        );
        let report = String::from_utf8(e.stdout).unwrap();
        assert!(!report.contains("assignee."));
        recall.push(key_value(&report, "inventor.recall"));
    }
    assert!(recall[0] > recall[1], "{recall:?}");
}

#[test]
fn job_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, 80);
    let one = tmp.path().join("one");
    let four = tmp.path().join("four");
    disambiguate(&corpus, &one, &["--jobs", "1", "--debug"]);
    disambiguate(&corpus, &four, &["--jobs", "4", "--debug"]);
    for f in ["entity_map.tsv", "summary.txt", "same_point_clusters.tsv", "local_ids.tsv", "mobile_audit.tsv", "run.hash"] {
        assert_eq!(fs::read(one.join(f)).unwrap(), fs::read(four.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unchanged_inputs_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, 20);
    let out = tmp.path().join("out");
    disambiguate(&corpus, &out, &[]);
    let map = fs::read(out.join("entity_map.tsv")).unwrap();
    let again = disambiguate(&corpus, &out, &[]);
    assert!(String::from_utf8_lossy(&again.stdout).contains("inputs unchanged"));
    assert_eq!(fs::read(out.join("entity_map.tsv")).unwrap(), map);
    // a changed setting reruns
    let changed = disambiguate(&corpus, &out, &["--link-radius-km", "5"]);
    assert!(!String::from_utf8_lossy(&changed.stdout).contains("inputs unchanged"));
}

#[test]
fn config_file_is_read() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, 20);
    let cfg = tmp.path().join("run.conf");
    fs::write(&cfg, "# test\nhigh_res_threshold = 90\njobs = 2\n").unwrap();
    let out = tmp.path().join("out");
    let d = disambiguate(&corpus, &out, &["--config", cfg.to_str().unwrap()]);
    let summary = String::from_utf8(d.stdout).unwrap();
    // every synthetic point is below 90, so nothing is high-resolution
    let line = summary.lines().find(|l| l.starts_with("high-resolution IDs")).unwrap();
    assert!(line.split_whitespace().skip(2).all(|n| n == "0"), "{line}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |cmd: &mut Command| cmd.output().unwrap().status.code();

    assert_eq!(code(bin().arg("--help")), Some(0));
    assert_eq!(code(bin().arg("--version")), Some(0));
    assert_eq!(code(bin().arg("frobnicate")), Some(1));
    assert_eq!(code(bin().args(["disambiguate", "--out", "x"])), Some(1));
    let missing = code(
        bin()
            .args(["disambiguate", "--mentions"])
            .arg(tmp.path().join("nope.tsv"))
            .arg("--out")
            .arg(tmp.path().join("out")),
    );
    assert_eq!(missing, Some(1));

    let cfg = tmp.path().join("bad.conf");
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(code(bin().arg("--config").arg(&cfg).args(["synth", "--out"]).arg(tmp.path())), Some(1));
    assert_eq!(code(bin().args(["synth", "--jobs", "0"])), Some(1));
}

#[test]
fn clean_synth_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    run_ok(bin().args(["synth", "--clean", "--entities", "30", "--out"]).arg(&corpus));
    let out = tmp.path().join("out");
    disambiguate(&corpus, &out, &[]);
    let e = run_ok(
        bin()
            .args(["evaluate", "--role", "assignee", "--entity-map"])
            .arg(&out)
            .arg("--mentions")
            .arg(corpus.join("mentions.tsv"))
            .arg("--benchmark")
            .arg(corpus.join("benchmark.tsv")),
    );
    let report = String::from_utf8(e.stdout).unwrap();
    assert_eq!(key_value(&report, "assignee.precision"), 1.0);
    assert_eq!(key_value(&report, "assignee.recall"), 1.0);
}
