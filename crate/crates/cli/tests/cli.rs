use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use walkdir::WalkDir;

fn pelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pelab"))
        .args(args)
        .output()
        .expect("pelab runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const HEAT: &str = r#"{"grid": {"dim": 1, "size": 64, "boundary": "periodic"}, "components": 2,
    "potential": {"id": "quadratic", "r_max": 2.0}, "t_end": 0.005, "snapshot_every": 20,
    "initial": {"kind": "fourier_mode", "amplitude": 0.5, "wavenumber": [1]}}"#;

/// Files referenced by every manifest below `root`, keyed by path relative to
/// `root`, with the number of manifests naming them.
fn manifest_references(root: &Path) -> BTreeMap<PathBuf, usize> {
    let mut refs = BTreeMap::new();
    for e in WalkDir::new(root) {
        let e = e.unwrap();
        if e.file_name() != "manifest.json" {
            continue;
        }
        let m: Value = serde_json::from_slice(&std::fs::read(e.path()).unwrap()).unwrap();
        assert_eq!(
            m["config_hash"].as_str().map(str::len),
            Some(64),
            "{}",
            e.path().display()
        );
        let base = e.path().parent().unwrap();
        for f in m["files"].as_array().unwrap() {
            let abs = base.join(f["path"].as_str().unwrap());
            let rel = abs.strip_prefix(root).unwrap().to_path_buf();
            let bytes = std::fs::read(&abs).unwrap();
            assert_eq!(
                f["sha256"].as_str().unwrap(),
                pelab::solver::content_hash(&bytes)
            );
            *refs.entry(rel).or_insert(0) += 1;
        }
    }
    refs
}

fn assert_every_file_referenced_once(root: &Path) {
    let refs = manifest_references(root);
    for e in WalkDir::new(root) {
        let e = e.unwrap();
        if !e.file_type().is_file() {
            continue;
        }
        let rel = e.path().strip_prefix(root).unwrap().to_path_buf();
        if rel == Path::new("manifest.json") {
            continue;
        }
        assert_eq!(
            refs.get(&rel),
            Some(&1),
            "{} is not referenced exactly once",
            rel.display()
        );
    }
}

#[test]
fn missing_config_is_a_usage_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let o = pelab(&["run", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("absent.json"), "{}", stderr(&o));
}

#[test]
fn heat_run_writes_parseable_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "heat.json", HEAT);
    let out = dir.path().join("o");
    let o = pelab(&["run", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut snaps: Vec<PathBuf> = std::fs::read_dir(out.join("snapshots"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    snaps.sort();
    assert!(snaps.len() >= 2);
    let mut last_t = -1.0;
    for p in &snaps {
        let state = pelab::snapshot::read(std::fs::File::open(p).unwrap()).unwrap();
        assert_eq!(state.components(), 2);
        assert_eq!(state.grid().sizes(), &[64]);
        assert!(state.t() > last_t);
        last_t = state.t();
    }
    assert!((last_t - 0.005).abs() < 1e-12);
    assert_every_file_referenced_once(&out);
}

#[test]
fn initial_data_beyond_r_max_is_a_domain_abort() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "big.json",
        &HEAT.replace("\"amplitude\": 0.5", "\"amplitude\": 3.0"),
    );
    let out = dir.path().join("o");
    let o = pelab(&["run", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(
        err.contains("exceeds r_max") && err.contains("coords"),
        "{err}"
    );
    let m: Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "aborted");
}

#[test]
fn malformed_config_and_bad_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"grid": 3}"#);
    assert_eq!(code(&pelab(&["run", s(&cfg)])), 1);
    assert_eq!(code(&pelab(&["--frobnicate"])), 1);
    assert_eq!(code(&pelab(&["--help"])), 0);
}

#[test]
fn empty_suite_passes_with_an_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(
        dir.path(),
        "empty.json",
        r#"{"name": "empty", "checks": []}"#,
    );
    let out = dir.path().join("o");
    let o = pelab(&["verify", s(&suite), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines, ["check,passed,tolerance,config_hash,witness"]);
}

#[test]
fn duplicate_check_names_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let check = format!(r#"{{"name": "a", "kind": "sup_norm", "config": {HEAT}}}"#);
    let suite = write(
        dir.path(),
        "dup.json",
        &format!(r#"{{"name": "dup", "checks": [{check}, {check}]}}"#),
    );
    assert_eq!(
        code(&pelab(&[
            "verify",
            s(&suite),
            "--out",
            s(&dir.path().join("o"))
        ])),
        1
    );
}

#[test]
fn crashing_check_is_recorded_as_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let big = HEAT.replace("\"amplitude\": 0.5", "\"amplitude\": 3.0");
    let suite = write(
        dir.path(),
        "crash.json",
        &format!(
            r#"{{"name": "crash", "checks": [
                {{"name": "boom", "kind": "sup_norm", "config": {big}}},
                {{"name": "fine", "kind": "sup_norm", "config": {HEAT}}}]}}"#
        ),
    );
    let out = dir.path().join("o");
    let o = pelab(&["verify", s(&suite), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(
        summary.lines().any(|l| l.starts_with("boom,false")),
        "{summary}"
    );
    assert!(
        summary.lines().any(|l| l.starts_with("fine,true")),
        "{summary}"
    );
}

#[test]
fn bundled_core_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = pelab(&["verify", "paper-core", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_every_file_referenced_once(&out);
}

#[test]
fn negative_control_fails_every_check_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = pelab(&["verify", "negative-control", "--out", s(&out)]);
    assert_ne!(code(&o), 0);
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(out.join("summary.csv"))
        .unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 8);
    for row in &rows {
        assert_eq!(&row[1], "false", "{row:?}");
        assert!(!row[4].is_empty(), "{row:?}");
        let report: Value =
            serde_json::from_slice(&std::fs::read(out.join(format!("{}.json", &row[0]))).unwrap())
                .unwrap();
        assert!(report["witness"]["description"].is_string(), "{report}");
    }
}

#[test]
fn verify_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(
        dir.path(),
        "s.json",
        &format!(
            r#"{{"name": "det", "seed": 5, "checks": [
                {{"name": "bound", "kind": "sup_norm", "config": {HEAT}}},
                {{"name": "decay", "kind": "morrey", "points": 3, "radii_h": [8, 4],
                  "config": {}}}]}}"#,
            HEAT.replace("0.005", "0.03")
        ),
    );
    let read_all = |out: &Path| -> BTreeMap<PathBuf, Vec<u8>> {
        WalkDir::new(out)
            .into_iter()
            .map(Result::unwrap)
            .filter(|e| e.file_type().is_file())
            .map(|e| {
                (
                    e.path().strip_prefix(out).unwrap().to_path_buf(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect()
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = pelab(&["verify", s(&suite), "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(read_all(&a), read_all(&b));
}

#[test]
fn sweep_emits_one_row_and_manifest_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let base = HEAT.replace("quadratic", "cosh").replace("2.0", "1.0");
    let sweep = write(
        dir.path(),
        "sweep.json",
        &format!(
            r#"{{"base": {base}, "axes": {{"resolution": [32, 64], "potential": ["quadratic", "cosh"]}}}}"#
        ),
    );
    let out = dir.path().join("o");
    let o = pelab(&["sweep", s(&sweep), "--out", s(&out), "--threads", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(out.join("sweep.csv"))
        .unwrap();
    let labels: Vec<String> = r.records().map(|row| row.unwrap()[0].to_string()).collect();
    assert_eq!(labels.len(), 4);
    for label in &labels {
        assert!(out.join(label).join("manifest.json").is_file(), "{label}");
    }
    assert_every_file_referenced_once(&out);
}

#[test]
fn duplicate_sweep_labels_exit_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write(
        dir.path(),
        "sweep.json",
        &format!(r#"{{"base": {HEAT}, "axes": {{"resolution": [32, 32]}}}}"#),
    );
    let out = dir.path().join("o");
    let o = pelab(&["sweep", s(&sweep), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("duplicate"), "{}", stderr(&o));
    assert!(!out.join("n32-base-s0").exists());
}

#[test]
fn entropy_of_the_quadratic_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = pelab(&["entropy", "quadratic", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("lambda = 1, Lambda = 1"), "{text}");
    assert!(text.contains("H convex: trivially"), "{text}");
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(out.join("gamma.csv"))
        .unwrap();
    for row in r.records() {
        let row = row.unwrap();
        let phi: f64 = row[1].parse().unwrap();
        let gamma: f64 = row[2].parse().unwrap();
        assert!((phi - gamma).abs() < 1e-14);
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(out.join("decomposition.csv"))
        .unwrap();
    let h = r.headers().unwrap().iter().position(|c| c == "H").unwrap();
    for row in r.records() {
        assert_eq!(row.unwrap()[h].parse::<f64>().unwrap(), 0.0);
    }
    assert_every_file_referenced_once(&out);
}

#[test]
fn entropy_of_cosh_reports_the_window_and_small_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = pelab(&["entropy", "cosh", "--r-max", "1.0", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.contains(&format!("Lambda = {}", 1.0f64.cosh())),
        "{text}"
    );
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(out.join("gamma.csv"))
        .unwrap();
    let col = r
        .headers()
        .unwrap()
        .iter()
        .position(|c| c == "identity_residual")
        .unwrap();
    for row in r.records() {
        assert!(row.unwrap()[col].parse::<f64>().unwrap() <= 1e-8);
    }
}

#[test]
fn entropy_of_a_non_monotone_table_is_a_domain_abort() {
    let dir = tempfile::tempdir().unwrap();
    // φ = r²/2 - r³: φ'' = 1 - 6r turns negative past r = 1/6
    let table = write(
        dir.path(),
        "bent.json",
        r#"{"id": "custom", "r_max": 1.0, "pieces": [{"start": 0.0, "coeffs": [0.0, 0.0, 0.5, -1.0]}]}"#,
    );
    let o = pelab(&["entropy", s(&table), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("r = "), "{}", stderr(&o));
    assert_eq!(code(&pelab(&["entropy", "no_such_potential"])), 1);
}

#[test]
fn report_lists_every_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "heat.json", HEAT);
    let runs = dir.path().join("runs");
    for tag in ["a", "b"] {
        assert_eq!(
            code(&pelab(&["run", s(&cfg), "--out", s(&runs.join(tag))])),
            0
        );
    }
    let out = dir.path().join("rep");
    let o = pelab(&["report", s(&runs), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(text.contains("a/manifest.json,run,ok"), "{text}");
    assert!(text.contains("b/manifest.json,run,ok"), "{text}");
    assert_eq!(code(&pelab(&["report", s(&dir.path().join("nowhere"))])), 1);
}

#[test]
fn one_cell_sweep_matches_a_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = HEAT.replace("quadratic", "cosh").replace("2.0", "1.0");
    let cfg = write(dir.path(), "cfg.json", &base);
    let sweep = write(
        dir.path(),
        "sweep.json",
        &format!(r#"{{"base": {base}, "axes": {{"resolution": [64]}}}}"#),
    );
    let (run_out, sweep_out) = (dir.path().join("run"), dir.path().join("sweep"));
    assert_eq!(code(&pelab(&["run", s(&cfg), "--out", s(&run_out)])), 0);
    assert_eq!(
        code(&pelab(&["sweep", s(&sweep), "--out", s(&sweep_out)])),
        0
    );
    let mut snaps: Vec<PathBuf> = std::fs::read_dir(run_out.join("snapshots"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    snaps.sort();
    let last = std::fs::read(snaps.last().unwrap()).unwrap();
    let terminal = std::fs::read(sweep_out.join("n64-base-s0/terminal.bin")).unwrap();
    assert_eq!(last, terminal);
    let csv = std::fs::read_to_string(sweep_out.join("sweep.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("n64-base-s0,")).unwrap();
    assert!(row.contains(",ok,"), "{row}");
}
