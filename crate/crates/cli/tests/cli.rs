use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FAST: &str = r#"
seed = 3
max_outer_iterations = 3

[fusion]
lambda1_grid = [0.001, 0.01, 0.1, 1.0, 10.0]
lambda2_grid = [0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2]
"#;

const BENCH: &str = r#"
methods = ["oracle", "naive", "corrected"]
max_outer_iterations = 3

[fusion]
lambda1_grid = [0.001, 0.1, 10.0]
lambda2_grid = [0.05, 0.2, 0.8, 3.2]

[[scenario]]
group_size = 5
n_mc = 4
seed = 21

[[scenario]]
group_size = 5
c = -0.5
sigma = 3.0
n_mc = 3
seed = 22
correction_mode = "single"
"#;

fn fdclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdclust")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fdclust(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/activity.csv")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Every file under `dir` except the manifest, by relative path.
fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, acc);
            } else if path.file_name().unwrap() != "manifest.toml" {
                acc.insert(path.strip_prefix(root).unwrap().display().to_string(), fs::read(&path).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(dir, dir, &mut acc);
    acc
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn membership(path: &Path) -> Vec<(String, usize)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| {
        let rec = rec.unwrap();
        (rec[0].to_string(), rec[1].parse().unwrap())
    }).collect()
}

#[test]
fn fit_writes_membership_for_every_subject() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", FAST);
    let out = tmp.path().join("fit");
    ok(&["fit", "--input", p(&fixture_path()), "--out", p(&out), "--config", p(&cfg)]);
    let m = membership(&out.join("membership.csv"));
    assert_eq!(m.len(), 45);
    assert!(m.iter().all(|(_, k)| *k >= 1));
    for f in ["centers.csv", "summary.json", "manifest.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["subjects"], 45);
    assert_eq!(summary["replicates"], 3);
}

#[test]
fn correct_then_replay_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", FAST);
    let first = tmp.path().join("a");
    ok(&[
        "correct", "--input", p(&fixture_path()), "--out", p(&first), "--config", p(&cfg), "--mode", "single",
        "--emit-data",
    ]);
    for f in ["membership.csv", "initial_membership.csv", "trace.csv", "pseudo.csv", "summary.json"] {
        assert!(first.join(f).exists(), "{f}");
    }
    let second = tmp.path().join("b");
    ok(&["replay", "--manifest", p(&first.join("manifest.toml")), "--out", p(&second)]);
    assert_eq!(outputs(&first), outputs(&second));
}

#[test]
fn replay_detects_changed_input() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", FAST);
    let input = tmp.path().join("data.csv");
    fs::copy(fixture_path(), &input).unwrap();
    let first = tmp.path().join("a");
    ok(&["fit", "--input", p(&input), "--out", p(&first), "--config", p(&cfg)]);
    let mut text = fs::read_to_string(&input).unwrap();
    text.push_str("zz,1,0,1.0\n");
    fs::write(&input, text).unwrap();
    let out = fdclust(&["replay", "--manifest", p(&first.join("manifest.toml")), "--out", p(&tmp.path().join("b"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_is_identical_serial_and_parallel() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bench.toml", BENCH);
    let serial = tmp.path().join("serial");
    let parallel = tmp.path().join("parallel");
    ok(&["bench", "--config", p(&cfg), "--out", p(&serial), "--emit-data"]);
    ok(&["bench", "--config", p(&cfg), "--out", p(&parallel), "--emit-data", "--parallel", "4"]);
    let a = outputs(&serial);
    assert_eq!(a, outputs(&parallel));
    assert!(a.contains_key("table.csv") && a.contains_key("table.txt") && a.contains_key("replications.csv"));
    assert_eq!(a.keys().filter(|k| k.starts_with("data")).count(), 2 * (4 + 3));

    let rows = csv::Reader::from_path(serial.join("table.csv")).unwrap().records().count();
    assert_eq!(rows, 6);
    let again = tmp.path().join("again");
    ok(&["replay", "--manifest", p(&parallel.join("manifest.toml")), "--out", p(&again)]);
    assert_eq!(a, outputs(&again));
}

#[test]
fn evaluate_three_subject_example() {
    let tmp = tempfile::tempdir().unwrap();
    let truth = write_config(tmp.path(), "truth.csv", "subject,cluster\na,1\nb,1\nc,2\n");
    let est = write_config(tmp.path(), "est.csv", "subject,cluster\nc,x\nb,x\na,y\n");
    let out = tmp.path().join("eval");
    ok(&["evaluate", "--truth", p(&truth), "--estimate", p(&est), "--out", p(&out)]);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["n"], 3);
    assert_eq!(m["rand"].as_f64().unwrap(), 1.0 / 3.0);
    assert_eq!(m["jaccard"].as_f64().unwrap(), 0.0);
    assert_eq!(m["arand"].as_f64().unwrap(), -0.5);
}

#[test]
fn evaluate_rejects_mismatched_subjects() {
    let tmp = tempfile::tempdir().unwrap();
    let truth = write_config(tmp.path(), "truth.csv", "subject,cluster\na,1\nb,1\n");
    let est = write_config(tmp.path(), "est.csv", "subject,cluster\na,1\nq,1\n");
    let out = fdclust(&["evaluate", "--truth", p(&truth), "--estimate", p(&est), "--out", p(&tmp.path().join("e"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('q') && err.contains('b'), "{err}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(fdclust(&["fit", "--bogus"]).status.code(), Some(1));
    let bad_cfg = write_config(tmp.path(), "bad.toml", "no_such_key = 1\n");
    let out = fdclust(&["fit", "--input", p(&fixture_path()), "--out", p(&tmp.path().join("x")), "--config", p(&bad_cfg)]);
    assert_eq!(out.status.code(), Some(1));
    let missing = fdclust(&["fit", "--input", p(&tmp.path().join("nope.csv")), "--out", p(&tmp.path().join("y"))]);
    assert_eq!(missing.status.code(), Some(2));
    let single = write_config(tmp.path(), "one.csv", "subject,replicate,time,value\na,1,0,1\na,1,1,2\nb,1,0,3\nb,1,1,4\n");
    let out = fdclust(&["correct", "--input", p(&single), "--out", p(&tmp.path().join("z"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fdclust(&["--help"]).status.code(), Some(0));
}

#[test]
fn fixture_command_matches_bundled_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fx");
    ok(&["fixture", "--out", p(&out)]);
    assert_eq!(fs::read(out.join("fixture.csv")).unwrap(), fs::read(fixture_path()).unwrap());
}
