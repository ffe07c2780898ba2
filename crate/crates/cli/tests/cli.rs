use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn loopsight(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopsight")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = loopsight(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn small_corpus(dir: &Path) {
    for (class, seed, out) in [("independent", "1", "pos"), ("ambiguous", "2", "neg")] {
        let args = ["generate", "--class", class, "--population", "60", "--generations", "3", "--hof", "15", "--seed", seed, "--out", out];
        let msg = ok(dir, &args);
        assert!(msg.contains("wrote 15"), "{msg}");
    }
    ok(dir, &["dataset", "--pos", "pos", "--neg", "neg", "--out", "ds", "--width", "40", "--seed", "3"]);
}

#[test]
fn full_pipeline_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir);
    assert_eq!(fs::read_dir(dir.join("pos")).unwrap().count(), 16);
    let csv = fs::read_to_string(dir.join("ds/dataset.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);

    for out in ["a", "b"] {
        let cfg = format!(
            r#"{{"corpus": "ds", "levels": [1.0, 0.8], "runs": 2, "base_seed": 5, "epochs": 2, "models": ["dnn", "cnn"], "output": "{out}"}}"#
        );
        fs::write(dir.join(format!("{out}.json")), cfg).unwrap();
        ok(dir, &["experiment", "--config", &format!("{out}.json")]);
    }
    let (a, b) = (tree(&dir.join("a")), tree(&dir.join("b")));
    let strip = |t: Vec<(String, Vec<u8>)>| t.into_iter().filter(|(n, _)| n != "config.json").collect::<Vec<_>>();
    assert_eq!(strip(a.clone()), strip(b));

    let runs = fs::read_to_string(dir.join("a/runs.csv")).unwrap();
    assert_eq!(runs.lines().next(), Some("run,model,variance,test_acc,test_loss"));
    assert_eq!(runs.lines().count(), 9);
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("a/level_80/run_cnn_1.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 6);
    assert_eq!(record["variance"], 80);
    for f in ["boxplot_dnn_100.csv", "boxplot_cnn_80.csv", "ks.csv", "summary.csv", "fitness_curve.csv", "level_100/curve_dnn_0.csv"] {
        assert!(dir.join("a").join(f).exists(), "missing {f}");
    }

    ok(dir, &["report", "--in", "a", "--out", "c"]);
    assert_eq!(tree(&dir.join("c")), a);
}

#[test]
fn errors_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::create_dir(dir.join("empty")).unwrap();
    let out = loopsight(dir, &["dataset", "--pos", "empty", "--neg", "empty", "--out", "ds", "--seed", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty corpus"));

    fs::write(dir.join("bad.json"), r#"{"corpus": "ds", "runs": 0}"#).unwrap();
    let out = loopsight(dir, &["experiment", "--config", "bad.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("runs must be at least 1"));

    let out = loopsight(dir, &["generate", "--class", "parallel", "--out", "x"]);
    assert!(!out.status.success());
}
