use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pathwise_cli::output::config_from_manifest;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathwise")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BM_1024: &str = "seed = 7\n[model]\ntype = \"fbm\"\nhurst = 0.5\n[grid]\nsizes = [1024]\n";

#[test]
fn same_seed_gives_identical_bytes() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", BM_1024);
    for out in ["a", "b"] {
        let o = run(&["simulate", "--config", &cfg, "--out", out], d.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(d.path().join("a/paths.csv")).unwrap();
    let b = fs::read(d.path().join("b/paths.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1026);

    let o = run(&["simulate", "--config", &cfg, "--out", "c", "--seed", "8"], d.path());
    assert!(o.status.success());
    assert_ne!(b, fs::read(d.path().join("c/paths.csv")).unwrap());
}

#[test]
fn manifest_replays_the_run() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", &format!("{BM_1024}[localtime]\ntimes = 4\n"));
    let o = run(&["localtime", "--config", &cfg, "--out", "first"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(d.path().join("first/manifest.txt")).unwrap();
    assert!(manifest.contains("kind=localtime\n"));
    assert!(manifest.contains("files=localtime.csv;occupation.csv\n"));
    let replay = write(d.path(), "replay.toml", &config_from_manifest(&manifest));
    let o = run(&["localtime", "--config", &replay, "--out", "second"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["localtime.csv", "occupation.csv"] {
        assert_eq!(
            fs::read(d.path().join("first").join(f)).unwrap(),
            fs::read(d.path().join("second").join(f)).unwrap()
        );
    }
}

#[test]
fn misspelled_keys_are_named() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", "sede = 3\n");
    let o = run(&["simulate", "--config", &cfg, "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sede"));

    let cfg = write(d.path(), "c2.toml", "[model]\ntype = \"fbm\"\nhurts = 0.7\n");
    let o = run(&["simulate", "--config", &cfg, "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hurts"));
}

#[test]
fn invalid_values_are_config_errors() {
    let d = tempfile::tempdir().unwrap();
    let cases = [
        "[model]\ntype = \"fbm\"\nhurst = 1.5\n",
        "[grid]\nsizes = [100, 256]\n",
        "kind = \"tanaka\"\n",
        "[tanaka]\npayoff = \"call(\"\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write(d.path(), &format!("c{i}.toml"), text);
        let kind = if i == 3 { "tanaka" } else { "simulate" };
        let o = run(&[kind, "--config", &cfg, "--out", "o"], d.path());
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", stderr(&o));
    }
}

#[test]
fn overflow_is_a_numerical_failure() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", "[model]\ntype = \"bm\"\n[grid]\nsizes = [256]\n[hedge]\nmu = 1000.0\n");
    let o = run(&["hedge", "--config", &cfg, "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!d.path().join("o/hedge.csv").exists());
}

#[test]
fn brownian_validation_points_satisfy_the_bound() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", "[model]\ntype = \"bm\"\n[crossing]\nsamples = 20000\n");
    let o = run(&["crossing", "--config", &cfg, "--out", "o"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("o/crossing.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,t,a,exact,mc,se,bound_total,satisfied"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.ends_with(",true")));
}

#[test]
fn tanaka_writes_one_summary_row_per_size() {
    let d = tempfile::tempdir().unwrap();
    let cfg =
        write(d.path(), "c.toml", "replicas = 4\n[model]\ntype = \"fbm\"\nhurst = 0.75\n[grid]\nsizes = [256, 1024]\n");
    let o = run(&["tanaka", "--config", &cfg, "--out", "o"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let per_path = fs::read_to_string(d.path().join("o/tanaka.csv")).unwrap();
    assert_eq!(per_path.lines().count(), 1 + 8);
    let summary = fs::read_to_string(d.path().join("o/tanaka_summary.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        summary.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 257.0);
    // the median relative residual on a zero-bracket path is small at these sizes
    assert!(rows[1][5] < 0.05, "{summary}");
}

#[test]
fn help_lists_the_kinds() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--help"], d.path());
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for k in ["simulate", "fracnorm", "integrate", "localtime", "tanaka", "crossing", "hedge", "membership"] {
        assert!(text.contains(k), "{k} missing from help");
    }
    assert_eq!(run(&["nonsense"], d.path()).status.code(), Some(2));
}
