use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("caplab-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn caplab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caplab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

const SMALL_RUN: &str = r#"
seed = 5
[[experiment]]
kind = "cone-compare"
samples = 8

[[experiment]]
kind = "curve-bound"
samples = 12

[[experiment]]
kind = "curve-bound"
name = "cylinder-curves"
samples = 12
profile = { shape = "cylinder", radius = 1.0, pole = "slab-disk", rho_max = 2.0 }
"#;

#[test]
fn passing_run_exits_zero_and_writes_tables() {
    let dir = scratch("pass");
    fs::write(dir.join("run.toml"), SMALL_RUN).unwrap();
    let out = caplab(&dir, &["--config", "run.toml", "--out", "res", "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    for file in [
        "cone-compare.json",
        "cone-compare-metrics.csv",
        "curve-bound-curves.csv",
        "cylinder-curves.json",
    ] {
        assert!(dir.join("res").join(file).exists(), "{file}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("res/cone-compare.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "PASS");
    assert_eq!(summary["seed"], 5);
}

#[test]
fn documented_single_runs_pass() {
    let dir = scratch("single");
    for (i, body) in [
        "kind = \"verify-appendix\"",
        "kind = \"cone-compare\"\nmetric = { kind = \"constant\", g0 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }",
        "kind = \"curve-bound\"\nsamples = 200",
    ]
    .iter()
    .enumerate()
    {
        let file = format!("run{i}.toml");
        fs::write(dir.join(&file), format!("[[experiment]]\n{body}\n")).unwrap();
        let out = caplab(&dir, &["--config", &file]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn reruns_are_byte_identical_and_seed_flag_wins() {
    let dir = scratch("rerun");
    fs::write(dir.join("run.toml"), SMALL_RUN).unwrap();
    caplab(&dir, &["--config", "run.toml", "--out", "a"]);
    caplab(&dir, &["--config", "run.toml", "--out", "b", "--jobs", "3"]);
    caplab(&dir, &["--config", "run.toml", "--out", "c", "--seed", "9"]);
    let read = |d: &str| fs::read(dir.join(d).join("curve-bound-curves.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert!(String::from_utf8(read("c"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("9,"));
}

#[test]
fn failing_criterion_exits_two() {
    let dir = scratch("fail");
    fs::write(
        dir.join("run.toml"),
        "[[experiment]]\nkind = \"foliate\"\ngrid = [11, 12]\ntune_h0 = true\nmetric = { kind = \"constant\", g0 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.3]] }\nprofile = { shape = \"sphere-cap\", radius = 1.0, pole = { spherical = { k = 2 } }, rho_max = 0.8 }\n",
    )
    .unwrap();
    let out = caplab(&dir, &["--config", "run.toml"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(2), "{stdout}");
    assert!(stdout.contains("FAIL [6c]"), "{stdout}");
}

#[test]
fn config_errors_exit_three_with_a_position() {
    let dir = scratch("config");
    fs::write(
        dir.join("bad.toml"),
        "[[experiment]]\nkind = \"foliate\"\ngird = [3, 4]\n",
    )
    .unwrap();
    let out = caplab(&dir, &["--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml:3:"));
    let out = caplab(&dir, &["--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn numeric_failures_exit_four() {
    let dir = scratch("numeric");
    // A negative cone slope is rejected when the profile is built.
    fs::write(
        dir.join("run.toml"),
        "[[experiment]]\nkind = \"curve-bound\"\nprofile = { shape = \"cone\", slope = -1.0, pole = \"conical\", rho_max = 2.0 }\n",
    )
    .unwrap();
    let out = caplab(&dir, &["--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn lists_every_experiment() {
    let dir = scratch("list");
    let out = caplab(&dir, &["--list-experiments"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for kind in [
        "verify-appendix",
        "cone-compare",
        "curve-bound",
        "stability",
        "foliate",
        "asymptotics",
        "identity-suite",
    ] {
        assert!(text.contains(kind), "{kind}");
    }
}
