use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anosov_lab::io::{read_census_csv, read_trace_csv};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_anosov-lab"));
    c.env_remove("ANOSOV_LAB_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A reduced sweep: every property runs, with small budgets.
const QUICK: &str = "\
[samples]
seed = 11
busemann = 200
rn = 50
holonomy_segments = 100
asymptotic_pairs = 20
separation_pairs = 40
cone_points = 100
quasigeodesic_leaves = 10
c1_points = 20

[budgets]
census_word_len = 2
periodic_word_len = 2
";

#[test]
fn verify_passes_and_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, QUICK).unwrap();
    let out = dir.path().join("out");
    let o = run(&["--config", path(&cfg), "--out", path(&out), "verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    for f in [
        "report.txt",
        "checks.csv",
        "constants.csv",
        "separation.csv",
        "census.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let text = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.ends_with("0 not passed)\n"));
    assert_eq!(String::from_utf8_lossy(&o.stdout), text);
}

#[test]
fn zero_tolerance_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!("{QUICK}\n[tolerances]\nbusemann = 0.0\nrn_relative = 0.0\n"),
    )
    .unwrap();
    let o = run(&["--config", path(&cfg), "--out", path(dir.path()), "verify"]);
    assert_eq!(code(&o), 1);
    let checks = fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    assert!(checks
        .lines()
        .any(|l| l.starts_with("busemann,equivariance,FAIL")));
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--out", path(dir.path()), "verify"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[cover]\nk = 2\n").unwrap();
    let o = run(&["--config", path(&cfg), "--out", path(dir.path()), "verify"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[samples]\nseed = 1\n\n[budgets]\ncensus_word_len = 9\n",
    )
    .unwrap();
    let o = run(&["--config", path(&cfg), "census"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("line 5") && err.contains("census_word_len"),
        "{err}"
    );
    let o = run(&["census", "--k", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn census_scales_with_the_cover_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2, d2b) = (
        dir.path().join("k1"),
        dir.path().join("k2"),
        dir.path().join("k2b"),
    );
    for (k, d) in [("1", &d1), ("2", &d2), ("2", &d2b)] {
        let o = run(&["--k", k, "--max-word-len", "3", "--out", path(d), "census"]);
        assert_eq!(code(&o), 0);
    }
    let a = fs::read(d2.join("census.csv")).unwrap();
    assert_eq!(a, fs::read(d2b.join("census.csv")).unwrap());
    let base: BTreeMap<String, usize> = read_census_csv(&fs::read(d1.join("census.csv")).unwrap())
        .unwrap()
        .into_iter()
        .map(|r| (r.class, r.count))
        .collect();
    let cover = read_census_csv(&a).unwrap();
    assert_eq!(cover.len(), base.len());
    for r in cover {
        assert_eq!(r.k, 2);
        assert_eq!(r.count, 2 * base[&r.class], "{}", r.class);
    }
}

#[test]
fn empty_census_budget_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--max-word-len", "0", "--out", path(dir.path()), "census"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("census.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("class,k,exponent,"));
}

#[test]
fn traces_round_trip_and_close() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--out",
        path(dir.path()),
        "trace",
        "--u",
        "0.2",
        "--v",
        "-0.1",
        "--t",
        "0",
    ]);
    assert_eq!(code(&o), 0);
    let rows = read_trace_csv(&fs::read(dir.path().join("trace.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);

    let o = run(&[
        "--k",
        "2",
        "--out",
        path(dir.path()),
        "trace",
        "--periodic",
        "aB",
        "--index",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_trace_csv(&fs::read(dir.path().join("trace.csv")).unwrap()).unwrap();
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    assert!((first.z[0] - last.z[0]).hypot(first.z[1] - last.z[1]) < 1e-7);
    let svg = fs::read_to_string(dir.path().join("trace.svg")).unwrap();
    assert!(svg.contains("<polygon") && svg.contains("<polyline"));

    let o = run(&[
        "--out",
        path(dir.path()),
        "trace",
        "--periodic",
        "ab",
        "--index",
        "9",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn psi_trace_and_pictures() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--out",
        path(dir.path()),
        "trace",
        "--u",
        "0.1",
        "--v",
        "0.3",
        "--s",
        "0.4",
        "--t",
        "1",
        "--flow",
        "psi",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        read_trace_csv(&fs::read(dir.path().join("trace.csv")).unwrap())
            .unwrap()
            .len(),
        21
    );
    assert_eq!(
        code(&run(&["--out", path(dir.path()), "render", "--p", "0.7"])),
        0
    );
    assert!(fs::read_to_string(dir.path().join("leaves.svg"))
        .unwrap()
        .starts_with("<svg"));
    assert_eq!(
        code(&run(&["--out", path(dir.path()), "measure-charts"])),
        0
    );
    assert!(dir.path().join("charts.csv").exists() && dir.path().join("rn.csv").exists());
}

#[test]
fn out_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (env_dir, flag_dir) = (dir.path().join("env"), dir.path().join("flag"));
    let o = bin()
        .env("ANOSOV_LAB_OUT", &env_dir)
        .args(["--max-word-len", "1", "census"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(env_dir.join("census.csv").exists());
    let o = bin()
        .env("ANOSOV_LAB_OUT", &env_dir)
        .args(["--max-word-len", "1", "--out", path(&flag_dir), "census"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(flag_dir.join("census.csv").exists());
}
