use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use swarmer_cli::{execute, Cli};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn swarmer(args: &[&str]) -> i32 {
    let mut argv = vec!["swarmer"];
    argv.extend_from_slice(args);
    execute(Cli::try_parse_from(argv).expect("args parse"))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swarmer"))
}

#[test]
fn golden_grid_run() {
    let out = tempfile::tempdir().unwrap();
    let cfg = data("grid64.cfg");
    assert_eq!(swarmer(&["run", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]), 0);
    let got = fs::read_to_string(out.path().join("metrics.csv")).unwrap();
    assert_eq!(got, fs::read_to_string(data("grid64_metrics.csv")).unwrap());
    assert!(out.path().join("summary.txt").exists());
    assert!(out.path().join("snap_0.xyz").exists());
}

#[test]
fn exact_deployment_summary_reports_zero() {
    let out = tempfile::tempdir().unwrap();
    let cfg = data("grid64.cfg");
    let code = swarmer(&[
        "run", "--config", cfg.to_str().unwrap(), "--set", "epsilon_deg=0", "--out", out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary = fs::read_to_string(out.path().join("summary.txt")).unwrap();
    assert!(summary.lines().any(|l| l == "final_hd = 0"), "{summary}");
}

#[test]
fn overrides_are_last_wins_and_seed_applies() {
    let args = swarmer_cli::RunArgs {
        config: Some(data("grid64.cfg")),
        set: vec!["epsilon_deg=3".into(), "epsilon_deg=7".into(), "seed=4".into()],
        out: "unused".into(),
        seed: Some(9),
    };
    let cfg = swarmer_cli::load_config(&args).unwrap();
    assert_eq!((cfg.epsilon_deg, cfg.seed), (7.0, 9));
    // relative cloud_path resolves next to the config file
    assert_eq!(Path::new(cfg.cloud_path.as_deref().unwrap()), data("grid64.xyz"));
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "seed = 1\nwobble = 3\n").unwrap();
    let out = bin().args(["run", "--config", cfg.to_str().unwrap(), "--out"]).arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("wobble") && err.contains("line 2"), "{err}");
}

#[test]
fn missing_config_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    assert_eq!(swarmer(&["run", "--config", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]), 3);
}

#[test]
fn missing_cloud_path_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(swarmer(&["run", "--out", dir.path().to_str().unwrap()]), 2);
}

#[test]
fn compare_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("grid64.cfg");
    assert_eq!(swarmer(&["compare", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]), 0);
    for f in ["hd_swarmer.csv", "hd_triangulation.csv", "hd_trilateration.csv", "compare_summary.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

fn gen(kind: &str, extra: &[&str]) -> String {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["gen", kind, "--out", dir.path().to_str().unwrap()];
    args.extend_from_slice(extra);
    assert_eq!(swarmer(&args), 0);
    fs::read_to_string(dir.path().join(format!("{kind}.xyz"))).unwrap()
}

fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().map(|l| l.split_whitespace().map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn gen_line_has_unit_gaps() {
    let pts = rows(&gen("line", &["--n", "10", "--spacing", "1"]));
    assert_eq!(pts.len(), 10);
    for w in pts.windows(2) {
        let d: f64 = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((d - 1.0).abs() < 1e-12);
        assert_eq!(w[0][1..], w[1][1..], "collinear along the first axis");
    }
}

#[test]
fn gen_grid_is_eight_by_eight() {
    let pts = rows(&gen("grid", &["--n", "64", "--dim", "2"]));
    assert_eq!(pts.len(), 64);
    let distinct = |i: usize| {
        let mut v: Vec<i64> = pts.iter().map(|p| p[i] as i64).collect();
        v.sort();
        v.dedup();
        v.len()
    };
    assert_eq!((distinct(0), distinct(1)), (8, 8));
}

#[test]
fn gen_blob_is_deterministic() {
    let args = ["--n", "200", "--dim", "3", "--seed", "7"];
    let a = gen("blob", &args);
    assert_eq!(a, gen("blob", &args));
    assert_eq!(a.lines().count(), 200);
}

#[test]
fn gen_rejects_unknown_kind() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(swarmer(&["gen", "spiral", "--out", dir.path().to_str().unwrap()]), 2);
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

fn validate(text: Option<&str>) -> (i32, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.xyz");
    if let Some(t) = text {
        fs::write(&path, t).unwrap();
    }
    let out = bin().arg("validate").arg(&path).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn validate_exit_codes() {
    assert_eq!(validate(Some("0 0 0\n1 0 0\n0 1 0\n")).0, 0);
    let (code, report) = validate(Some("0 0 0\n0 0 0\n1 1 1\n1 1 1\n0 0 0\n2 2 2\n"));
    assert_eq!(code, 1);
    assert!(report.contains("3 duplicates"), "{report}");
    let (code, report) = validate(Some("0 0 0\n1 1 1\n1 2 3 4\n"));
    assert_eq!(code, 2);
    assert!(report.contains("line 3"), "{report}");
    assert_eq!(validate(None).0, 3);
}
