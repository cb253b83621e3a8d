//! End-to-end tests of the binary: exit codes, stdout summaries and
//! deterministic outputs.

use std::path::Path;
use std::process::{Command, Output};

fn reebflow(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reebflow"))
        .args(args)
        .arg("--out")
        .arg(out_dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

#[test]
fn unknown_suite_exits_2() {
    let dir = tempdir("nosuch");
    let out = reebflow(&["verify", "nosuch"], &dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flag_usage_exits_2() {
    let dir = tempdir("badflag");
    let out = reebflow(&["norm"], &dir); // missing --field
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn norm_of_angular_momentum_prints_value() {
    let dir = tempdir("norm");
    let out = reebflow(&["norm", "--field", "r^2/2", "--res", "64"], &dir);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    // osc + |c| = 0.5 + pi/2 ~ 2.0708 on the near-ideal default cylinder,
    // within the midpoint-rule error of the requested resolution.
    let text = stdout(&out);
    let total: f64 = text
        .rsplit_once("= ")
        .and_then(|(_, v)| v.trim().parse().ok())
        .unwrap_or_else(|| panic!("no total in: {text}"));
    let expect = 0.5 + std::f64::consts::FRAC_PI_2;
    assert!(
        (total - expect).abs() < 1e-3,
        "norm {total} vs {expect}: {text}"
    );
    assert!(dir.join("norm.json").exists());
    assert!(dir.join("norm.csv").exists());
}

#[test]
fn zero_field_flow_has_zero_displacement() {
    let dir = tempdir("flow");
    let out = reebflow(
        &["flow", "--field", "0", "--samples", "16", "--step", "1e-2"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.contains("max displacement 0.000000e0"),
        "unexpected flow output: {text}"
    );
    assert!(dir.join("flow.csv").exists());
}

#[test]
fn project_rejects_non_basic_with_exit_1() {
    let dir = tempdir("project-bad");
    let out = reebflow(&["project", "--field", "xi1"], &dir);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
}

#[test]
fn project_basic_field_reports_range() {
    let dir = tempdir("project-ok");
    // cos(2 eta) is the lift of the base height function.
    let out = reebflow(&["project", "--field", "cos(2*eta)"], &dir);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("range ["));
    assert!(dir.join("project.csv").exists());
}

#[test]
fn rho_study_writes_matrix_and_passes() {
    let dir = tempdir("rho");
    let out = reebflow(&["rho", "--eps", "0.1", "--n", "4,8,16"], &dir);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("PASS"));
    let matrix = std::fs::read_to_string(dir.join("rho-distances.csv")).unwrap();
    assert!(matrix.starts_with("flow,rho_4,rho_8,rho_16"));
    assert_eq!(matrix.lines().count(), 4);
    assert!(dir.join("rho-probe.csv").exists());
    assert!(dir.join("rho.json").exists());
}

#[test]
fn verify_quick_suite_passes() {
    let dir = tempdir("verify");
    let out = reebflow(&["verify", "calculus", "--quick"], &dir);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("checks passed"));
    let json = std::fs::read_to_string(dir.join("verify-calculus.json")).unwrap();
    assert!(json.contains("reeb.alpha_pairing.cylinder"));
}

#[test]
fn same_seed_gives_byte_identical_output() {
    let dir_a = tempdir("det-a");
    let dir_b = tempdir("det-b");
    for dir in [&dir_a, &dir_b] {
        let out = reebflow(
            &[
                "distance",
                "--field-a",
                "r^2/2",
                "--field-b",
                "r^2/4",
                "--seed",
                "9",
                "--res",
                "12",
                "--step",
                "1e-2",
            ],
            dir,
        );
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    }
    let a = std::fs::read(dir_a.join("distance.csv")).unwrap();
    let b = std::fs::read(dir_b.join("distance.csv")).unwrap();
    assert_eq!(a, b, "distance outputs differ between identical runs");
}

#[test]
fn config_file_defines_chart_and_fields() {
    let dir = tempdir("config");
    let cfg_path = dir.join("run.toml");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(
        &cfg_path,
        r#"
seed = 3

[chart]
builtin = "cylinder"
r_min = 0.05
r_max = 1.0

[fields]
h = "r^2/2"

[resolution]
quad = 24
osc = 24
"#,
    )
    .unwrap();
    let out = reebflow(
        &["norm", "--field", "h", "--config", cfg_path.to_str().unwrap()],
        &dir,
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    // r_min = 0.05 trims the oscillation slightly below 0.5.
    assert!(stdout(&out).contains("osc 0.49"), "{}", stdout(&out));
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("reebflow-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}
