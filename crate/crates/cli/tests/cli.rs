use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gnse-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn gnse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnse")).args(args).output().expect("binary runs")
}

fn cell(csv: &str, column: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    row[header.iter().position(|h| *h == column).unwrap()].to_string()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let (a, b) = (scratch("run-a"), scratch("run-b"));
    for dir in [&a, &b] {
        let out = gnse(&["--out", path(dir), "--seed", "5", "run", "--preset", "zero-data,tangential-cavity"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["zero-data.csv", "zero-data_sweep.csv", "tangential-cavity.csv", "tangential-cavity_sweep.csv"] {
        let (x, y) = (fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
        assert_eq!(x, y, "{file} differs");
    }
    let csv = fs::read_to_string(a.join("zero-data.csv")).unwrap();
    assert_eq!(cell(&csv, "seed"), "5");
    assert_eq!(cell(&csv, "converged"), "true");
    for dir in [a, b] {
        fs::remove_dir_all(dir).unwrap();
    }
}

#[test]
fn generated_files_feed_the_solver() {
    let dir = scratch("solve");
    let mesh = dir.join("square.mesh");
    let out = gnse(&["gen-mesh", "--resolution", "8", "--output", path(&mesh), "--data-preset", "cavity"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let data = dir.join("square.data");
    assert!(data.exists());

    let dump = dir.join("solution.txt");
    let out = gnse(&[
        "--out", path(&dir), "solve", "--mesh", path(&mesh), "--data", path(&data), "--eta", "0.25",
        "--no-penalty", "--dump", path(&dump),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("solve.csv")).unwrap();
    assert_eq!(cell(&csv, "converged"), "true");
    let weak: f64 = cell(&csv, "weak_residual").parse().unwrap();
    assert!(weak < 1e-7, "{weak}");
    assert!(fs::read_to_string(&dump).unwrap().contains("# columns: id x y vx vy pressure"));

    let out = gnse(&["--out", path(&dir), "build-extension", "--mesh", path(&mesh), "--data", path(&data), "--eta", "0.25"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(dir.join("extension.csv")).unwrap().starts_with("eta,h_lr"));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn smallness_from_norms() {
    let dir = scratch("smallness");
    let out = gnse(&["--out", path(&dir), "check-smallness", "--kt", "1", "--kn", "0.1", "--kd", "0.1", "--kf", "0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("smallness.csv")).unwrap();
    assert_eq!(csv, String::from_utf8(out.stdout).unwrap());
    assert_eq!(cell(&csv, "minimum"), "interior");
    assert!(cell(&csv, "satisfied") == "true" || cell(&csv, "satisfied") == "false");

    let out = gnse(&["--out", path(&dir), "check-smallness", "--kn", "1"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("smallness.csv")).unwrap();
    assert_eq!(cell(&csv, "minimum"), "constant");
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn sweep_writes_table_and_plot() {
    let dir = scratch("sweep");
    let out = gnse(&["--out", path(&dir), "sweep-eta", "--preset", "cavity", "--from", "0.01", "--to", "0.3", "--count", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(dir.join("cavity_sweep.csv")).unwrap().lines().count(), 5);
    assert!(fs::read_to_string(dir.join("cavity_sweep.svg")).unwrap().contains("<polyline"));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn verify_reports_checks() {
    let out = gnse(&["--out", path(&scratch("verify")), "verify", "--preset", "zero-data"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("zero-data: solve converged in 1 iterations"), "{text}");
    assert!(text.contains("weak-form residual"));
}

#[test]
fn errors_exit_with_code_two() {
    let out = gnse(&["run", "--preset", "no-such-preset"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unknown preset") && err.contains("known presets"), "{err}");

    let out = gnse(&["check-smallness", "--p", "2.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = gnse(&["solve", "--data", "/nonexistent/file.data", "--eta", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}
