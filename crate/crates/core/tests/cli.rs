use std::path::Path;
use std::process::Command;

fn hpcalc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hpcalc"))
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn eta_subcommand_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpcalc().args(["eta", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("eta: 39 rows, 0 failed"), "{stdout}");
    let csv = read(&dir.path().join("eta.csv"));
    let golden = read(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/eta.csv"));
    assert_eq!(csv, golden);
    assert!(read(&dir.path().join("eta.svg")).starts_with("<svg"));
}

#[test]
fn custom_config_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.conf");
    std::fs::write(
        &cfg,
        "[general]\nseed = 7\n\n[eta]\nq = 2\nlog_at = 0.1, 0.01\nexp_at = 1\n",
    )
    .unwrap();
    let out = hpcalc()
        .args(["all", "--format", "csv", "--tol", "1e-8", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("eta.csv").exists());
    assert!(!dir.path().join("eta.svg").exists());
    assert!(!dir.path().join("thm35.csv").exists());
}

#[test]
fn demo_config_round_trips() {
    let out = hpcalc().arg("demo-config").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), hpcalc::experiments::DEMO_CONFIG);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpcalc()
        .args(["eta", "--format", "pdf", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pdf"));

    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "[eta]\nq = two\n").unwrap();
    let out = hpcalc()
        .arg("eta")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_rows_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.conf");
    // a spread tolerance of zero cannot be met
    std::fs::write(
        &cfg,
        "[stability]\noperators = upper(0.05,1)\nh = 1, 0.1\nn_max = 200\nspread_tol = 0\n",
    )
    .unwrap();
    let out = hpcalc()
        .args(["stability", "--format", "csv", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
}
