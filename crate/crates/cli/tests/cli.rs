use std::path::PathBuf;
use std::process::Command;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/manifest.ini")
}

fn ies() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ies"))
}

#[test]
fn validate_bundled() {
    let out = ies().arg("validate").arg(manifest()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("T = 24"));
}

#[test]
fn broken_manifest_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ini");
    std::fs::write(&path, "[units]\nbogus = 1\n").unwrap();
    let out = ies().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn solve_mode_two_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = ies().args(["solve", "--mode", "2", "--out"]).arg(dir.path()).arg(manifest()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["schedule.csv", "summary.csv", "kkt_report.txt", "plot_load.csv", "plot_cuts.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn oracle_check_runs() {
    let out = ies().args(["oracle-check", "--trials", "5", "--seed", "3"]).arg(manifest()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("5/5"));
}
