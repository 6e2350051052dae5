use std::process::Command;

fn momvc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_momvc"))
}

#[test]
fn bounds_prints_a_sheet() {
    let out = momvc()
        .args(["bounds", "sparse_mean", "--k", "40", "--n", "2000", "--d", "200", "--s", "5", "--lambda1", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("context = \"sparse_mean\""));
    assert!(text.contains("risk_radius = 1.131370849898476"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.toml");
    assert_eq!(momvc().arg("run").arg(&missing).status().unwrap().code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "version = 9\n").unwrap();
    assert_eq!(momvc().arg("run").arg(&bad).status().unwrap().code(), Some(1));
    assert_eq!(momvc().args(["demo", "no-such-scenario"]).status().unwrap().code(), Some(1));
    assert_eq!(momvc().args(["bounds", "regression", "--k", "4", "--n", "10", "--d", "2"]).status().unwrap().code(), Some(1));
}

#[test]
fn demo_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let status = momvc().args(["demo", "pinned", "--out-dir"]).arg(dir.path()).status().unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("pinned.csv")).unwrap();
    assert_eq!(csv, include_str!("fixtures/pinned.csv"));
    assert!(dir.path().join("pinned.svg").exists());
}

#[test]
fn run_honours_output_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, include_str!("../configs/pinned.toml")).unwrap();
    let csv = dir.path().join("x.csv");
    let status = momvc().arg("run").arg(&cfg).arg("--csv").arg(&csv).status().unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(csv).unwrap(), include_str!("fixtures/pinned.csv"));
}
