use std::path::Path;
use std::process::{Command, Output};

fn ddflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddflow")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn short_run(out: &Path) -> Vec<String> {
    ["--bench", "cavity", "--density", "4", "--T", "0.03", "--out", out.to_str().unwrap()]
        .map(String::from)
        .to_vec()
}

#[test]
fn unknown_subcommand_and_bad_flag_exit_2() {
    assert_eq!(ddflow(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ddflow(&["dd-fom", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(ddflow(&["dd-fom", "--set", "nonsense=1"]).status.code(), Some(2));
}

#[test]
fn dd_fom_then_compare_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let args = short_run(dir.path());
    let mut run: Vec<&str> = vec!["dd-fom"];
    run.extend(args.iter().map(String::as_str));
    let out = ddflow(&run);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trajectory_fom.bin", "iterations_fom.csv", "steps_fom.csv", "run_meta.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let traj = dir.path().join("trajectory_fom.bin");
    let traj = traj.to_str().unwrap();
    let mut cmp: Vec<&str> = vec!["compare", "--a", traj, "--b", traj, "--label", "self"];
    cmp.extend(args.iter().map(String::as_str));
    let out = ddflow(&cmp);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("u1 0.000e0 p1 0.000e0 u2 0.000e0 p2 0.000e0"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("errors_self.csv")).unwrap();
    assert!(csv.lines().count() > 3);
}

#[test]
fn missing_trajectory_reports_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let args = short_run(dir.path());
    let mut cmp: Vec<&str> = vec!["compare", "--a", "nope.bin", "--b", "nope.bin"];
    cmp.extend(args.iter().map(String::as_str));
    let out = ddflow(&cmp);
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("diagnostic.txt").exists());
}
