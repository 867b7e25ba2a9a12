use std::path::PathBuf;
use std::process::{Command, Output};

use infodesign::import_sdpa;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infodesign")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn prior_equilibrium_matches_hand_solution() {
    let scn = data("two_link_affine.scn");
    let o = run(&["equilibrium", scn.to_str().unwrap(), "--nu", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("y =     4.17     0.83"), "{text}");
    assert!(text.contains("social cost 113.3333"), "{text}");
}

#[test]
fn full_information_equilibrium_with_partial_participation() {
    let scn = data("two_link_affine.scn");
    let o = run(&["equilibrium", scn.to_str().unwrap(), "--policy", "full-info", "--nu", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("y =     3.23     0.52"), "{}", stdout(&o));
}

#[test]
fn errors_exit_with_one() {
    assert_eq!(run(&["equilibrium", "missing.scn"]).status.code(), Some(1));
    let scn = data("two_link_affine.scn");
    let bad = run(&["equilibrium", scn.to_str().unwrap(), "--policy", "1,0;0"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(!bad.stderr.is_empty());
    assert_ne!(run(&["design", scn.to_str().unwrap(), "--nu", "1.5"]).status.code(), Some(0));
}

#[test]
fn certified_design_reports_a_small_gap() {
    let scn = data("two_link_affine.scn");
    let o = run(&["design", scn.to_str().unwrap(), "--mode", "diagonal", "--starts", "10", "--certify"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("cost 109.6482"), "{text}");
    let gap: f64 = text.lines().find_map(|l| l.split("gap ").nth(1)).unwrap().trim().parse().unwrap();
    assert!(gap.abs() < 1e-4, "{gap}");
}

#[test]
fn export_writes_a_readable_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("affine.dat-s");
    let scn = data("two_link_affine.scn");
    let o = run(&["export-sdpa", scn.to_str().unwrap(), "--nu", "0.5", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let back = import_sdpa(&out).unwrap();
    assert_eq!(back.num_vars, 28);
    assert_eq!(back.block_sizes[0], 7);

    let bpr = data("two_link_bpr.scn");
    let rejected = run(&["export-sdpa", bpr.to_str().unwrap(), "--nu", "0.5", "-o", out.to_str().unwrap()]);
    assert_eq!(rejected.status.code(), Some(1));
}

#[test]
fn sweep_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scn = data("two_link_affine.scn");
    let csv = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "--threads", "2", "sweep", scn.to_str().unwrap(), "--grid", "0,1", "--starts", "5", "--seed", "3", "--no-timing",
            "-o", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        std::fs::read_to_string(out).unwrap()
    };
    let a = csv("a.csv");
    assert_eq!(a, csv("b.csv"));
    assert!(a.lines().any(|l| l.starts_with("# scenario_sha256 ")), "{a}");
    let header = a.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, infodesign::report::CSV_HEADER.join(","));
    let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.ends_with(',')), "timing column should be empty");
}
