use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn crumple(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crumple"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn crumple")
}

const SHORT_RUN: &str = "
[mesh]
proxy = 9, 8

[vehicle]
mass = 800
control_points = 16

[solver]
dt = 0.01
duration = 1
cadence = 10

[initial]
position = 0, 0.01, 0

[obstacle.ground]
type = halfspace
point = 0, 0, 0
normal = 0, 1, 0
";

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"], &["simulate", "--help"]] {
        let out = crumple(args, dir.path());
        assert!(out.status.success(), "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(crumple(&[], dir.path()).status.code(), Some(1));
    assert_eq!(crumple(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(crumple(&["bench", "x.obj", "--budgets", "a,b"], dir.path()).status.code(), Some(1));
}

#[test]
fn missing_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = crumple(&["simulate", "nope.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.cfg"));
    assert_eq!(crumple(&["hull", "nope.obj"], dir.path()).status.code(), Some(2));
}

#[test]
fn bad_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "[mesh]\nproxy = 9, 8\n[vehicle]\nmass = heavy\n[solver]\nduration = 1\n").unwrap();
    let out = crumple(&["simulate", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mass"));
}

#[test]
fn simulate_exports_every_cadence_frames() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("short.cfg"), SHORT_RUN).unwrap();
    let out = crumple(&["simulate", "short.cfg", "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let run = dir.path().join("run");
    let mut frames: Vec<String> = fs::read_dir(&run)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("frame_"))
        .collect();
    frames.sort();
    let expected: Vec<String> = (1..=10).map(|k| format!("frame_{:04}.obj", k * 10)).collect();
    assert_eq!(frames, expected);
    for name in ["final.obj", "final.crsn", "report.tsv", "timing.tsv"] {
        assert!(run.join(name).is_file(), "{name}");
    }
    let report = fs::read_to_string(run.join("report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 101);

    let decoded = crumple(&["snapshot", "decode", "run/final.crsn"], dir.path());
    assert!(decoded.status.success());
    let text = String::from_utf8_lossy(&decoded.stdout);
    assert!(text.contains("frame    100"), "{text}");
}

#[test]
fn proxy_hull_and_bind_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(crumple(&["proxy", "--stations", "9", "--ring", "8", "-o", "car.obj"], p).status.success());
    let out = crumple(&["hull", "car.obj", "--points", "12", "-o", "hull.obj"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("kept 12"));
    let out = crumple(&["bind", "car.obj", "hull.obj", "-o", "w.crbw"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::metadata(p.join("w.crbw")).unwrap().len() > 0);

    let out = crumple(&["bench", "car.obj", "--budgets", "8,12", "--steps", "5"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 3);
}
