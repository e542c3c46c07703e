use std::path::Path;
use std::process::{Command, Output};

fn msrk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msrk"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn msrk")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in\n{report}"))
        .to_string()
}

#[test]
fn gen_so2_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrk(
        &[
            "gen-so2", "--stages", "2", "--steps", "2", "--out", "a.msrk",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let o = msrk(&["analyze", "a.msrk"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = stdout(&o);
    assert_eq!(field(&r, "C"), "1.414214");
    assert_eq!(field(&r, "C_eff"), "0.707107");
    assert_eq!(field(&r, "oracle order"), "2");
    assert_eq!(field(&r, "validation"), "ok");

    msrk(
        &[
            "gen-so2", "--stages", "7", "--steps", "4", "--out", "b.msrk",
        ],
        dir.path(),
    );
    let r = stdout(&msrk(&["analyze", "b.msrk"], dir.path()));
    assert_eq!(field(&r, "C_eff"), "0.963274");
}

#[test]
fn generated_file_is_stable_across_writes() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["x.msrk", "y.msrk"] {
        msrk(
            &["gen-so2", "--stages", "3", "--steps", "2", "--out", name],
            dir.path(),
        );
    }
    let x = std::fs::read(dir.path().join("x.msrk")).unwrap();
    let y = std::fs::read(dir.path().join("y.msrk")).unwrap();
    assert_eq!(x, y);
    let m = msrk::format::read(dir.path().join("x.msrk")).unwrap();
    assert_eq!(
        m,
        msrk::theory::gen_second_order(3, 2)
            .map(|mut m| {
                m.name = "SO2(3,2)".into();
                m
            })
            .unwrap()
    );
}

#[test]
fn analyze_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.msrk"), "format = \"msrk/1\"\ns = [\n").unwrap();
    let o = msrk(&["analyze", "bad.msrk"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let mut m = msrk::ssprk33();
    m.b[0] = -0.1;
    m.b[1] += 0.1;
    msrk::format::write(dir.path().join("neg.msrk"), &m).unwrap();
    let o = msrk(&["analyze", "neg.msrk"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let r = stdout(&o);
    assert!(r.contains("violation"));
    assert!(r.contains("C: "));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        msrk(
            &["gen-so2", "--stages", "1", "--steps", "2", "--out", "z"],
            dir.path()
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(msrk(&["frobnicate"], dir.path()).status.code(), Some(2));
    msrk(
        &[
            "gen-so2", "--stages", "2", "--steps", "2", "--out", "a.msrk",
        ],
        dir.path(),
    );
    let o = msrk(
        &[
            "run",
            "--problem",
            "heat",
            "--method",
            "a.msrk",
            "--dt",
            "0.1",
            "--tf",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn table1_matches_reference_cells() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrk(&["table1"], dir.path());
    assert!(o.status.success());
    let t = stdout(&o);
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines[0], "s,k=2,k=3,k=4,k=5");
    assert_eq!(lines[1], "2,0.70711,0.80902,0.86038,0.89039");
    assert_eq!(lines[7], "8,0.93541,0.95711,0.96798,0.97448");
    assert_eq!(lines.len(), 8);
}

#[test]
fn stepsearch_and_convergence() {
    let dir = tempfile::tempdir().unwrap();
    msrk::format::write(dir.path().join("rk3.msrk"), &msrk::ssprk33()).unwrap();
    let o = msrk(
        &[
            "stepsearch",
            "--problem",
            "advection",
            "--method",
            "rk3.msrk",
            "--property",
            "tvd",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("\"(3,1,3)\",tvd,"), "{row}");
    let normalized: f64 = row.rsplit(',').nth(2).unwrap().parse().unwrap();
    assert!((normalized - 1.0).abs() <= 0.02, "{row}");

    msrk(
        &[
            "gen-so2", "--stages", "2", "--steps", "2", "--out", "so2.msrk",
        ],
        dir.path(),
    );
    let o = msrk(
        &[
            "convergence",
            "--problem",
            "vdp",
            "--method",
            "so2.msrk",
            "--out",
            "conv.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("conv.csv")).unwrap();
    let slope: f64 = csv
        .lines()
        .last()
        .unwrap()
        .strip_prefix("slope,")
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope - 2.0).abs() <= 0.3);

    let o = msrk(
        &["stepsearch", "--problem", "buckley", "--method", "so2.msrk"],
        dir.path(),
    );
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let mut row: Vec<f64> = line
        .rsplit(',')
        .take(6)
        .map(|x| x.parse().unwrap())
        .collect();
    row.reverse();
    assert!(
        row[4] >= row[0],
        "positivity {} below tvd {}",
        row[4],
        row[0]
    );
}

#[test]
fn run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    msrk(
        &[
            "gen-so2", "--stages", "3", "--steps", "3", "--out", "m.msrk",
        ],
        dir.path(),
    );
    let args = [
        "run",
        "--problem",
        "buckley",
        "--method",
        "m.msrk",
        "--dt",
        "0.004",
        "--tf",
        "0.125",
    ];
    let a = msrk(&args, dir.path());
    let b = msrk(&args, dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("t,tv,min\n"));
}

#[test]
fn optimize_writes_method_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrk(
        &[
            "optimize", "--stages", "2", "--steps", "2", "--order", "3", "--starts", "4", "--out",
            "m.msrk",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let c_eff: f64 = field(&stdout(&o), "C_eff").parse().unwrap();
    assert!(c_eff >= 0.36603 - 1e-3);
    let log = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(log.starts_with("start,r,merit,iterations\n"));
    let r = stdout(&msrk(&["analyze", "m.msrk"], dir.path()));
    let c: f64 = field(&r, "C").parse().unwrap();
    assert!((c / 2.0 - c_eff).abs() < 1e-6);
}

#[test]
fn optimize_reports_infeasibility() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrk(
        &[
            "optimize", "--stages", "2", "--steps", "2", "--order", "4", "--starts", "4", "--out",
            "m.msrk",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(!dir.path().join("m.msrk").exists());
}
