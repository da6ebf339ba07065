use std::fs;
use std::path::Path;
use std::process::Command;

fn moveblock() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moveblock"))
}

fn csv_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn simulate_writes_logs_and_qp_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "scheme = \"C\"\nsim_time = 0.25\n").unwrap();
    let out = dir.path().join("out");
    let status = moveblock()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--dump-qp")
        .status()
        .unwrap();
    assert!(status.success());
    let traj = csv_lines(&out.join("traj.csv"));
    assert_eq!(traj[0], "t,x0,x1,x2,x3,u0");
    assert_eq!(traj.len(), 11);
    assert_eq!(csv_lines(&out.join("kkt.csv"))[0], "t,stationarity,eq,ineq,total");
    assert_eq!(csv_lines(&out.join("timing.csv")).len(), 11);
    let meta = fs::read_to_string(out.join("meta.txt")).unwrap();
    assert!(meta.contains("scheme C"));
    assert!(meta.contains("start indices: [0, 1, 3, 6, 10, 15, 20, 35, 50, 65, 80]"));
    let h = fs::read_to_string(out.join("qp").join("H.txt")).unwrap();
    assert!(h.starts_with("10 10"));
}

#[test]
fn scheme_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let output = moveblock().args(["simulate", "--scheme", "B", "--out"]).arg(&out).output().unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("scheme B"));
}

#[test]
fn bad_config_reports_line_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scheme = \"C\"\nblock_lengths = [1, 2]\n").unwrap();
    let output = moveblock()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn bench_writes_scaling_table() {
    let dir = tempfile::tempdir().unwrap();
    let status = moveblock()
        .args(["bench-condense", "--M", "10", "--N", "20,40", "--reps", "2", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let rows = csv_lines(&dir.path().join("scaling.csv"));
    assert_eq!(rows[0], "N,M,tailored_ms,naive_ms,tailored_mults,naive_mults,predicted_mults");
    assert_eq!(rows.len(), 3);
}
