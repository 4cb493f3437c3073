use std::process::{Command, Output};

fn wbsn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wbsn")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn demo_exit_codes() {
    let ok = wbsn(&["handshake-demo"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(stdout(&ok).matches("=== phase").count(), 5);

    for (flag, reason) in
        [("stale-t1", "Reject(StaleTimestamp)"), ("replay", "Reject(Replay)"), ("bad-mac", "Reject(BadMac)")]
    {
        let out = wbsn(&["handshake-demo", "--inject", flag, "-v"]);
        assert_eq!(out.status.code(), Some(1), "{flag}");
        assert!(stdout(&out).contains(reason), "{flag}");
    }
}

#[test]
fn simulate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let missing = wbsn(&["simulate", "--config", "/no/such/file.conf", "--out", out]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "sim.n_sensors = lots\n").unwrap();
    assert_eq!(wbsn(&["simulate", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(2));

    let crowded = dir.path().join("crowded.conf");
    std::fs::write(&crowded, "sim.n_sensors = 400\nsim.min_spacing = 3.5\n").unwrap();
    assert_eq!(wbsn(&["simulate", "--config", crowded.to_str().unwrap(), "--out", out]).status.code(), Some(3));
}

#[test]
fn simulate_writes_matrix_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.conf");
    std::fs::write(
        &cfg,
        "sim.n_sensors = 25\nsim.area_radius = 7\nsim.duration_s = 4\ncrypto.curve = toy17\nmatrix.attackers = 0, 3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = wbsn(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--runs",
        "2",
        "--seed",
        "40",
    ]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 2 * 2);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(3).is_some_and(|s| s == "40" || s == "41")));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("loss_pct=") && summary.contains("±"));
}

#[test]
fn bench_single_size() {
    let dir = tempfile::tempdir().unwrap();
    let run = wbsn(&["bench", "--sizes", "10", "--iters", "500", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("timing.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("10,"));
    assert!(stdout(&run).contains("hardware-dependent"));
    assert_eq!(wbsn(&["bench", "--sizes", "0", "--out", "/tmp"]).status.code(), Some(2));
}
