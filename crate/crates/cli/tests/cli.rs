use std::path::Path;
use std::process::{Command, Output};

fn netslice(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netslice"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn objective(o: &Output) -> Option<f64> {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("objective:"))
        .and_then(|v| v.trim().parse().ok())
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, file) in [("diamond", "diamond.json"), ("chain", "chain.json")] {
        let o = netslice(&["gen", "--example", name, "-o", file], dir.path());
        assert!(o.status.success());
    }
    dir
}

#[test]
fn diamond_with_fp2_solves_in_one_iteration() {
    let dir = setup();
    let o = netslice(
        &[
            "solve",
            "--alg",
            "cbd",
            "--variant",
            "fp2",
            "diamond.json",
            "--report",
            "r.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(objective(&o), Some(3.0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["iterations"], 1);
    assert_eq!(report["status"], "optimal");
}

#[test]
fn direct_solve_of_the_chain() {
    let dir = setup();
    let o = netslice(&["solve", "--alg", "direct", "chain.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(objective(&o), Some(1.0));
}

#[test]
fn zero_iteration_budget_is_a_usage_error() {
    let dir = setup();
    let o = netslice(
        &["solve", "--alg", "cbd", "--iter-max", "0", "diamond.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("iter_max must be at least 1"));
}

#[test]
fn iteration_limit_exit_code_and_trace() {
    let dir = setup();
    let o = netslice(
        &[
            "solve",
            "--variant",
            "fp1",
            "--iter-max",
            "1",
            "--trace",
            "t.csv",
            "diamond.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let trace = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("iteration,master_obj,tr_status,cut_nnz,cum_time_ms")
    );
    assert!(lines.next().unwrap().starts_with("1,1,infeasible,"));
}

#[test]
fn infeasible_instance_exits_with_two() {
    let dir = setup();
    let text = std::fs::read_to_string(dir.path().join("diamond.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for c in v["clouds"].as_array_mut().unwrap() {
        c["capacity"] = serde_json::json!("0.5");
    }
    std::fs::write(dir.path().join("tight.json"), v.to_string()).unwrap();
    for alg in ["cbd", "direct", "oracle"] {
        let o = netslice(&["solve", "--alg", alg, "tight.json"], dir.path());
        assert_eq!(o.status.code(), Some(2), "{alg}: {}", stdout(&o));
    }
}

#[test]
fn missing_or_malformed_files_exit_with_one() {
    let dir = setup();
    assert_eq!(
        netslice(&["solve", "nope.json"], dir.path()).status.code(),
        Some(1)
    );
    std::fs::write(dir.path().join("bad.json"), "{").unwrap();
    assert_eq!(
        netslice(&["solve", "bad.json"], dir.path()).status.code(),
        Some(1)
    );
}

#[test]
fn solution_files_verify() {
    let dir = setup();
    let o = netslice(
        &["solve", "diamond.json", "--solution", "s.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let o = netslice(&["verify", "diamond.json", "s.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "feasible");

    // Put both functions on the same cloud: the routing no longer matches.
    let text = std::fs::read_to_string(dir.path().join("s.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let first = v["placement"][0]["hosts"].clone();
    v["placement"][1]["hosts"] = first;
    std::fs::write(dir.path().join("bad.json"), v.to_string()).unwrap();
    let o = netslice(&["verify", "diamond.json", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("violation"));
}

#[test]
fn generated_instances_agree_across_algorithms() {
    let dir = setup();
    let o = netslice(
        &[
            "gen",
            "--nodes",
            "9",
            "--clouds",
            "3",
            "--services",
            "2",
            "--chain-length",
            "2",
            "--seed",
            "3",
            "-o",
            "g.json",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let oracle = netslice(&["solve", "--alg", "oracle", "g.json"], dir.path());
    for alg in ["cbd", "direct"] {
        let o = netslice(&["solve", "--alg", alg, "g.json"], dir.path());
        assert_eq!(o.status.code(), oracle.status.code());
        assert_eq!(objective(&o), objective(&oracle));
    }
}

#[test]
fn experiment_writes_csv_files() {
    let dir = setup();
    std::fs::write(
        dir.path().join("exp.toml"),
        "services = [2]\nseeds = [1, 2]\nalgorithms = [\"cbd-fp1\", \"cbd-fp2\"]\ngap = true\n\
         [generator]\nnodes = 9\nclouds = 3\nchain_length = 2\n",
    )
    .unwrap();
    let o = netslice(&["experiment", "exp.toml", "--out", "res"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["runs.csv", "gaps.csv", "summary.csv", "gap_summary.csv"] {
        assert!(dir.path().join("res").join(f).exists(), "{f}");
    }
    let runs = std::fs::read_to_string(dir.path().join("res/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 4);

    std::fs::write(
        dir.path().join("empty.toml"),
        "services = [2]\nseeds = [1]\nalgorithms = []\n",
    )
    .unwrap();
    let o = netslice(&["experiment", "empty.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no algorithms selected"));
}

#[test]
fn lp_export_has_sections() {
    let dir = setup();
    let o = netslice(&["export-lp", "diamond.json", "--model", "ns"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for section in ["Minimize", "Subject To", "Bounds", "Binaries", "End"] {
        assert!(text.contains(section), "{section}");
    }
}
