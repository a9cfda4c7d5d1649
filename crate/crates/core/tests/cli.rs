mod common;

use std::path::Path;
use std::process::{Command, Output};

use nagsens::cli::RunReport;

fn nagsens(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nagsens"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn stdout_tables(out: &Output) -> Vec<(String, Vec<Vec<String>>)> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut tables: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    for line in text.split("\r\n").flat_map(|l| l.split('\n')) {
        if let Some(name) = line.strip_prefix("# ") {
            tables.push((name.to_string(), Vec::new()));
        } else if !line.is_empty() {
            let row = line.split(',').map(str::to_string).collect();
            tables.last_mut().unwrap().1.push(row);
        }
    }
    tables
}

fn table<'a>(tables: &'a [(String, Vec<Vec<String>>)], name: &str) -> &'a [Vec<String>] {
    &tables
        .iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("no table {name}"))
        .1
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn centrality_of_two_player_network() {
    let out = nagsens(
        &["centrality", "--format", "csv"],
        Some(&common::fixture("p2_quadratic.json")),
    );
    assert!(out.status.success());
    let tables = stdout_tables(&out);
    let rows = table(&tables, "centrality");
    assert_eq!(rows[0], ["player", "bonacich", "keyplayer", "leontief_diag"]);
    for row in &rows[1..] {
        assert!((num(&row[1]) - 2.0).abs() < 1e-12);
        assert!((num(&row[2]) - 3.0).abs() < 1e-12);
    }
    let pinned = table(&tables, "pinned_sensitivity");
    assert!((num(&pinned[1][1]) - 0.5).abs() < 1e-12);
}

#[test]
fn chain_targets() {
    let out = nagsens(
        &["target", "--format", "csv"],
        Some(&common::fixture("chain_quadratic.json")),
    );
    assert!(out.status.success());
    let tables = stdout_tables(&out);
    let rows = table(&tables, "target");
    assert_eq!(rows[1][..3], ["ex_ante", "2", "false"]);
    assert!((num(&rows[1][3]) - 2.25).abs() < 1e-12);
}

#[test]
fn fj_fixed_point() {
    let out = nagsens(
        &["fj-sim", "--format", "csv"],
        Some(&common::fixture("fj_two_agents.json")),
    );
    assert!(out.status.success());
    let tables = stdout_tables(&out);
    let rows = table(&tables, "fixed_point");
    assert!((num(&rows[1][1]) - 2.0 / 3.0).abs() < 1e-10);
    assert!((num(&rows[2][1]) - 1.0 / 3.0).abs() < 1e-10);
    let trajectory = table(&tables, "trajectory");
    assert!(trajectory.len() > 2);
}

#[test]
fn wheatstone_solve_routes_everything_over_the_bridge() {
    let out = nagsens(&["solve", "--format", "csv"], Some(&common::fixture("wheatstone.json")));
    assert!(out.status.success());
    let tables = stdout_tables(&out);
    let flows: Vec<f64> = table(&tables, "edge_flows")[1..].iter().map(|r| num(&r[1])).collect();
    for (z, want) in flows.iter().zip([150.0, 0.0, 150.0, 0.0, 150.0]) {
        assert!((z - want).abs() < 1e-6, "{flows:?}");
    }
}

#[test]
fn uninformed_population_is_insensitive_to_the_bridge() {
    let out = nagsens(
        &["routing-sweep", "--format", "csv"],
        Some(&common::fixture("wheatstone.json")),
    );
    assert!(out.status.success());
    let tables = stdout_tables(&out);
    let rows = table(&tables, "sweep");
    let blind: Vec<_> = rows[1..].iter().filter(|r| num(&r[0]) == 0.0).collect();
    assert_eq!(blind.len(), 8);
    for r in blind {
        assert_eq!(num(&r[3]), 0.0);
        assert!((num(&r[2]) - 9825.0).abs() < 1e-6);
        assert_eq!(r[5], "false");
    }
}

#[test]
fn degenerate_bound_refuses_sensitivity() {
    let out = nagsens(&["sens"], Some(&common::fixture("degenerate_bound.json")));
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "cq_violation");
    assert_eq!(err["strict_complementarity"], false);
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"schema_version": "1", "game": "quadratic",
            "quadratic": {"p": {"rows": 2, "cols": 2, "data": [1, 1, 1, 0]},
                          "interaction": {"kind": "linear", "gamma": 0.5}}}"#,
    )
    .unwrap();
    let out = nagsens(&["solve"], Some(&bad));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "validation");
    assert!(err["errors"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e.as_str().unwrap().contains("P_ii = 0")));

    std::fs::write(&bad, r#"{"schema_version": "1", "game": "quadratic", "colour": 3}"#).unwrap();
    let out = nagsens(&["solve"], Some(&bad));
    assert_eq!(out.status.code(), Some(2));

    let out = nagsens(&["solve"], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "configuration");
}

#[test]
fn command_must_match_game() {
    let out = nagsens(&["routing-sweep"], Some(&common::fixture("p2_quadratic.json")));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn written_report_matches_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nagsens"))
        .args(["certify", "--seed", "9", "--config"])
        .arg(common::fixture("k3_generic.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("certify_report.json")).unwrap();
    let report: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.command, "certify");
    assert_eq!(report.seed, 9);
    assert!(report.input_digest.starts_with("sha256:"));
    for t in &report.tables {
        let csv = std::fs::read(dir.path().join(format!("certify_{}.csv", t.name))).unwrap();
        assert_eq!(csv, t.to_csv().unwrap());
    }
}

#[test]
fn sweep_json_is_deterministic_apart_from_timing() {
    let run = || {
        let out = nagsens(
            &["routing-sweep", "--format", "json", "--seed", "4"],
            Some(&common::fixture("wheatstone.json")),
        );
        assert!(out.status.success());
        let mut report: RunReport = serde_json::from_slice(&out.stdout).unwrap();
        report.wall_time_ms = 0.0;
        report
    };
    assert_eq!(run(), run());
}
