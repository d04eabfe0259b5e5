use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vfog::config::REFERENCE_TOML;

fn vfog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vfog")).args(args).output().unwrap()
}

fn write_scenario(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn validate_config_accepts_the_reference() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), REFERENCE_TOML);
    let out = vfog(&["validate-config", "--scenario", &path]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("5 vehicles"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_scenario(dir.path(), &REFERENCE_TOML.replace("horizon_s = 10.0", ""));
    let out = vfog(&["validate-config", "--scenario", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon_s"));

    let good = write_scenario(dir.path(), REFERENCE_TOML);
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    for args in [
        vec![
            "run",
            "--scenario",
            &good,
            "--sweep",
            "max_power",
            "--range",
            "30:0:5",
            "--out",
            o,
        ],
        vec!["run", "--scenario", &good, "--sweep", "sideways", "--out", o],
        vec!["run", "--scenario", &good, "--approach", "Fastest", "--out", o],
        vec!["run", "--scenario", &good, "--sweep", "delay", "--out", o],
    ] {
        let out = vfog(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn solver_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        &REFERENCE_TOML.replace("max_conflict_nodes = 32", "max_conflict_nodes = 1"),
    );
    let o = dir.path().join("o");
    let out = vfog(&[
        "run",
        "--scenario",
        &path,
        "--approach",
        "Robust",
        "--out",
        o.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn single_run_writes_one_row_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), REFERENCE_TOML);
    let o = dir.path().join("out");
    let out = vfog(&[
        "run",
        "--scenario",
        &path,
        "--approach",
        "Robust",
        "--outage-trials",
        "200",
        "--out",
        o.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(o.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "approach,sweep_param,value,throughput_bits,consumed_power_watts,objective,outage_rate"
    );
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("Robust,none,0.0,"));
    for chart in ["throughput_bits", "consumed_power_watts", "objective", "outage_rate"] {
        let svg = fs::read_to_string(o.join(format!("{chart}.svg"))).unwrap();
        assert!(svg.starts_with("<svg"), "{chart}");
    }
}

#[test]
fn dump_graph_writes_four_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), REFERENCE_TOML);
    let o = dir.path().join("dump");
    let out = vfog(&[
        "dump-graph",
        "--scenario",
        &path,
        "--outage-trials",
        "100",
        "--out",
        o.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["graph.csv", "conflicts.csv", "pairs.csv", "solution.csv"] {
        let text = fs::read_to_string(o.join(name)).unwrap();
        assert!(text.lines().count() > 1, "{name} is empty");
    }
}
