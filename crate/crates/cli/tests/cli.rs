use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const T1: &str = r#"{
  "mission_points": [{"id": 0, "x": 1.0, "y": 0.0}],
  "road": {"nodes": [{"id": 0, "x": 0.0, "y": 0.0}], "edges": [], "depot": 0},
  "uav": {"speed_mps": 1.0, "fuel_capacity_j": 30.0, "cruise_power_w": 1.0, "recharge": "instant"},
  "ugv": {"speed_mps": 0.4, "fuel_capacity_j": 100000.0, "cruise_power_w": 1.0, "recharge": "instant"},
  "coverage_radius_m": 5.0
}"#;

const T3: &str = r#"{
  "mission_points": [
    {"id": 0, "x": 1.0, "y": 2.0},
    {"id": 1, "x": 11.0, "y": 2.0},
    {"id": 2, "x": 21.0, "y": 1.0}
  ],
  "road": {
    "nodes": [{"id": 0, "x": 0.0, "y": 0.0}, {"id": 1, "x": 10.0, "y": 0.0}, {"id": 2, "x": 20.0, "y": 0.0}],
    "edges": [[0, 1, 10.0], [1, 2, 10.0]],
    "depot": 0
  },
  "uav": {"speed_mps": 1.0, "fuel_capacity_j": 30.0, "cruise_power_w": 1.0, "recharge": "instant"},
  "ugv": {"speed_mps": 0.4, "fuel_capacity_j": 100000.0, "cruise_power_w": 1.0, "recharge": "instant"},
  "coverage_radius_m": 5.0
}"#;

fn coroute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coroute"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn plan_single_stop_scenario() {
    let dir = TempDir::new().unwrap();
    let scen = write_scenario(dir.path(), "t1.json", T1);
    let out = dir.path().join("out");
    let o = coroute(&["plan", s(&scen), "--out", s(&out)]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let plans: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plans.as_array().unwrap().len(), 1);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    let geo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("routes.geojson")).unwrap()).unwrap();
    assert_eq!(geo["type"], "FeatureCollection");
}

#[test]
fn plan_then_validate_line_scenario() {
    let dir = TempDir::new().unwrap();
    let scen = write_scenario(dir.path(), "t3.json", T3);
    let out = dir.path().join("out");
    assert_eq!(
        coroute(&["plan", s(&scen), "--out", s(&out)]).status.code(),
        Some(0)
    );
    let plan = out.join("plan.json");
    let o = coroute(&[
        "validate",
        s(&plan),
        "--scenario",
        s(&scen),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["report"]["ok"] == true));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("time,vehicle,x,y,fuel,task\n"));
}

#[test]
fn tampered_plan_fails_validation() {
    let dir = TempDir::new().unwrap();
    let scen = write_scenario(dir.path(), "t3.json", T3);
    let out = dir.path().join("out");
    assert_eq!(
        coroute(&["plan", s(&scen), "--out", s(&out)]).status.code(),
        Some(0)
    );
    let path = out.join("plan.json");
    let mut plans: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    // touch down 10 s before the UGV can be there
    for sortie in plans[0]["uav_route"]["sorties"].as_array_mut().unwrap() {
        if sortie["land_node"] != 0 {
            let t = sortie["land_time"].as_f64().unwrap();
            sortie["land_time"] = serde_json::json!(t - 10.0);
            sortie["launch_time"] =
                serde_json::json!(sortie["launch_time"].as_f64().unwrap() - 10.0);
        }
    }
    fs::write(&path, serde_json::to_string(&plans).unwrap()).unwrap();
    let o = coroute(&[
        "validate",
        s(&path),
        "--scenario",
        s(&scen),
        "--rank",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("co_location"));
}

#[test]
fn compare_writes_summary_table() {
    let dir = TempDir::new().unwrap();
    let scen = write_scenario(dir.path(), "t3.json", T3);
    let out = dir.path().join("out");
    let o = coroute(&["compare", s(&scen), "--out", s(&out)]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(
        lines[0],
        "schema_version,metric,unit,exact,greedy,ugv_only,exact_improvement_pct,greedy_improvement_pct"
    );
    assert!(lines[1].starts_with("1,time,min,"));
    assert!(lines[2].starts_with("1,energy,MJ,"));
}

#[test]
fn identical_runs_write_identical_plans() {
    let dir = TempDir::new().unwrap();
    let gen = dir.path().join("gen");
    assert_eq!(
        coroute(&[
            "gen",
            "--seed",
            "11",
            "--points",
            "10",
            "--area",
            "8",
            "--grid",
            "3",
            "--profile",
            "lab",
            "--out",
            s(&gen)
        ])
        .status
        .code(),
        Some(0)
    );
    let scen = gen.join("scenario.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = coroute(&["plan", s(&scen), "--seed", "5", "--out", s(out)]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert_eq!(
        fs::read(a.join("plan.json")).unwrap(),
        fs::read(b.join("plan.json")).unwrap()
    );
}

#[test]
fn gen_plan_validate_round_trip_at_lab_scale() {
    let dir = TempDir::new().unwrap();
    for seed in 0..5 {
        let out = dir.path().join(format!("run{seed}"));
        let seed = seed.to_string();
        let o = coroute(&[
            "gen",
            "--seed",
            &seed,
            "--points",
            "8",
            "--area",
            "6",
            "--grid",
            "3",
            "--profile",
            "lab",
            "--out",
            s(&out),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        let scen = out.join("scenario.json");
        assert_eq!(
            coroute(&["plan", s(&scen), "--seed", &seed, "--out", s(&out)])
                .status
                .code(),
            Some(0)
        );
        let o = coroute(&[
            "validate",
            s(&out.join("plan.json")),
            "--scenario",
            s(&scen),
            "--out",
            s(&out),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stdout)
        );
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(coroute(&["plan"]).status.code(), Some(2));
    assert_eq!(
        coroute(&["plan", "x.json", "--outer", "random"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        coroute(&["plan", "/nonexistent/scenario.json"])
            .status
            .code(),
        Some(2)
    );
    let dir = TempDir::new().unwrap();
    let scen = write_scenario(dir.path(), "t1.json", T1);
    let o = coroute(&[
        "plan",
        s(&scen),
        "--time-limit",
        "0",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--time-limit"));
    let bad = write_scenario(dir.path(), "bad.json", r#"{"mission_points": []}"#);
    assert_eq!(
        coroute(&["validate", "p.json", "--scenario", s(&bad)])
            .status
            .code(),
        Some(2)
    );
}
