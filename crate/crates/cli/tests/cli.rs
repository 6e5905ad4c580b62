use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pursuit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pursuit"))
        .args(args)
        .output()
        .expect("spawn pursuit")
}

fn ok(args: &[&str]) -> String {
    let out = pursuit(args);
    assert!(
        out.status.success(),
        "pursuit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn map_path(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../maps")
        .join(name)
        .display()
        .to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<BTreeMap<String, String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers.iter().cloned().zip(rec.iter().map(String::from)).collect()
        })
        .collect();
    (headers, rows)
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key} = {} is not a number", row[key]))
}

#[test]
fn simulate_writes_manifest_and_episode_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.json");
    std::fs::write(&config, r#"{"planning": {"K": 8, "L": 2}, "scenario": {"chaser": "smart"}}"#).unwrap();
    let map = map_path("corridor.json");
    let run = |dir: &str| {
        let out = tmp.path().join(dir);
        ok(&["simulate", "--map", &map, "--config", &s(&config), "--seed", "7", "--out", &s(&out), "-T", "10"]);
        out
    };
    let (a, b) = (run("run1"), run("run2"));
    let episode = std::fs::read(a.join("episode.ndjson")).unwrap();
    assert_eq!(episode, std::fs::read(b.join("episode.ndjson")).unwrap());

    let record: Value = serde_json::from_slice(&episode).unwrap();
    assert_eq!(record["variant"]["chaser"], "smart");
    let chaser = record["record"]["chaser_executed"]["positions"].as_array().unwrap();
    assert!(!chaser.is_empty() && chaser.len() <= 10);

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config"]["planning"]["K"], 8);
    assert_eq!(manifest["config"]["planning"]["horizon"], 10);
    assert_eq!(manifest["map"]["sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|o| o == "episode.ndjson"));
}

#[test]
fn missing_map_exits_with_status_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere.json");
    let out = pursuit(&["--map", &s(&missing), "--out", &s(&tmp.path().join("o")), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&s(&missing)));
}

#[test]
fn bad_override_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pursuit(&["--out", &s(tmp.path()), "--set", "planning.alpha=-1", "plan", "--from", "a", "--to", "b"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pursuit(&["--out", &s(tmp.path()), "--set", "planning.bogus=1", "plan", "--from", "a", "--to", "b"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_set_which_overrides_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.json");
    std::fs::write(&config, r#"{"scenario": {"restarts": 3}, "planning": {"alpha": 0.25}}"#).unwrap();
    let out = tmp.path().join("o");
    ok(&[
        "--map", "single_wall", "--config", &s(&config), "--set", "scenario.restarts=2", "--set", "planning.K=4",
        "--set", "planning.L=1", "--out", &s(&out), "experiment", "detect", "--restarts", "1", "-T", "4",
    ]);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["scenario"]["restarts"], 1);
    assert_eq!(manifest["config"]["planning"]["alpha"], 0.25);
    assert_eq!(manifest["config"]["planning"]["K"], 4);
}

#[test]
fn detect_writes_four_row_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let stdout = ok(&["--map", "corridor", "--seed", "3", "--out", &s(&out), "experiment", "detect", "--restarts", "3", "--kl", "6x2", "-T", "8"]);
    assert!(stdout.contains("smartest"));
    let (headers, rows) = read_csv(&out.join("detection_table.csv"));
    assert_eq!(headers, ["chaser_kind", "runner_kind", "restarts", "detections", "rate"]);
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let rate = num(row, "rate");
        assert!((0.0..=1.0).contains(&rate));
        assert_eq!(rate, num(row, "detections") / num(row, "restarts"));
    }

    // Rates recomputed from the episode log match the table.
    let log = std::fs::read_to_string(out.join("episodes.ndjson")).unwrap();
    let mut tally: BTreeMap<(String, String), usize> = BTreeMap::new();
    for line in log.lines() {
        let ep: Value = serde_json::from_str(line).unwrap();
        let key = (
            ep["variant"]["chaser"].as_str().unwrap().to_string(),
            ep["variant"]["runner"].as_str().unwrap().to_string(),
        );
        *tally.entry(key).or_default() += ep["record"]["detected"].as_bool().unwrap() as usize;
    }
    assert_eq!(log.lines().count(), 12);
    for row in &rows {
        let key = (row["chaser_kind"].clone(), row["runner_kind"].clone());
        assert_eq!(tally[&key] as f64, num(row, "detections"));
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[test]
fn budget_rows_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    ok(&[
        "--map", "corridor", "--seed", "5", "--out", &s(&out), "experiment", "budget", "--budget", "256", "--pairs",
        "256x1,64x4,16x16", "--restarts", "5", "-T", "14",
    ]);
    let (headers, rows) = read_csv(&out.join("budget_stats.csv"));
    assert_eq!(
        headers,
        ["K", "L", "restart", "t", "log_z_chaser", "log_z_runner", "ess", "ess_fraction", "w_min", "w_q25", "w_median", "w_q75", "w_max"]
    );
    assert_eq!(rows.len(), 3 * 5 * 13);

    // Restart means recomputed from the per-restart rows.
    let mut groups: BTreeMap<(u64, u64, u64), Vec<&BTreeMap<String, String>>> = BTreeMap::new();
    for r in &rows {
        groups
            .entry((num(r, "K") as u64, num(r, "L") as u64, num(r, "t") as u64))
            .or_default()
            .push(r);
    }
    let (_, summary) = read_csv(&out.join("budget_summary.csv"));
    assert_eq!(summary.len(), groups.len());
    for srow in &summary {
        let key = (num(srow, "K") as u64, num(srow, "L") as u64, num(srow, "t") as u64);
        let g = &groups[&key];
        assert_eq!(num(srow, "restarts") as usize, g.len());
        for col in ["log_z_chaser", "log_z_runner", "ess_fraction"] {
            let mean = g.iter().map(|r| num(r, col)).sum::<f64>() / g.len() as f64;
            assert!((mean - num(srow, col)).abs() <= 1e-9 * mean.abs().max(1.0), "{col} at {key:?}");
        }
    }

    // Quantiles recomputed from the raw weight grids.
    let weights = std::fs::read_to_string(out.join("budget_weights.ndjson")).unwrap();
    assert_eq!(weights.lines().count(), rows.len());
    for (line, row) in weights.lines().zip(&rows) {
        let w: Value = serde_json::from_str(line).unwrap();
        assert_eq!(w["t"].as_f64().unwrap(), num(row, "t"));
        let l = w["L"].as_u64().unwrap() as usize;
        let cf: Vec<f64> = serde_json::from_value(w["chaser_factors"].clone()).unwrap();
        let rw: Vec<f64> = serde_json::from_value(w["runner_weights"].clone()).unwrap();
        let mut logs: Vec<f64> = cf
            .chunks(l)
            .zip(rw.chunks(l))
            .map(|(c, r)| (c.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() / l as f64).ln())
            .collect();
        logs.sort_by(f64::total_cmp);
        for (col, q) in [("w_min", 0.0), ("w_q25", 0.25), ("w_median", 0.5), ("w_q75", 0.75), ("w_max", 1.0)] {
            let expect = quantile(&logs, q);
            assert!((expect - num(row, col)).abs() <= 1e-9 * expect.abs().max(1.0), "{col}");
        }
    }
}

#[test]
fn plan_is_deterministic_and_handles_start_equal_goal() {
    let tmp = tempfile::tempdir().unwrap();
    let o = s(tmp.path());
    let a = ok(&["--seed", "1", "--out", &o, "plan", "--from", "a", "--to", "b"]);
    let b = ok(&["--seed", "1", "--out", &o, "plan", "--from", "a", "--to", "b"]);
    assert_eq!(a, b);
    let doc: Value = serde_json::from_str(&a).unwrap();
    assert!(doc["waypoints"].as_array().unwrap().len() >= 2);

    let same: Value = serde_json::from_str(&ok(&["--out", &o, "plan", "--from", "c", "--to", "c"])).unwrap();
    assert_eq!(same["waypoints"].as_array().unwrap().len(), 1);
    assert_eq!(same["length"], 0.0);
}

#[test]
fn isovist_vertices_lie_within_range() {
    let tmp = tempfile::tempdir().unwrap();
    let doc: Value = serde_json::from_str(&ok(&["--out", &s(tmp.path()), "isovist", "--at", "10,10", "--aim", "20,10"])).unwrap();
    let range = doc["sight_range"].as_f64().unwrap();
    let poly = doc["polygon"].as_array().unwrap();
    assert!(poly.len() > 8);
    for v in poly {
        let (x, y) = (v[0].as_f64().unwrap(), v[1].as_f64().unwrap());
        assert!(((x - 10.0).powi(2) + (y - 10.0).powi(2)).sqrt() <= range + 1e-9);
    }
}

#[test]
fn empty_map_renders_bounds_and_waypoints_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let stdout = ok(&["--map", "empty_square", "--out", &s(&out), "render", "--file", "map.svg"]);
    assert!(stdout.trim_end().ends_with("map.svg"));
    let svg = std::fs::read_to_string(out.join("map.svg")).unwrap();
    assert!(svg.starts_with("<?xml") || svg.starts_with("<svg"));
    let map: Value = serde_json::from_str(&std::fs::read_to_string(map_path("empty_square.json")).unwrap()).unwrap();
    assert_eq!(svg.matches("<rect").count(), 1);
    assert_eq!(svg.matches("<circle").count(), map["waypoints"].as_array().unwrap().len());
    assert_eq!(svg.matches("<polygon").count(), 0);
}

#[test]
fn render_draws_a_simulated_episode() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("sim");
    ok(&[
        "--map", "single_wall", "--seed", "2", "--set", "planning.K=4", "--set", "planning.L=2", "--out", &s(&run),
        "simulate", "-T", "6", "--frames",
    ]);
    assert!(run.join("frames/frame_002.svg").exists());
    let episode = s(&run.join("episode.ndjson"));
    let render = |dir: &str| {
        let out = tmp.path().join(dir);
        ok(&[
            "--map", "single_wall", "--out", &s(&out), "render", "--episode", &episode, "--isovist", "2", "--width", "400",
        ]);
        std::fs::read_to_string(out.join("render.svg")).unwrap()
    };
    let svg = render("r1");
    assert_eq!(svg, render("r2"));
    assert!(svg.matches("<polyline").count() >= 2);
    assert!(svg.matches("<polygon").count() >= 2);
}
