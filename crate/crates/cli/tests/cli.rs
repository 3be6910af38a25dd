use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn gsegraph(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_gsegraph"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    status.status.code().expect("exit code")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn small_model(dir: &Path) -> PathBuf {
    let path = dir.join("model.json");
    fs::write(
        &path,
        r#"{"N": 30, "Lambda": 5, "tau_abs": 5.0, "gammas": [0.5, 0.5],
            "V_structure": {"sparse": {"size": 3}}, "ensemble_size": 4, "energies": 9, "seed": 3}"#,
    )
    .unwrap();
    path
}

#[test]
fn spectrum_writes_run_directory() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("spectrum");
    assert_eq!(gsegraph(&["spectrum", "--count", "100"], &out), 0);
    for f in ["config.json", "samples.csv", "report.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let r = report(&out);
    assert_eq!(r["roots"], 100);
    assert_eq!(r["unpaired_fraction"], 0.0);
    assert_eq!(r["pass"], true);
    let rows = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 101);
}

#[test]
fn outputs_independent_of_worker_count() {
    let tmp = TempDir::new().unwrap();
    let model = small_model(tmp.path());
    let model = model.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["scatter", "--realizations", "3", "--k-points", "120"],
        vec!["rmt", "--config", model],
        vec!["sweep", "--steps", "50", "--k", "120,180"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let dirs: Vec<PathBuf> = [1, 2, 4].iter().map(|w| tmp.path().join(format!("run{i}-w{w}"))).collect();
        for (dir, workers) in dirs.iter().zip(["1", "2", "4"]) {
            let mut a = args.clone();
            a.extend(["--workers", workers]);
            assert_eq!(gsegraph(&a, dir), 0, "{args:?}");
        }
        for f in ["config.json", "samples.csv", "report.json"] {
            let first = fs::read(dirs[0].join(f)).unwrap();
            for d in &dirs[1..] {
                assert_eq!(first, fs::read(d.join(f)).unwrap(), "{args:?} {f}");
            }
        }
    }
}

#[test]
fn compare_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let model = small_model(tmp.path());
    let (graph, rmt) = (tmp.path().join("graph"), tmp.path().join("rmt"));
    assert_eq!(gsegraph(&["scatter", "--realizations", "2", "--k-points", "200"], &graph), 0);
    assert_eq!(gsegraph(&["rmt", "--config", model.to_str().unwrap(), "--seed", "9"], &rmt), 0);
    let (g, r) = (graph.join("samples.csv"), rmt.join("samples.csv"));
    let (g, r) = (g.to_str().unwrap(), r.to_str().unwrap());
    let same = tmp.path().join("same");
    assert_eq!(gsegraph(&["compare", g, g], &same), 0);
    assert_eq!(report(&same)["pass"], true);
    let differ = tmp.path().join("differ");
    assert_eq!(gsegraph(&["compare", g, r], &differ), 2);
    assert_eq!(report(&differ)["pass"], false);
}

#[test]
fn overrides_reach_the_resolved_config() {
    let tmp = TempDir::new().unwrap();
    let model = small_model(tmp.path());
    let out = tmp.path().join("rmt");
    assert_eq!(gsegraph(&["rmt", "--config", model.to_str().unwrap(), "--tau-abs", "2.5", "--seed", "11"], &out), 0);
    let cfg: Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["tau_abs"], 2.5);
    assert_eq!(cfg["seed"], 11);
    let scatter = tmp.path().join("scatter");
    assert_eq!(gsegraph(&["scatter", "--realizations", "1", "--k-points", "50", "--eps", "0"], &scatter), 0);
    let r = report(&scatter);
    assert!(r["max_unitarity_defect"].as_f64().unwrap() < 1e-10);
    assert_eq!(r["checks"][0]["name"], "max_unitarity_defect");
}

#[test]
fn stats_threshold_failure_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let spectrum = tmp.path().join("spectrum");
    assert_eq!(gsegraph(&["spectrum", "--count", "700"], &spectrum), 0);
    let input = spectrum.join("samples.csv");
    let stats = tmp.path().join("stats");
    let args = ["stats", "--input", input.to_str().unwrap(), "--fold", "--expect", "poisson"];
    assert_eq!(gsegraph(&args, &stats), 2);
    let r = report(&stats);
    assert_eq!(r["levels"], 300);
    assert!(stats.join("spacing.csv").is_file() && stats.join("long_range.csv").is_file());
}

#[test]
fn errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(gsegraph(&["spectrum", "--config", "/nonexistent/graph.json"], &out), 1);
    assert_eq!(gsegraph(&["scatter", "--k-points", "not-a-number"], &out), 1);
    assert_eq!(gsegraph(&["rmt", "--realizations", "0"], &out), 1);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"vertices": [{"index": 1, "sector": "up"}], "bonds": [{"from": {"index": 1, "sector": "up"}, "to": {"index": 1, "sector": "up"}, "length_m": 1.0}], "leads": []}"#).unwrap();
    assert_eq!(gsegraph(&["spectrum", "--config", bad.to_str().unwrap()], &out), 1);
}
