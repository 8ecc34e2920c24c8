use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn inet() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inet"))
}

fn simulate_pendulum(dir: &Path) -> PathBuf {
    let out = inet().args(["simulate", "pendulum", "--out"]).arg(dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("config.json")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn edit_config(path: &Path, f: impl FnOnce(&mut Value)) {
    let mut v = read_json(path);
    f(&mut v);
    std::fs::write(path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

#[test]
fn search_writes_cross_referenced_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate_pendulum(dir.path());
    let out = inet().args(["search", "--explain", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    let report = read_json(&o.join("ranked.json"));
    let ranked = report["ranked"].as_array().unwrap();
    assert!(!ranked.is_empty());

    let log = std::fs::read_to_string(o.join("run_log.jsonl")).unwrap();
    let complete: Vec<String> = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|r| r["status"] == "complete")
        .map(|r| r["signature"].as_str().unwrap().to_string())
        .collect();
    let mut reported: Vec<String> = ranked.iter().map(|r| r["signature"].as_str().unwrap().to_string()).collect();
    let mut expected = complete.clone();
    reported.sort();
    expected.sort();
    assert_eq!(reported, expected, "every complete state appears exactly once");

    let dot = std::fs::read_to_string(o.join("dag.dot")).unwrap();
    assert!(dot.starts_with("digraph search"));
    for sig in &complete {
        assert!(o.join("equations").join(format!("{sig}.txt")).exists());
        assert!(o.join("residuals").join(format!("{sig}.csv")).exists());
        assert!(o.join("plans").join(format!("{sig}.txt")).exists());
        assert!(dot.contains(&sig[..12]));
    }
    let top = &ranked[0];
    let score = top["score"].as_f64().unwrap();
    let parts = top["structure_score"].as_f64().unwrap() + top["fit_score"].as_f64().unwrap();
    assert!((score - parts).abs() <= 1e-12 * score.abs());
    assert!(top["constraints"][0]["coefficients"][0]["slots"].is_object());
}

#[test]
fn zero_fit_weight_ranks_by_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate_pendulum(dir.path());
    edit_config(&cfg, |v| v["search"]["w_fit"] = 0.0.into());
    let out = inet().args(["search", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let report = read_json(&dir.path().join("out/ranked.json"));
    let ranked = report["ranked"].as_array().unwrap();
    let keys: Vec<(f64, String)> = ranked.iter().map(|r| (r["penalty"].as_f64().unwrap(), r["signature"].as_str().unwrap().to_string())).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    assert_eq!(keys, sorted);
}

#[test]
fn enumerate_lists_sixteen_states() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate_pendulum(dir.path());
    let o = dir.path().join("enum");
    let out = inet().args(["enumerate", "--config"]).arg(&cfg).arg("--out").arg(&o).output().unwrap();
    assert!(out.status.success());
    assert_eq!(read_json(&o.join("enumerate.json"))["states"], 16);
    assert_eq!(std::fs::read_to_string(o.join("run_log.jsonl")).unwrap().lines().count(), 16);
}

/// Torque form built by the library and written as a document.
fn torque_file(dir: &Path) -> PathBuf {
    use inet_core::forms::{AxisRef, ComplexId, Domain, INet};
    use inet_core::topology::{AxisKind, Orientation};
    let mut n = INet::new(vec![AxisRef { name: "t".into(), kind: AxisKind::Time }]);
    let th = n.add_measured("theta", &[0], &[Orientation::Primary], Default::default()).unwrap();
    let (om, _) = n.add_topological(th, 0).unwrap();
    let lat = ComplexId { domain: Domain::Latent(0), orientations: vec![Orientation::Secondary] };
    n.add_latent(th, lat.clone(), &[1]).unwrap();
    let (l, _) = n.add_latent(om, lat, &[0]).unwrap();
    n.add_topological(l, 0).unwrap();
    let p = dir.join("torque.json");
    std::fs::write(&p, n.to_json()).unwrap();
    p
}

#[test]
fn fit_and_emit_an_inet_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate_pendulum(dir.path());
    let file = torque_file(dir.path());
    let o = dir.path().join("fit");
    let out = inet().args(["fit", "--explain", "--config"]).arg(&cfg).arg("--inet").arg(&file).arg("--out").arg(&o).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = read_json(&o.join("fit.json"));
    assert!(fit["loss"].as_f64().unwrap() < 1e-10);
    assert!(o.join("plan.txt").exists());

    let e = dir.path().join("emit");
    let out = inet().args(["emit", "--inet"]).arg(&file).arg("--out").arg(&e).output().unwrap();
    assert!(out.status.success());
    let dot = std::fs::read_to_string(e.join("inet.dot")).unwrap();
    assert!(dot.starts_with("digraph inet") && dot.contains("style=dashed"));
    let eq = std::fs::read_to_string(e.join("equations.txt")).unwrap();
    assert!(eq.contains("f1(theta)") && eq.contains("c1*"));
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate_pendulum(dir.path());

    edit_config(&cfg, |v| v["split"] = 1.5.into());
    let out = inet().args(["search", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    edit_config(&cfg, |v| v["split"] = 0.7.into());
    let csv = dir.path().join("theta.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let truncated: Vec<&str> = text.lines().take(100).collect();
    std::fs::write(&csv, truncated.join("\n") + "\n").unwrap();
    let out = inet().args(["search", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 100 absent"));

    let out = inet().args(["search", "--config"]).arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn integral_override_changes_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate_pendulum(dir.path());
    let out = inet().args(["search", "--mode", "integral", "--window", "9", "--degree", "2", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&dir.path().join("out/ranked.json"))["mode"], "integral");
    let out = inet().args(["search", "--mode", "integral", "--window", "8", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fixture_csv_round_trips_bit_exactly() {
    use inet_core::fixtures::{add_noise, simulate_wave1d, WaveSpec};
    let dir = tempfile::tempdir().unwrap();
    let spec = WaveSpec { nx: 41, dx: 0.025, nt: 31, dt: 0.01, ..Default::default() };
    std::fs::write(dir.path().join("spec.json"), serde_json::to_string(&spec).unwrap()).unwrap();
    let cfg = inet_cli::run::run_simulate(inet_cli::run::System::Wave, Some(&dir.path().join("spec.json")), 0.02, 3, dir.path()).unwrap();
    let want = add_noise(&simulate_wave1d(&spec).unwrap().values, 0.02, 3);
    let got = inet_cli::ingest::ingest(&dir.path().join("u.csv"), &["t".into(), "x".into()], &[31, 41]).unwrap();
    assert!(want.iter().zip(&got).all(|(a, b)| a.to_bits() == b.to_bits()));
    let data = inet_cli::RunConfig::load(&cfg).unwrap().dataset().unwrap();
    assert_eq!(data.field("u").unwrap().values, got);
}
