//! End-to-end checks of the batch entry point: exit codes, emitted files,
//! determinism, and the verification report plumbing.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_qkinetic")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("qkinetic-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn small_config_json(extra: &str) -> String {
    format!(
        r#"{{
  "delta": 1.0, "rho": 1.0, "gamma": -1.0, "beta": 6.0,
  "v_max": 3.0, "n_per_axis": 7, "sphere_polar": 2, "sphere_azimuth": 4,
  "domain_mode": "homogeneous", "n_x": 1, "length": 1.0,
  "cutoff_m": 0.5, "seed": 99,
  "solver": {{ "dt": 0.002, "picard_tol": 1e-8, "picard_max_iters": 40,
               "t_end": 0.006, "horizon_constant": 0.0625, "substeps": 3,
               "conservative_fix": false, "max_windows": 100 }}{extra}
}}"#
    )
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn run_equilibrium_exits_zero_with_flat_diagnostics() {
    let dir = tmp_dir("run-eq");
    let cfg = write_config(&dir, "cfg.json", &small_config_json(""));
    let out = dir.join("out");
    let (code, _, err) = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("time,mass_defect,momentum_defect_x"));
    assert!(lines.len() >= 3);
    // Equilibrium stays flat: entropy column ~ 0 throughout.
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        let entropy: f64 = cols[6].parse().unwrap();
        assert!(entropy.abs() < 1e-10, "entropy {entropy}");
    }
    // Manifest lists every emitted file and the config hash matches.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    let outputs: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    for entry in std::fs::read_dir(&out).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        assert!(outputs.contains(&name), "{name} missing from manifest");
    }
    let raw = std::fs::read(&cfg).unwrap();
    assert_eq!(
        manifest["config_hash"].as_str().unwrap(),
        qkinetic::runio::fnv64_hex(&raw)
    );
}

#[test]
fn malformed_json_exits_two() {
    let dir = tmp_dir("bad-json");
    let cfg = write_config(&dir, "broken.json", "{ not json");
    let (code, _, _) = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    // Invalid value also exits 2.
    let cfg2 = write_config(&dir, "bad-val.json", r#"{"n_per_axis": 8}"#);
    let (code2, _, _) = run(&["run", "--config", cfg2.to_str().unwrap()]);
    assert_eq!(code2, 2);
    // Missing subcommand/flags report usage.
    let (code3, _, err) = run(&[]);
    assert_eq!(code3, 2);
    assert!(err.contains("usage"));
}

#[test]
fn deterministic_csv_across_reruns() {
    let dir = tmp_dir("det");
    let cfg = write_config(
        &dir,
        "cfg.json",
        &small_config_json(r#", "initial": {"kind": "bump", "amplitude": 0.3}"#),
    );
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    for o in [&out1, &out2] {
        let (code, _, err) = run(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            o.to_str().unwrap(),
            "--threads",
            "1",
        ]);
        assert_eq!(code, 0, "stderr: {err}");
    }
    let a = std::fs::read(out1.join("diagnostics.csv")).unwrap();
    let b = std::fs::read(out2.join("diagnostics.csv")).unwrap();
    assert_eq!(a, b, "diagnostics must be byte-identical for equal seeds");
}

#[test]
fn snapshots_written_when_requested() {
    let dir = tmp_dir("snap");
    let cfg = write_config(&dir, "cfg.json", &small_config_json(""));
    let out = dir.join("out");
    let (code, _, err) = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--snapshots",
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let bin0 = std::fs::read(out.join("snapshot_0000.bin")).unwrap();
    assert_eq!(bin0.len(), 343 * 8);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("snapshot_0000.json")).unwrap())
            .unwrap();
    assert_eq!(side["n_v"], 343);
    assert_eq!(side["n_per_axis"], 7);
    // First snapshot is the equilibrium: decode one value and compare.
    let first = f64::from_le_bytes(bin0[0..8].try_into().unwrap());
    assert!(first > 0.0 && first < 1.0);
}

#[test]
fn verify_empty_checks_exits_two() {
    let dir = tmp_dir("verify-empty");
    let cfg = write_config(
        &dir,
        "cfg.json",
        &small_config_json(r#", "checks": []"#),
    );
    let (code, _, err) = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2, "stderr: {err}");
}

#[test]
fn verify_small_suite_passes_and_reports() {
    let dir = tmp_dir("verify-ok");
    let cfg = write_config(
        &dir,
        "cfg.json",
        &small_config_json(
            r#", "checks": ["equilibrium-product-bounds", "fluctuation-decomposition-identity"],
  "verify": {"samples": 5000, "decomposition_trials": 2, "delta_values": [0.0, 1.0],
             "rho_values": [1.0]}"#,
        ),
    );
    let out = dir.join("out");
    let (code, stdout, err) = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout} stderr: {err}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let arr = report.as_array().unwrap();
    assert!(arr.len() >= 3);
    assert!(arr.iter().all(|r| r["pass"].as_bool().unwrap()));
    assert!(arr.iter().any(|r| r["id"] == "equilibrium-product-bounds"));
}

#[test]
fn sabotaged_scattering_sign_fails_verification() {
    let dir = tmp_dir("verify-flip");
    let cfg = write_config(
        &dir,
        "cfg.json",
        &small_config_json(
            r#", "checks": ["fluctuation-decomposition-identity"],
  "verify": {"decomposition_trials": 1, "flip_scattering_sign": true}"#,
        ),
    );
    let out = dir.join("out");
    let (code, _, _) = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 4);
    // The report is still written, with the failing entry recorded.
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report.as_array().unwrap().iter().any(|r| !r["pass"].as_bool().unwrap()));
}

#[test]
fn sweep_single_value_matches_run_semantics() {
    let dir = tmp_dir("sweep-one");
    let cfg = write_config(
        &dir,
        "cfg.json",
        &small_config_json(r#", "sweep": {"axis": "delta", "values": [1.0]}"#),
    );
    let out = dir.join("out");
    let (code, _, err) = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("axis,value,time,"));
    assert!(lines[1].starts_with("delta,1,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["axis"], "delta");
}

#[test]
fn modulated_torus_run_has_monotone_entropy() {
    let dir = tmp_dir("torus");
    let body = r#"{
  "delta": 1.0, "rho": 1.0, "gamma": -1.0, "beta": 6.0,
  "v_max": 3.0, "n_per_axis": 7, "sphere_polar": 2, "sphere_azimuth": 4,
  "domain_mode": "torus1d", "n_x": 8, "length": 1.0,
  "cutoff_m": 0.5, "seed": 7, "conservative_fix": true,
  "initial": {"kind": "modulated", "phi": {"kind": "cosine", "amplitude": 0.5}},
  "solver": { "dt": 0.002, "picard_tol": 1e-8, "picard_max_iters": 40,
              "t_end": 0.008, "horizon_constant": 0.0625, "substeps": 3,
              "conservative_fix": true, "max_windows": 100 }
}"#;
    let cfg = write_config(&dir, "cfg.json", body);
    let out = dir.join("out");
    let (code, _, err) = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let entropies: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(6).unwrap().parse().unwrap())
        .collect();
    assert!(entropies.len() >= 4);
    for w in entropies.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-8 * (1.0 + w[0].abs()),
            "entropy rose: {w:?}"
        );
    }
}
