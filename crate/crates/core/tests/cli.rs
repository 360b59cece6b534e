//! Integration tests for the `rre` binary: exit codes, output files,
//! manifests, and run-to-run reproducibility.

use std::path::Path;
use std::process::{Command, Output};

use rre_core::config_io::sha256_hex;

fn rre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rre"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn validate_reports_structure_of_example() {
    let out = rre(&["validate", "--example", "scalar"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("1 states, 1 outputs"), "{text}");
    assert!(text.contains("spectral radius of A: 1.414214"), "{text}");
    assert!(text.contains("detectable: yes"), "{text}");
    assert!(text.contains("stabilizable: yes"), "{text}");
    assert!(text.contains("ok"), "{text}");
}

#[test]
fn bad_config_exits_2_and_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{
            "system": {"A": [[1.0]], "C": [[1.0]], "Q": [[1.0]], "R": [[1.0]]},
            "gamma_bar": [1.5, -0.1],
            "horizon": 0,
            "replicates": 0
        }"#,
    )
    .unwrap();
    let out = rre(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for needle in ["1.5", "-0.1", "horizon", "replicates"] {
        assert!(err.contains(needle), "missing {needle:?} in: {err}");
    }
}

#[test]
fn malformed_json_and_missing_file_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    let out = rre(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("malformed JSON"), "{}", stderr(&out));

    let out = rre(&["validate", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_and_missing_source_exit_2() {
    let out = rre(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = rre(&["dare"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dare_report_contains_the_scalar_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = rre(&[
        "dare",
        "--example",
        "scalar",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "dare.json")).unwrap();
    let trace = report["trace"].as_f64().unwrap();
    assert!((trace - (1.0 + std::f64::consts::SQRT_2)).abs() < 1e-9);
    let gain = report["gain"][0][0].as_f64().unwrap();
    assert!((gain + 1.0).abs() < 1e-9);
    assert!(report["iterations"].as_u64().unwrap() <= 200);
}

#[test]
fn simulate_is_bit_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    let run = |out: &Path, seed: &str| {
        let st = rre(&[
            "simulate",
            "--example",
            "scalar",
            "--gamma",
            "0.7",
            "--horizon",
            "400",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(st.status.code(), Some(0), "{}", stderr(&st));
    };
    run(&a, "11");
    run(&b, "11");
    run(&c, "12");
    let t_a = read(&a, "trajectory.csv");
    assert_eq!(t_a, read(&b, "trajectory.csv"), "same seed must match");
    assert_ne!(t_a, read(&c, "trajectory.csv"), "new seed must differ");

    // 400 steps plus the initial condition plus the header.
    assert_eq!(t_a.lines().count(), 402);
    assert_eq!(t_a.lines().next().unwrap(), "t,arrival,trace,lambda_max");
}

#[test]
fn simulate_manifest_checksums_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = rre(&[
        "simulate",
        "--example",
        "scalar",
        "--gamma",
        "0.8",
        "--horizon",
        "50",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    for record in manifest["outputs"].as_array().unwrap() {
        let name = record["name"].as_str().unwrap();
        let bytes = std::fs::read(dir.path().join(name)).unwrap();
        assert_eq!(sha256_hex(&bytes), record["sha256"].as_str().unwrap());
        assert_eq!(bytes.len() as u64, record["bytes"].as_u64().unwrap());
    }
    let config_bytes = std::fs::read(dir.path().join("config.json")).unwrap();
    assert_eq!(
        sha256_hex(&config_bytes),
        manifest["config_sha256"].as_str().unwrap()
    );
}

#[test]
fn overflowing_trajectory_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = rre(&[
        "simulate",
        "--example",
        "scalar",
        "--gamma",
        "0",
        "--horizon",
        "1200",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("non-finite"), "{}", stderr(&out));
}

#[test]
fn support_atlas_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let out = rre(&[
        "support",
        "--example",
        "scalar",
        "--depth",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let atlas = read(dir.path(), "atlas.csv");
    // 2^4 = 16 distinct nodes plus the header.
    assert_eq!(atlas.lines().count(), 17);
    assert_eq!(
        atlas.lines().next().unwrap(),
        "word,length,trace,lambda_max"
    );
    let summary: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "support-summary.json")).unwrap();
    assert_eq!(summary["node_count"].as_u64(), Some(16));
    assert_eq!(summary["complete"].as_bool(), Some(true));
}

#[test]
fn scalar_fractal_reports_bands_and_self_similarity() {
    let dir = tempfile::tempdir().unwrap();
    let out = rre(&[
        "scalar-fractal",
        "--depth",
        "6",
        "--levels",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let nodes = read(dir.path(), "nodes.csv");
    assert_eq!(nodes.lines().count(), 65); // 2^6 nodes + header
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "fractal-report.json")).unwrap();
    assert_eq!(report["hole_violation_count"].as_u64(), Some(0));
    assert!(report["affine_deviation"].as_f64().unwrap() <= 1e-9);
    let holes = report["holes"].as_array().unwrap();
    let first_len = holes[0]["length"].as_f64().unwrap();
    assert!((first_len - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
}

#[test]
fn critical_report_matches_scalar_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let out = rre(&[
        "critical",
        "--example",
        "scalar",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "critical.json")).unwrap();
    assert!((report["lower"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    let upper = report["upper"].as_f64().unwrap();
    assert!((upper - 1.0 / (2.0 * std::f64::consts::SQRT_2 - 1.0)).abs() < 1e-5);
    assert!(report["spectral_radius_at_upper"].as_f64().unwrap() < 1.0);
    assert_eq!(report["weak_sense_critical"].as_f64(), Some(0.0));
    let text = stdout(&out);
    assert!(text.contains("bracket"), "{text}");
}

#[test]
fn ergodic_flags_divergence_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    // Rate zero overflows f64 around step 1020; the time-average command
    // reports that as a diagnostic, not as a failure.
    let out = rre(&[
        "ergodic",
        "--example",
        "scalar",
        "--gamma",
        "0",
        "--horizon",
        "2000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("WARNING"), "{}", stdout(&out));
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "ergodic.json")).unwrap();
    assert_eq!(report["diagnostic"]["divergent"].as_bool(), Some(true));
    assert_eq!(report["diagnostic"]["nonfinite"].as_bool(), Some(true));
}

#[test]
fn ergodic_converges_at_full_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = rre(&[
        "ergodic",
        "--example",
        "scalar",
        "--gamma",
        "1.0",
        "--horizon",
        "20000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "ergodic.json")).unwrap();
    let value = report["value"].as_f64().unwrap();
    assert!((value - (1.0 + std::f64::consts::SQRT_2)).abs() < 1e-6);
    assert_eq!(report["diagnostic"]["divergent"].as_bool(), Some(false));
}

#[test]
fn cdf_writes_one_table_per_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = rre(&[
        "cdf",
        "--example",
        "scalar",
        "--gamma",
        "0.6,0.9",
        "--replicates",
        "100",
        "--horizon",
        "50",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for name in ["cdf-0.6000.csv", "cdf-0.9000.csv"] {
        let table = read(dir.path(), name);
        assert_eq!(table.lines().count(), 101, "{name}");
        assert_eq!(table.lines().next().unwrap(), "value,cdf");
        let last = table.lines().last().unwrap();
        let cdf: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(cdf, 1.0);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "cdf-summary.json")).unwrap();
    assert_eq!(summary["per_rate"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_drives_runs_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys.json");
    std::fs::write(
        &sys,
        r#"{"A": [[1.4142135623730951]], "C": [[1.0]], "Q": [[1.0]], "R": [[1.0]]}"#,
    )
    .unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{
            "system": {"path": "sys.json"},
            "gamma_bar": 0.9,
            "seed": 5,
            "horizon": 60
        }"#,
    )
    .unwrap();

    let from_cfg = dir.path().join("out1");
    let out = rre(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        from_cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(read(&from_cfg, "trajectory.csv").lines().count(), 62);

    // --horizon overrides the config's 60.
    let overridden = dir.path().join("out2");
    let out = rre(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--horizon",
        "30",
        "--out",
        overridden.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(read(&overridden, "trajectory.csv").lines().count(), 32);

    // The config snapshot next to the outputs records the effective values.
    let snapshot: serde_json::Value =
        serde_json::from_str(&read(&overridden, "config.json")).unwrap();
    assert_eq!(snapshot["horizon"].as_u64(), Some(30));
    assert_eq!(snapshot["seed"].as_u64(), Some(5));
}

#[test]
fn ten_dim_example_is_usable_from_the_cli() {
    let out = rre(&["validate", "--example", "ten-dim"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("10 states, 5 outputs"), "{text}");
    assert!(text.contains("spectral radius of A: 1.250000"), "{text}");
    assert!(text.contains("detectable: yes"), "{text}");
}
