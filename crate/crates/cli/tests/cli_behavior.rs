//! Binary-level behavior: exit codes, summarize output, seed override.

use std::path::{Path, PathBuf};
use std::process::Command;

fn qpipe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qpipe"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn tiny_scenario(assertions: &str) -> String {
    format!(
        r#"{{
  "name": "tiny",
  "config": {{
    "model": {{ "seed": 5, "input_dim": 8, "hidden_dim": 16, "n_classes": 4, "blocks": 4 }},
    "dataset": {{ "seed": 6, "n_microbatches": 120, "microbatch_size": 8,
                  "center_scale": 2.0, "noise_sigma": 0.5, "amplitude_jitter": 0.5,
                  "outlier_fraction": 0.1, "outlier_gain": 6.0 }},
    "n_stages": 2,
    "compute_latency_sec": [0.01],
    "channels": [ {{ "schedule": [{{ "t_sec": 0.0, "mbps": 1000.0 }}, {{ "t_sec": 0.7, "mbps": 500.0 }}] }} ],
    "adapt": {{ "target_rate_img_s": 100.0, "window_len": 20, "change_threshold": 0.1, "ladder": false }},
    "quant": {{ "hist_bins": 128, "search_steps": 50, "ds_overhead_sec": 0.0001 }},
    "quant_mode": {{ "mode": "adaptive", "method": "pda" }}
  }},
  "assertions": {assertions}
}}"#
    )
}

fn write_scenario(dir: &Path, body: &str) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join("scenario.json");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_passes_with_exit_zero() {
    let dir = tmp("cli-pass");
    let sc = write_scenario(&dir, &tiny_scenario("{}"));
    let out = qpipe()
        .args(["run"])
        .arg(&sc)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in [
        "meta.json",
        "microbatches.csv",
        "controller.csv",
        "rate.csv",
        "bandwidth_bitwidth.csv",
        "agreement.csv",
        "events.csv",
        "summary.csv",
    ] {
        assert!(dir.join("out").join(file).exists(), "{file} missing");
    }
}

#[test]
fn failing_assertion_exits_one() {
    let dir = tmp("cli-assert");
    let sc = write_scenario(&dir, &tiny_scenario(r#"{ "min_mean_agreement": 1.5 }"#));
    let out = qpipe()
        .args(["run"])
        .arg(&sc)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(1),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("assertion failed"));
}

#[test]
fn invalid_config_exits_two() {
    let dir = tmp("cli-invalid");
    // Channel list does not match the stage count.
    let body = tiny_scenario("{}").replace(r#""n_stages": 2"#, r#""n_stages": 3"#);
    let sc = write_scenario(&dir, &body);
    let out = qpipe()
        .args(["run"])
        .arg(&sc)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = qpipe()
        .args(["run", "/nonexistent/scenario.json", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let garbled = write_scenario(&dir.join("garbled"), "{ not json");
    let out = qpipe()
        .args(["run"])
        .arg(&garbled)
        .arg("--out")
        .arg(dir.join("out2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn summarize_reports_phases() {
    let dir = tmp("cli-summarize");
    let sc = write_scenario(&dir, &tiny_scenario("{}"));
    let out_dir = dir.join("out");
    assert!(qpipe()
        .args(["run"])
        .arg(&sc)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap()
        .success());

    let out = qpipe().arg("summarize").arg(&out_dir).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("phase"), "{text}");
    // Two schedule entries -> two phase rows (header + 2 lines).
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "{summary}");

    let missing = qpipe()
        .args(["summarize", "/nonexistent/dir"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn summarize_single_phase_single_row() {
    let dir = tmp("cli-single-phase");
    let body = tiny_scenario("{}").replace(
        r#"[{ "t_sec": 0.0, "mbps": 1000.0 }, { "t_sec": 0.7, "mbps": 500.0 }]"#,
        r#"[{ "t_sec": 0.0, "mbps": 1000.0 }]"#,
    );
    let sc = write_scenario(&dir, &body);
    let out_dir = dir.join("out");
    assert!(qpipe()
        .args(["run"])
        .arg(&sc)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap()
        .success());
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2, "{summary}");
}

#[test]
fn seed_override_changes_data_deterministically() {
    let dir = tmp("cli-seed");
    // A lossy fixed-width run so the agreement trace depends on the data.
    let body = tiny_scenario("{}").replace(
        r#"{ "mode": "adaptive", "method": "pda" }"#,
        r#"{ "mode": "fixed", "bitwidth": 2, "method": "pda" }"#,
    );
    let sc = write_scenario(&dir, &body);
    let (a, b, c) = (dir.join("a"), dir.join("b"), dir.join("c"));
    for (out, seed) in [(&a, "1"), (&b, "1"), (&c, "2")] {
        assert!(qpipe()
            .args(["run"])
            .arg(&sc)
            .arg("--out")
            .arg(out)
            .args(["--seed", seed])
            .status()
            .unwrap()
            .success());
    }
    let read = |d: &Path| std::fs::read(d.join("agreement.csv")).unwrap();
    assert_eq!(read(&a), read(&b), "same seed must reproduce");
    assert_ne!(read(&a), read(&c), "different seed must differ");
}

#[test]
fn short_run_skips_summary_but_passes() {
    let dir = tmp("cli-short");
    // 10 microbatches < 20-window: no complete window, still a valid run.
    let body = tiny_scenario("{}").replace(r#""n_microbatches": 120"#, r#""n_microbatches": 10"#);
    let sc = write_scenario(&dir, &body);
    let out_dir = dir.join("out");
    let out = qpipe()
        .args(["run"])
        .arg(&sc)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!out_dir.join("summary.csv").exists());
    assert!(out_dir.join("microbatches.csv").exists());
}
