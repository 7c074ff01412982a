//! End-to-end checks of the command-line surface: every subcommand, the
//! text/CSV/JSON formats they exchange, determinism of `run`, and the
//! error exit paths.

use std::path::Path;
use std::process::{Command, Output};
use tempfile::tempdir;
use thzkit::pipeline::FitRecord;
use thzkit::prelude::*;
use thzkit::snr::parse_snr_samples;

fn thzkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thzkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = thzkit(args);
    assert!(
        out.status.success(),
        "thzkit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf8 path")
}

#[test]
fn synth_writes_a_parseable_deterministic_sweep() {
    let dir = tempdir().unwrap();
    let file = dir.path().join("sweep.txt");
    run_ok(&[
        "synth",
        "--distance-m", "0.25",
        "--angle-deg", "5",
        "--seed", "7",
        "--out", path_str(&file),
    ]);
    let text = std::fs::read_to_string(&file).unwrap();
    let sweep = parse_sweep(&text).unwrap();
    assert_eq!(sweep.meta().distance_m, 0.25);
    assert_eq!(sweep.meta().angle_deg, 5.0);
    assert_eq!(sweep.meta().label, "d0.25m_a5deg");
    assert_eq!(sweep.len(), 4096);

    let stdout = run_ok(&[
        "synth",
        "--distance-m", "0.25",
        "--angle-deg", "5",
        "--seed", "7",
    ]);
    assert_eq!(stdout, text, "stdout and --out must match byte for byte");
}

#[test]
fn ingest_normalizes_and_applies_calibration() {
    let dir = tempdir().unwrap();
    let meas = dir.path().join("meas.txt");
    let cal = dir.path().join("cal.txt");
    run_ok(&["synth", "--distance-m", "0.3", "--seed", "1", "--out", path_str(&meas)]);
    run_ok(&["synth", "--distance-m", "0.2", "--seed", "2", "--out", path_str(&cal)]);

    // Without a calibration the canonical form round-trips.
    let plain = run_ok(&["ingest", path_str(&meas)]);
    assert_eq!(plain, std::fs::read_to_string(&meas).unwrap());

    let calibrated = run_ok(&["ingest", path_str(&meas), "--cal", path_str(&cal)]);
    let m = parse_sweep(&std::fs::read_to_string(&meas).unwrap()).unwrap();
    let c = parse_sweep(&std::fs::read_to_string(&cal).unwrap()).unwrap();
    let out = parse_sweep(&calibrated).unwrap();
    let want = m.s21()[10] / c.s21()[10];
    assert!((out.s21()[10] - want).norm() <= 1e-12 * want.norm());
}

#[test]
fn cir_and_cfr_emit_csv() {
    let dir = tempdir().unwrap();
    let sweep = dir.path().join("sweep.txt");
    run_ok(&["synth", "--distance-m", "0.3", "--seed", "3", "--out", path_str(&sweep)]);

    let cir = run_ok(&["cir", path_str(&sweep), "--window", "hann"]);
    let lines: Vec<&str> = cir.lines().collect();
    assert_eq!(lines[0], "delay_s,re,im,power_db");
    assert_eq!(lines.len(), 4097);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);

    let cfr = run_ok(&["cfr", path_str(&sweep)]);
    let lines: Vec<&str> = cfr.lines().collect();
    assert_eq!(lines[0], "freq_hz,magnitude_db");
    assert_eq!(lines.len(), 4097);
    assert_eq!(lines[1].split(',').next().unwrap().parse::<f64>().unwrap(), 240e9);
}

#[test]
fn snr_fit_ks_capacity_chain() {
    let dir = tempdir().unwrap();
    let sweep = dir.path().join("sweep.txt");
    let snr = dir.path().join("snr.txt");
    let fit = dir.path().join("fit.json");
    run_ok(&["synth", "--distance-m", "0.2", "--seed", "4", "--out", path_str(&sweep)]);

    run_ok(&[
        "snr", path_str(&sweep),
        "--bandwidth-hz", "1e9",
        "--n0-dbm-hz", "-120",
        "--out", path_str(&snr),
    ]);
    let samples = parse_snr_samples(&std::fs::read_to_string(&snr).unwrap()).unwrap();
    assert_eq!(samples.len(), 4096);
    assert_eq!(samples.noise().bandwidth_hz, 1e9);
    assert_eq!(samples.noise().n0_dbm_per_hz, -120.0);

    run_ok(&[
        "fit", path_str(&snr),
        "--method", "em",
        "--k", "2",
        "--seed", "3",
        "--out", path_str(&fit),
    ]);
    let record: FitRecord = serde_json::from_str(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    assert_eq!(format!("{}", record.method), "em");
    assert!(record.converged.is_some());
    assert!(record.final_mean_log_likelihood.is_finite());
    assert!(record.iterations <= 500);

    let ks_json = run_ok(&["ks", path_str(&snr), "--mixture", path_str(&fit)]);
    let ks: KsResult = serde_json::from_str(&ks_json).unwrap();
    assert!(ks.statistic > 0.0 && ks.statistic < 1.0);
    assert!((0.0..=1.0).contains(&ks.p_value));
    assert_eq!(ks.n, 4096);

    let cap_json = run_ok(&[
        "capacity",
        "--mixture", path_str(&fit),
        "--bandwidth-hz", "60e9",
    ]);
    let cap: CapacityResult = serde_json::from_str(&cap_json).unwrap();
    assert_eq!(cap.method, CapacityMethod::Quadrature);
    assert!(cap.capacity_bits_per_s > 0.0);
    assert!(cap.est_abs_error <= 1e-6 * cap.capacity_bits_per_s);

    let mc_json = run_ok(&[
        "capacity",
        "--mixture", path_str(&fit),
        "--bandwidth-hz", "60e9",
        "--method", "monte-carlo",
        "--samples", "20000",
        "--seed", "11",
    ]);
    let mc: CapacityResult = serde_json::from_str(&mc_json).unwrap();
    assert_eq!(mc.method, CapacityMethod::MonteCarlo);
    let gap = (mc.capacity_bits_per_s - cap.capacity_bits_per_s).abs();
    assert!(gap <= 4.0 * mc.est_abs_error, "MC {mc:?} vs quadrature {cap:?}");
}

fn write_small_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("config.txt");
    std::fs::write(
        &cfg,
        "#distances_m 0.2,0.3\n#angles_deg 0,5\n#n_points 1024\n\
         #dp_burnin 100\n#dp_samples 100\n#seed 9\n",
    )
    .unwrap();
    cfg
}

#[test]
fn run_produces_the_documented_artifact_tree() {
    let dir = tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let out_dir = dir.path().join("out");
    let stdout = run_ok(&[
        "run",
        "--config", path_str(&cfg),
        "--out", path_str(&out_dir),
    ]);
    assert!(stdout.contains("success rate in passing the KS test"));

    let csv = std::fs::read_to_string(out_dir.join("capacity.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "label,distance_m,angle_deg,method,capacity_bits_per_s,est_abs_error"
    );
    assert_eq!(lines.count(), 4);
    assert!(out_dir.join("capacity_matrix.csv").is_file());
    assert!(out_dir.join("summary.txt").is_file());
    assert!(out_dir.join("config.txt").is_file());
    for setting in ["d0.2m_a0deg", "d0.2m_a5deg", "d0.3m_a0deg", "d0.3m_a5deg"] {
        for artifact in ["sweep.txt", "cir.csv", "cfr.csv", "snr.txt", "report.json"] {
            assert!(
                out_dir.join(setting).join(artifact).is_file(),
                "missing {setting}/{artifact}"
            );
        }
    }

    // The report subcommand rebuilds the same summary from disk.
    let reprint = run_ok(&["report", path_str(&out_dir)]);
    assert!(reprint.contains("success rate in passing the KS test"));

    // Same config, second directory: byte-identical batch outputs.
    let out2 = dir.path().join("out2");
    run_ok(&["run", "--config", path_str(&cfg), "--out", path_str(&out2)]);
    for name in ["capacity.csv", "capacity_matrix.csv", "summary.txt"] {
        assert_eq!(
            std::fs::read_to_string(out_dir.join(name)).unwrap(),
            std::fs::read_to_string(out2.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    assert_eq!(
        std::fs::read_to_string(out_dir.join("d0.3m_a5deg/report.json")).unwrap(),
        std::fs::read_to_string(out2.join("d0.3m_a5deg/report.json")).unwrap()
    );
}

#[test]
fn run_flag_overrides_reach_the_reports() {
    let dir = tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let out_dir = dir.path().join("out");
    run_ok(&[
        "run",
        "--config", path_str(&cfg),
        "--out", path_str(&out_dir),
        "--method", "em",
        "--k", "2",
        "--bandwidth-hz", "30e9",
        "--window", "hann",
    ]);
    let report: thzkit::pipeline::FitReport = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("d0.2m_a0deg/report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(format!("{}", report.method), "em");
    assert_eq!(report.mixture.k(), 2);
    assert_eq!(report.capacity.bandwidth_hz, 30e9);
    assert_eq!(report.window, "hann");
    assert!(!out_dir.join("d0.2m_a0deg/fit_dpgmm.json").exists());
}

#[test]
fn failures_exit_nonzero_with_messages() {
    let missing = thzkit(&["fit", "/nonexistent/snr.txt"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error:"));

    let dir = tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.txt");
    std::fs::write(&bad_cfg, "#no_such_key 1\n").unwrap();
    let out_dir = dir.path().join("out");
    let bad = thzkit(&[
        "run",
        "--config", path_str(&bad_cfg),
        "--out", path_str(&out_dir),
    ]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown config key"));

    let unknown_flag = thzkit(&["synth", "--distance-m", "0.2", "--no-such-flag"]);
    assert!(!unknown_flag.status.success());
}

#[test]
fn run_reports_setting_failures_and_exits_nonzero() {
    let dir = tempdir().unwrap();
    let in_dir = dir.path().join("in");
    std::fs::create_dir(&in_dir).unwrap();
    let good = dir.path().join("good.txt");
    run_ok(&["synth", "--distance-m", "0.4", "--seed", "5", "--out", path_str(&good)]);
    std::fs::copy(&good, in_dir.join("b_good.txt")).unwrap();
    std::fs::write(in_dir.join("a_bad.txt"), "#sweep v1\nnot a sweep\n").unwrap();

    let out_dir = dir.path().join("out");
    let out = thzkit(&[
        "run",
        "--input", path_str(&in_dir),
        "--out", path_str(&out_dir),
    ]);
    assert!(!out.status.success(), "per-setting failure must fail the batch");
    assert!(String::from_utf8_lossy(&out.stderr).contains("a_bad"));
    assert!(out_dir.join("b_good/report.json").is_file());
    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("ERROR"));
}
