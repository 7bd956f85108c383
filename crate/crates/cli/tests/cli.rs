//! End-to-end runs of the `qsoliton` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qsoliton_cli::format::parse_matrix;
use serde_json::Value;

fn qsoliton(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsoliton"))
        .args(args)
        .arg("--output.directory")
        .arg(dir)
        .env_remove("QSOLITON_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn text(output: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&output.stdout), String::from_utf8_lossy(&output.stderr))
}

/// A short order-2 run on a 256-site grid.
const SMALL: [&str; 8] = ["--grid.M", "256", "--run.t_end_td", "0.2", "--run.snapshot_times_td", "[0, 0.1, 0.2]", "--soliton.order", "2"];

fn curve_values(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn kerr_off_gives_poissonian_statistics_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--physics.kerr", "false", "--physics.gamma_td", "0.03"];
    args.extend(SMALL);
    let out = qsoliton(tmp.path(), &args);
    assert!(out.status.success(), "{}", text(&out));

    for domain in ["position", "frequency"] {
        let fano = curve_values(&tmp.path().join(format!("{domain}_fano.csv")));
        assert!(!fano.is_empty());
        assert!(fano.iter().all(|&f| f == 1.0), "{domain}");
        for t in 0..3 {
            let map = std::fs::read_to_string(tmp.path().join(format!("eta_{domain}/t{t:04}.txt"))).unwrap();
            let (_, _, rows) = parse_matrix(&map).unwrap();
            assert!(rows.iter().flatten().all(|e| *e == Some(0.0)));
        }
    }
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["invariants_passed"], true);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["float_format"].as_str().unwrap().contains("17 significant digits"));
    assert!(m["photon_decay"][0]["max_relative_deviation"].as_f64().unwrap() < 1e-6);
}

fn data_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                files.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    files.sort();
    files
}

#[test]
fn identical_configs_give_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut args = vec!["simulate"];
    args.extend(SMALL);
    for dir in [a.path(), b.path()] {
        let out = qsoliton(dir, &args);
        assert!(out.status.success(), "{}", text(&out));
    }
    let files = data_files(a.path());
    assert_eq!(files, data_files(b.path()));
    assert!(files.len() > 10);
    for f in &files {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{}", f.display());
    }
}

#[test]
fn two_soliton_eta_maps_respect_their_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qsoliton(
        tmp.path(),
        &[
            "simulate",
            "--grid.M",
            "512",
            "--grid.L",
            "16",
            "--soliton.order",
            "2",
            "--run.t_end_td",
            "0.8",
            "--run.snapshot_times_td",
            "[0.0, 0.4, 0.8]",
            "--output.formats",
            "[\"eta\"]",
        ],
    );
    assert!(out.status.success(), "{}", text(&out));
    let mut worst_diag = f64::NEG_INFINITY;
    for domain in ["position", "frequency"] {
        for t in 0..3 {
            let map = std::fs::read_to_string(tmp.path().join(format!("eta_{domain}/t{t:04}.txt"))).unwrap();
            let (m, _, rows) = parse_matrix(&map).unwrap();
            assert_eq!(m, 512);
            for (i, row) in rows.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    let Some(e) = e else { continue };
                    if i == j {
                        assert!(*e <= 1.0);
                        worst_diag = worst_diag.max(*e);
                    } else {
                        assert!(e.abs() <= 1.0, "{domain} t{t} ({i},{j}) = {e}");
                    }
                }
            }
        }
    }
    assert!(worst_diag > 0.0, "Kerr evolution should leave super-Poissonian filters");
    assert_eq!(manifest(tmp.path())["invariants_passed"], true);
}

#[test]
fn lossy_sweep_records_the_exponential_decay() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qsoliton(
        tmp.path(),
        &[
            "simulate",
            "--grid.M",
            "256",
            "--run.t_end_td",
            "0",
            "--run.snapshot_times_td",
            "[0]",
            "--sweep.enable",
            "true",
            "--sweep.t_end_td",
            "0.5",
            "--sweep.step_td",
            "0.25",
            "--sweep.gammas_td",
            "[0.03]",
        ],
    );
    assert!(out.status.success(), "{}", text(&out));
    let m = manifest(tmp.path());
    assert_eq!(m["sweep_horizon_td"], 0.5);
    let decay = m["photon_decay"].as_array().unwrap();
    assert_eq!(decay.len(), 3);
    for d in &decay[1..] {
        assert_eq!(d["gamma_td"], 0.03);
        assert!(d["max_relative_deviation"].as_f64().unwrap() <= 1e-4, "{d}");
        assert_eq!(d["passed"], true);
    }
    for order in [1, 2] {
        let table = std::fs::read_to_string(tmp.path().join(format!("sweep/order{order}_gamma0.03.csv"))).unwrap();
        // Header plus two domains at three times.
        assert_eq!(table.lines().count(), 7);
    }
}

#[test]
fn saved_snapshots_reanalyze_to_the_same_curves() {
    let (run, again, opt) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut args = vec!["simulate"];
    args.extend(SMALL);
    assert!(qsoliton(run.path(), &args).status.success());

    let input = run.path().to_str().unwrap();
    let out = qsoliton(again.path(), &["analyze", "--input", input, "--grid.M", "256"]);
    assert!(out.status.success(), "{}", text(&out));
    for name in ["position_mean_photons.csv", "frequency_eta_diag.csv", "position_optimum.csv", "eta_frequency/t0002.txt"] {
        assert_eq!(std::fs::read(run.path().join(name)).unwrap(), std::fs::read(again.path().join(name)).unwrap(), "{name}");
    }

    let out = qsoliton(opt.path(), &["optimize", "--input", input]);
    assert!(out.status.success(), "{}", text(&out));
    let table = std::fs::read_to_string(opt.path().join("optimum.csv")).unwrap();
    assert!(table.starts_with("domain,t_over_td"));
    assert_eq!(table.lines().count(), 1 + 2 * 3);
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["simulate", "--grid.M", "0"],
        vec!["simulate", "--grid.colour", "blue"],
        vec!["simulate", "--run.snapshot_times_td", "[5.0]"],
        vec!["--config", "/nonexistent/run.toml", "simulate"],
        vec!["simulate", "--grid.M", "32"],
        vec!["no-such-command"],
    ] {
        let out = qsoliton(tmp.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", text(&out));
    }
}

#[test]
fn config_file_and_environment_are_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("run.toml");
    std::fs::write(&file, "[grid]\nM = 128\nL = 8.0\n[soliton]\norder = 1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qsoliton"))
        .args(["--config", file.to_str().unwrap(), "print-config", "--grid.L", "12"])
        .env("QSOLITON_OUTPUT_DIR", "/tmp/from-env")
        .output()
        .unwrap();
    assert!(out.status.success());
    let printed: toml::Table = String::from_utf8(out.stdout).unwrap().parse().unwrap();
    assert_eq!(printed["grid"]["M"].as_integer(), Some(128));
    assert_eq!(printed["grid"]["L"].as_float(), Some(12.0));
    assert_eq!(printed["soliton"]["order"].as_integer(), Some(1));
    assert_eq!(printed["output"]["directory"].as_str(), Some("/tmp/from-env"));
}

#[test]
fn unstable_step_is_a_numerical_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--run.dt_td", "0.02"];
    args.extend(SMALL);
    let out = qsoliton(tmp.path(), &args);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out));
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "numerical_abort");
    assert!(m["abort"]["reason"].as_str().is_some());
}

#[test]
fn oracle_validation_window_controls_the_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qsoliton(tmp.path(), &["oracle-validate", "--oracle.samples", "4"]);
    assert!(out.status.success(), "{}", text(&out));
    assert!(tmp.path().join("oracle_report.csv").exists());

    let out = qsoliton(tmp.path(), &["oracle-validate", "--oracle.sites", "1", "--oracle.kerr_phase_end", "2", "--oracle.samples", "4"]);
    assert!(out.status.success(), "{}", text(&out));
    assert!(text(&out).contains("warning: expected deviation"));

    let out = qsoliton(tmp.path(), &["oracle-validate", "--oracle.controlled_window", "0.1", "--oracle.samples", "2"]);
    assert_eq!(out.status.code(), Some(4), "{}", text(&out));
    assert_eq!(manifest(tmp.path())["status"], "validation_failed");

    let out = qsoliton(tmp.path(), &["oracle-validate", "--oracle.sites", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classical_breather_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qsoliton(
        tmp.path(),
        &["classical", "--grid.M", "256", "--run.t_end_td", "1.5707963267948966", "--run.snapshot_times_td", "[0.7853981633974483, 1.5707963267948966]"],
    );
    assert!(out.status.success(), "{}", text(&out));
    let summary = std::fs::read_to_string(tmp.path().join("classical_summary.csv")).unwrap();
    let last: Vec<f64> = summary.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(last[1] < 0.02 && last[2] < 0.02, "{summary}");
    let compressed: Vec<f64> = summary.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(compressed[1] > 1.0, "half period should be far from the initial profile: {summary}");
}
