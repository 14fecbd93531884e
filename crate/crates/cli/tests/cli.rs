use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_diode-hom"));
    cmd.env_remove("HOMSIM_OUT_DIR");
    cmd
}

fn measured_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/measured.json")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .arg("--config")
        .arg(measured_config())
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn relations_prints_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["relations", "--t1", "800", "--t2", "60", "--g2", "0.03"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("T2* = 62.3 ps"), "{text}");
    assert!(text.contains("0.0375"), "{text}");
    assert!(text.contains("fulfilled") && !text.contains("not fulfilled"), "{text}");
}

#[test]
fn relations_criterion_can_fail() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["relations", "--t1", "800", "--t2", "60", "--g2", "0.4"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("not fulfilled"));
}

#[test]
fn relations_domain_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["relations", "--t1", "800", "--t2", "2000"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["--config", "/nonexistent/cfg.json", "dip"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read"));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = bin().arg("teleport").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn dip_is_symmetric_with_minimum_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["dip", "--delta-min", "-400", "--delta-max", "400", "--delta-step", "20"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("dip.csv"));
    assert_eq!(rows.len(), 41);
    for (a, b) in rows.iter().zip(rows.iter().rev()) {
        assert_eq!(a[0], -b[0]);
        assert!((a[1] - b[1]).abs() < 1e-9);
    }
    let min = rows.iter().min_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    assert_eq!(min[0], 0.0);
}

#[test]
fn orthogonal_dip_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["dip", "--orthogonal", "--delta-step", "100"], dir.path());
    assert!(o.status.success());
    assert!(read_csv(&dir.path().join("dip.csv")).iter().all(|r| r[1] == 0.5));
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(measured_config()).unwrap()).unwrap();
    cfg["quadrature"] = serde_json::json!({"rel_tol": 1e-14, "abs_tol": 1e-300, "max_subdivisions": 1});
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let o = bin()
        .arg("--config")
        .arg(&path)
        .arg("--out-dir")
        .arg(dir.path())
        .arg("dip")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hom_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["hom", "--cycles", "20000", "--seed", "7"], d.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["cycles"], 20000);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let mut names: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect();
    names.push("manifest.json".into());
    assert!(names.contains(&"hom_histogram.csv".to_owned()));
    for name in names {
        assert_eq!(
            std::fs::read(a.path().join(&name)).unwrap(),
            std::fs::read(b.path().join(&name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("HOMSIM_OUT_DIR", dir.path())
        .args(["relations", "--t1", "800", "--t2", "60"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("relations.json").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn waveform_reports_gate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["waveform"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("gate: [1680, 1980] ps"));
    let gate: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gate.json")).unwrap()).unwrap();
    assert_eq!(gate["length"], 300.0);
}

#[test]
fn fit_recovers_generating_parameters() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["dip", "--delta-step", "20"], dir.path()).status.success());
    let data = dir.path().join("dip.csv");
    let o = run(
        &[
            "fit",
            "--data",
            data.to_str().unwrap(),
            "--tau-c",
            "45",
            "--sigma",
            "40",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert!((fit["tau_c"].as_f64().unwrap() / 60.0 - 1.0).abs() < 1e-3, "{fit}");
    assert!(
        (fit["sigma_jitter"].as_f64().unwrap() / 31.0 - 1.0).abs() < 1e-3,
        "{fit}"
    );
    assert_eq!(fit["converged"], true);
    assert!(stdout(&o).contains("tau_c (ps)"));
}

#[test]
fn plot_translates_histogram_and_rejects_unknown() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["hbt", "--cycles", "5000"], dir.path()).status.success());
    let o = run(
        &[
            "plot",
            "--input",
            dir.path().join("hbt_histogram.csv").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("hbt_histogram_plot.csv")).unwrap();
    assert!(text.starts_with("time_ns,counts\n"));
    let o = run(
        &["plot", "--input", dir.path().join("hbt_peaks.json").to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(std::fs::read_to_string(dir.path().join("hbt_peaks_plot.csv"))
        .unwrap()
        .starts_with("peak_index,area\n"));

    let junk = dir.path().join("junk.csv");
    std::fs::write(&junk, "foo,bar\n1,2\n").unwrap();
    assert_eq!(
        run(&["plot", "--input", junk.to_str().unwrap()], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn dip_mc_writes_error_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "dip-mc",
            "--cycles",
            "20000",
            "--delta-min",
            "-200",
            "--delta-max",
            "200",
            "--delta-step",
            "200",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("dip_mc.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[1][1] < rows[0][1] && rows[1][1] < rows[2][1]);
    assert!(rows.iter().all(|r| r[2] > 0.0));
}
