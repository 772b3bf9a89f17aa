use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hnls(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hnls"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gronwall_example_reports_the_majorant() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hnls(tmp.path(), &["gronwall", "--C", "1", "--a1", "0.5", "--N", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("gronwall_C1_a0.5_N50.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
    assert!(csv.starts_with("n,a,root,plain_ratio,strengthened_ratio"));
    let summary = json(&tmp.path().join("gronwall_C1_a0.5_N50.json"));
    assert_eq!(summary["holds"], true);
    assert_eq!(summary["a"].as_array().unwrap().len(), 50);
}

#[test]
fn scaling_example_fits_the_sigma_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hnls(
        tmp.path(),
        &["scaling", "--gamma", "1.5", "--sigmas", "2,4,8", "--mode", "sigma"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("scaling_sigma_g1.5_n128.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(&header[..2], &["eps", "sigma"]);
    assert_eq!(csv.lines().count(), 4);
    let summary = json(&tmp.path().join("scaling_sigma_g1.5_n128.json"));
    let b = summary["fit"]["exponents"][0].as_f64().unwrap();
    assert!((b - 0.5).abs() < 0.05, "fitted {b}");
    assert_eq!(summary["expected"][0].as_f64().unwrap(), 0.5);
}

#[test]
fn bad_gamma_exits_with_the_admissible_range() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hnls(tmp.path(), &["evolve", "--gamma", "2.5", "--grid-n", "100"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("γ must lie in (4/3, 2)"), "{err}");
    assert!(err.contains("power of two"), "{err}");
}

#[test]
fn infeasible_schedule_names_the_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hnls(tmp.path(), &["breakdown", "--s", "2.9", "--j", "2.2", "--sigmas", "4,8"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("j must exceed (3+γ)/2"), "{err}");
}

#[test]
fn conservation_breach_exits_with_an_alarm() {
    let tmp = tempfile::tempdir().unwrap();
    // the box is too small for the dispersing datum
    let out = hnls(
        tmp.path(),
        &["evolve", "--grid-n", "32", "--half-width", "4", "--t-end", "3", "--dt", "0.05"],
    );
    assert_eq!(out.status.code(), Some(3));
    let meta = json(&tmp.path().join("metadata.json"));
    assert!(meta["alarms"][0].as_str().unwrap().contains("wrap-around"));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "gamma = 1.6\n[gronwall]\nc = 2.0\na1 = 0.1\nn = 10\n").unwrap();
    let out = hnls(tmp.path(), &["gronwall", "--config", cfg.to_str().unwrap(), "--N", "12"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echo: toml::Value = toml::from_str(&fs::read_to_string(tmp.path().join("config.toml")).unwrap()).unwrap();
    assert_eq!(echo["gamma"].as_float(), Some(1.6));
    assert_eq!(echo["gronwall"]["c"].as_float(), Some(2.0));
    assert_eq!(echo["gronwall"]["n"].as_integer(), Some(12));
    // numeric defaults are echoed too
    assert_eq!(echo["solver"]["tol_mass"].as_float(), Some(1e-10));
    assert_eq!(echo["scaling"]["dx_max"].as_float(), Some(0.55));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "gama = 1.6\n").unwrap();
    let out = hnls(tmp.path(), &["gronwall", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "metadata.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_runs_reproduce_outputs_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 11\n[solver]\nt_span = [0.0, 0.5]\ndt = 0.05\nwrap_threshold = 0.001\n[grid]\nn = 32\nhalf_width = 12.0\n[data]\nkind = \"random\"\namplitude = 0.2\n[direction]\nkind = \"random\"\n[hierarchy]\norder = 3\neps = [0.01]\n[hierarchy.config]\nanchor = \"final\"\nhorizon = 0.4\nds = 0.05\nrecord_every = 2\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let run = |cmd: &str| {
        let out = hnls(&out_dir, &[cmd, "--config", cfg.to_str().unwrap(), "--checkpoints"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        snapshot(&out_dir)
    };
    for cmd in ["evolve", "hierarchy"] {
        let first = run(cmd);
        let second = run(cmd);
        assert!(first.len() >= 3);
        assert_eq!(first, second, "{cmd}");
        fs::remove_dir_all(&out_dir).unwrap();
    }
}
