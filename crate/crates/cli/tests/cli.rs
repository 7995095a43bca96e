use std::path::Path;
use std::process::{Command, Output};

fn rotators(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotators"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn stationary_supercritical_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotators(&["stationary", "--set", "coupling=2", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("stationary.json"));
    assert!((v["r"].as_f64().unwrap() - 0.8314620247542568).abs() < 1e-12);
    assert!((v["diffusion_coefficient"].as_f64().unwrap() - 1.01252226456864).abs() < 1e-12);
    assert!((v["profile_integral"].as_f64().unwrap() - 1.0).abs() < 1e-8);

    let mut rdr = csv::Reader::from_path(dir.path().join("profile.csv")).unwrap();
    let q: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    let integral = q.iter().sum::<f64>() * std::f64::consts::TAU / q.len() as f64;
    assert!((integral - 1.0).abs() < 1e-8);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn stationary_subcritical_has_no_diffusion_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotators(&["stationary", "--set", "coupling=0.5", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let v = json(&dir.path().join("stationary.json"));
    assert_eq!(v["r"].as_f64().unwrap(), 0.0);
    assert!(v["diffusion_coefficient"].is_null());
}

#[test]
fn missing_required_key_fails_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotators(&["pde", "--out", &out_arg(dir.path())]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim_end().lines().count(), 1);
    assert!(err.contains("coupling"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "coupling = 2\nmodez = 32\n").unwrap();
    let o = rotators(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("modez"));
}

#[test]
fn flag_beats_file_beats_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "coupling = 2\nseed = 5\nn = 200\n").unwrap();
    let base = ["simulate", "--config", cfg.to_str().unwrap(), "--set", "t_end=0.5"];
    let out = dir.path().join("a");
    let mut args = base.to_vec();
    args.extend(["--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(rotators(&args).status.success());
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["n"], 200);
    assert_eq!(m["config"]["dt"], 0.001);
    assert_eq!(m["config"]["t_end"], 0.5);
    let out_b = dir.path().join("b");
    let mut args = base.to_vec();
    args.extend(["--out", out_b.to_str().unwrap()]);
    assert!(rotators(&args).status.success());
    assert_eq!(json(&out_b.join("manifest.json"))["seed"], 5);
}

#[test]
fn diffusion_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = rotators(&[
            "diffusion",
            "--set",
            "coupling=2",
            "--set",
            "n=100",
            "--set",
            "tau_f=0.3",
            "--set",
            "dt=0.01",
            "--set",
            "n_paths=8",
            "--set",
            "bootstrap=50",
            "--seed",
            "4",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a", "1");
    let b = run("b", "2");
    let ja = std::fs::read(a.join("diffusion.json")).unwrap();
    assert_eq!(ja, std::fs::read(b.join("diffusion.json")).unwrap());
    assert_eq!(
        std::fs::read(a.join("variance.csv")).unwrap(),
        std::fs::read(b.join("variance.csv")).unwrap()
    );
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    for key in ["d_hat", "stderr", "target"] {
        assert!(v[key].is_number(), "{key}");
    }
}

#[test]
fn spectrum_and_pde_commands_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotators(&[
        "spectrum",
        "--set",
        "coupling=2",
        "--set",
        "modes=32",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("spectrum.json"));
    assert!((v["eigenvalues"][1].as_f64().unwrap() - 1.148248419).abs() < 1e-6);
    assert!(dir.path().join("eigenfunction_0.csv").exists());

    let o = rotators(&[
        "pde",
        "--set",
        "coupling=2",
        "--set",
        "t_end=2.0",
        "--set",
        "dt=0.01",
        "--set",
        "record_every=10",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("trajectory.csv").exists());
}
