use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use asip_lab::manifest::RunManifest;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn asip(args: &[&str], dir: &Path, workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_asip"));
    cmd.args(args).arg("--output-dir").arg(dir);
    match workers {
        Some(w) => cmd.env("ASIP_WORKERS", w),
        None => cmd.env_remove("ASIP_WORKERS"),
    };
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn error_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn moments_on_geometric_profile_prints_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("geometric_moments.toml");
    let out = asip(&["moments", "--config", cfg.to_str().unwrap()], dir.path(), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l == "M=2.000000"), "{stdout}");
    let m = RunManifest::read(&dir.path().join("moments.manifest.json")).unwrap();
    assert!((m.values["M_p"].as_f64().unwrap() - 2.0).abs() <= 1e-6);
    assert_eq!(m.seed, 1);
    assert!(!m.seed_defaulted);
}

#[test]
fn couple_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("smoke.toml");
    let args = ["couple", "--config", cfg.to_str().unwrap()];
    assert!(asip(&args, a.path(), None).status.success());
    assert!(asip(&args, b.path(), None).status.success());
    for f in ["couple_runs.csv", "couple_discrepancy.csv", "couple_levels.csv", "couple_path.csv", "couple.manifest.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    let head = std::fs::read_to_string(a.path().join("couple_path.csv")).unwrap();
    assert!(head.starts_with("# asip couple_path v1\ni,x,z\n"));
}

#[test]
fn rates_with_nine_runs_is_an_insufficient_runs_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "output_dir = \"x\"\ngamma = 0.25\np = 2.8\n[coupling]\nl_max = 4\nreps = 9\nsigma2 = 0.386\n",
    );
    let out = asip(&["rates", "--config", cfg.to_str().unwrap()], dir.path(), None);
    let e = error_json(&out);
    assert_eq!(e["error"]["kind"], "insufficient_runs");
    assert_eq!(e["error"]["got"], 9);
}

#[test]
fn invalid_config_reports_the_violated_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "output_dir = \"x\"\ngamma = 0.4\np = 2.6\n");
    let e = error_json(&asip(&["moments", "--config", cfg.to_str().unwrap()], dir.path(), None));
    assert_eq!(e["error"]["kind"], "invalid_config");
    let rules: Vec<&str> = e["error"]["violations"].as_array().unwrap().iter().map(|v| v["rule"].as_str().unwrap()).collect();
    assert!(rules.contains(&"p ≤ 1/γ"), "{rules:?}");

    let cfg = write_config(dir.path(), "output_dir = \"x\"\np = 2.6\ngamma 0.2\n");
    let e = error_json(&asip(&["moments", "--config", cfg.to_str().unwrap()], dir.path(), None));
    assert_eq!(e["error"]["kind"], "parse");
    assert_eq!(e["error"]["line"], 3);
}

#[test]
fn bad_worker_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("geometric_moments.toml");
    let e = error_json(&asip(&["moments", "--config", cfg.to_str().unwrap()], dir.path(), Some("zero")));
    assert_eq!(e["error"]["kind"], "format");
}

#[test]
fn report_collects_every_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("smoke.toml");
    let cfg = cfg.to_str().unwrap();
    for c in ["density", "simulate", "moments", "report"] {
        let out = asip(&[c, "--config", cfg], dir.path(), None);
        assert!(out.status.success(), "{c}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    for c in ["density", "simulate", "moments"] {
        let m = &report[c];
        assert_eq!(m["command"], c);
        // every artifact named in a manifest exists with the recorded digest
        for a in m["artifacts"].as_array().unwrap() {
            let bytes = std::fs::read(dir.path().join(a["file"].as_str().unwrap())).unwrap();
            assert_eq!(asip_lab::manifest::sha256_hex(&bytes), a["sha256"].as_str().unwrap());
        }
    }
    assert_eq!(report["density"]["verdicts"]["residual_within_tol"], true);
    assert!(report["density"]["values"]["ulam_residual"].as_f64().unwrap() <= 1e-8);
    let density = asip_lab::io::read_density(&dir.path().join("density.bin")).unwrap();
    assert_eq!(density.bins(), 4096);
}
