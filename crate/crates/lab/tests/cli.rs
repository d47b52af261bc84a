use std::fs;
use std::path::Path;
use std::process::Command;

use degen_lab::{run, ExperimentConfig, ExperimentKind, LabError};

const BIN: &str = env!("CARGO_BIN_EXE_degen-lab");

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn spectrum_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("domain = \"interval\"\nalpha = 0.5\nn = 512\ngrading = 2.0\nmodes = 5\n");
    let s = run(ExperimentKind::Spectrum, &c, dir.path()).unwrap();
    assert!(s.passed);
    let csv = fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2 + 5);
    assert!(lines[0].starts_with("# alpha=0.5,T=1,n=512,g=2,"));
    assert_eq!(lines[1], "index,lambda,rayleigh,poincare_ratio");
    let lambda1: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((lambda1 - 4.7390664).abs() < 1e-2);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn misaligned_deltas_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("alpha = 0.5\nn = 64\ndeltas = [0.2, 0.1, 0.05]\n");
    let err = run(ExperimentKind::DeltaSweep, &c, dir.path()).unwrap_err();
    assert!(matches!(err, LabError::Config { field: "deltas", .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn runs_are_byte_identical() {
    let text = "alpha = 0.5\nn = 40\nsteps = 64\ndelta = 0.1\nmodes = 3\nsamples = 2\nseed = 4\n\
                deltas = [0.2, 0.1, 0.05]\n";
    let c = config(text);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(ExperimentKind::FullReport, &c, a.path()).unwrap();
    run(ExperimentKind::FullReport, &c, b.path()).unwrap();
    let (fa, fb) = (read_dir_sorted(a.path()), read_dir_sorted(b.path()));
    assert!(fa.len() > 10);
    assert_eq!(fa, fb);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(&good, "experiment = \"hardy\"\nalpha = 0.75\nn = 64\ngrading = 2.0\nsamples = 10\n").unwrap();
    let status = |args: &[&str]| Command::new(BIN).args(args).output().unwrap();

    let out1 = dir.path().join("o1");
    let o = status(&["hardy", "--config", good.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS hardy/hardy"));

    let out2 = dir.path().join("o2");
    let o = status(&["hardy", "--config", good.to_str().unwrap(), "--out", out2.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_dir_sorted(&out1), read_dir_sorted(&out2));

    // config names a different experiment
    let o = status(&["spectrum", "--config", good.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "alpha = 1.5\n").unwrap();
    let o = status(&["spectrum", "--config", bad.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));

    let o = status(&["spectrum", "--config", "/nonexistent.toml"]);
    assert_eq!(o.status.code(), Some(2));
}
