use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn adaptconv(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptconv"))
        .args(args)
        .args(["--out-dir", out_dir.to_str().unwrap()])
        .env_remove("ADAPTCONV_OUT_DIR")
        .output()
        .unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn significant_digits(field: &str) -> usize {
    let mantissa = field.split(['e', 'E']).next().unwrap();
    mantissa.chars().filter(char::is_ascii_digit).count()
}

#[test]
fn reruns_write_identical_csv_bytes() {
    for (scenario, files) in [
        ("vkde-demo", &["vkde_demo_samples.csv", "vkde_demo_density.csv", "vkde_demo_iterations.csv"][..]),
        ("smooth1d", &["smooth1d.csv"][..]),
    ] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert_eq!(adaptconv(&[scenario, "--seed", "11"], a.path()).status.code(), Some(0), "{scenario}");
        assert_eq!(adaptconv(&[scenario, "--seed", "11"], b.path()).status.code(), Some(0), "{scenario}");
        for f in files {
            let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
            assert!(!x.is_empty());
            assert_eq!(x, y, "{f}");
        }
    }
}

#[test]
fn csv_has_header_and_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(adaptconv(&["threegauss"], dir.path()).status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("threegauss_fields.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.split(',').all(|h| h.chars().next().unwrap().is_ascii_alphabetic()), "{header}");
    let columns = header.split(',').count();
    for line in lines.take(50) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), columns);
        for f in fields {
            f.parse::<f64>().unwrap();
            assert!(f.contains('e'), "{f}");
            assert!(significant_digits(f) >= 12, "{f}");
        }
    }
}

#[test]
fn report_is_written_and_printed() {
    let dir = tempfile::tempdir().unwrap();
    let out = adaptconv(&["phasespace"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let printed = report(&out);
    let written: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("phasespace_report.json")).unwrap()).unwrap();
    assert_eq!(printed, written);
    assert_eq!(printed["scenario"], "phasespace");
    for key in ["checks", "wall_ms", "version"] {
        assert!(printed.get(key).is_some(), "{key}");
    }
    for c in printed["checks"].as_array().unwrap() {
        assert!(c["name"].is_string() && c["value"].is_number() && c["tol"].is_number() && c["pass"].is_boolean());
    }
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_adaptconv"))
        .arg("smooth1d")
        .env("ADAPTCONV_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("smooth1d.csv").exists());
}

#[test]
fn config_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "sigma = 1.0\nthis line is not a setting\n").unwrap();
    let cfg = bad.to_str().unwrap();
    assert_eq!(adaptconv(&["smooth1d", "--config", cfg], dir.path()).status.code(), Some(2));

    fs::write(&bad, "sigma = -3\n").unwrap();
    assert_eq!(adaptconv(&["smooth1d", "--config", cfg], dir.path()).status.code(), Some(2));

    let missing = dir.path().join("missing.conf");
    assert_eq!(adaptconv(&["smooth1d", "--config", missing.to_str().unwrap()], dir.path()).status.code(), Some(2));
    assert_eq!(adaptconv(&["smooth2d"], dir.path()).status.code(), Some(2));
    assert_eq!(adaptconv(&["smooth1d", "--lambda", "1.5"], dir.path()).status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# smoothing\nsigma = 0.7\nseed = 5\n").unwrap();
    let out = adaptconv(&["smooth1d", "--config", conf.to_str().unwrap(), "--sigma", "0.3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let params = &report(&out)["params"];
    assert_eq!(params["sigma"].as_str().unwrap().parse::<f64>().unwrap(), 0.3);
    assert_eq!(params["seed"].as_str().unwrap(), "5");
}

#[test]
fn default_verify_lists_enough_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = adaptconv(&["verify"], dir.path());
    let r = report(&out);
    let checks = r["checks"].as_array().unwrap();
    assert!(checks.len() >= 25, "{}", checks.len());
    let all_pass = checks.iter().all(|c| c["pass"].as_bool().unwrap());
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 1 }));
    assert!(dir.path().join("verify_report.json").exists());
}
