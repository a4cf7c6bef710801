use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_presstopo"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Shipped arch config shrunk to a coarse mesh.
fn small_config(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(shipped("arch-2mat.toml"))
        .unwrap()
        .replace("nex = 200", "nex = 16")
        .replace("ney = 100", "ney = 8");
    let path = dir.join("small.toml");
    fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn validate_accepts_every_shipped_config() {
    for name in ["arch-2mat.toml", "arch-3mat.toml", "piston-2mat.toml", "piston-3mat.toml"] {
        let out = bin().args(["validate", "--config"]).arg(shipped(name)).output().unwrap();
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));
    }
}

#[test]
fn run_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out_dir)
        .args(["--max-iters", "4", "--write-vtk", "--write-svg", "--log-every", "2"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["convergence.csv", "design.csv", "final.vtk", "final.svg"] {
        let meta = fs::metadata(out_dir.join(f)).unwrap();
        assert!(meta.len() > 0, "{f} is empty");
    }
    let csv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("iter    2") && stdout.contains("iter    4"));

    // restart from the written design
    let again = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(tmp.path().join("again"))
        .args(["--max-iters", "1", "--initial-design"])
        .arg(out_dir.join("design.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&again), 0, "{}", String::from_utf8_lossy(&again.stderr));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = bin()
        .args(["validate", "--config"])
        .arg(tmp.path().join("nope.toml"))
        .output()
        .unwrap();
    assert_eq!(code(&missing), 2);

    let bad = tmp.path().join("bad.toml");
    let text = fs::read_to_string(shipped("arch-2mat.toml"))
        .unwrap()
        .replace("fractions = [0.1, 0.1]", "fractions = [0.7, 0.6]");
    fs::write(&bad, text).unwrap();
    let out = bin().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(&bad, "this is not toml [").unwrap();
    let out = bin().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(code(&out), 2);

    let cfg = small_config(tmp.path());
    let out = bin()
        .args(["gradient-check", "--config"])
        .arg(&cfg)
        .args(["--elements", "12by8"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_supports_is_a_solver_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(small_config(tmp.path())).unwrap();
    // supports hold y only, so the structure can slide sideways
    let text = text.replace("fix = \"xy\"", "fix = \"y\"");
    let path = tmp.path().join("floating.toml");
    fs::write(&path, text).unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--output-dir")
        .arg(tmp.path().join("out"))
        .args(["--max-iters", "2"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("translation-x"));
}

#[test]
fn gradient_check_passes_on_coarse_arch() {
    let out = bin()
        .args(["gradient-check", "--config"])
        .arg(shipped("arch-2mat.toml"))
        .args(["--elements", "12x8", "--samples", "40"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max relative error"));
}
