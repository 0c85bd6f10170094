//! End-to-end checks of the binary: exit codes, output schemas, and
//! manifest-level determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tendefl"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn tmp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("tendefl_cli_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn deflate_smoke_and_headers() {
    let dir = tmp_dir("deflate");
    let status = bin()
        .args(["deflate", "--out"])
        .arg(&dir)
        .args([
            "--set", "p=25", "--set", "beta1=8", "--set", "beta2=5", "--set", "alpha=0.3",
            "--set", "seeds=2", "--jobs", "2",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let runs = read(&dir.join("runs.csv"));
    assert!(runs.starts_with(
        "seed,gamma,lambda1,lambda2,kappa,eta,rho11,rho12,theta21,theta22,rho21,rho22,mode_spread\n"
    ));
    let summary = read(&dir.join("summary.csv"));
    assert!(summary.starts_with("quantity,mean,std\n"));
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn single_seed_run_emits_json_trace() {
    let dir = tmp_dir("json");
    let status = bin()
        .args(["deflate", "--out"])
        .arg(&dir)
        .args([
            "--set", "p=20", "--set", "beta1=7", "--set", "beta2=4", "--set", "alpha=0.2",
            "--set", "seeds=1",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value = serde_json::from_str(&read(&dir.join("run.json"))).unwrap();
    for key in ["model", "gamma", "lambda1", "lambda2", "kappa", "eta", "alignments"] {
        assert!(doc.get(key).is_some(), "missing key {key}");
    }
    assert!(doc["alignments"].get("u1_x").is_some());
}

#[test]
fn unknown_config_key_is_exit_code_two() {
    let dir = tmp_dir("badkey");
    let status = bin()
        .args(["deflate", "--out"])
        .arg(&dir)
        .args(["--set", "nonsense=3"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn config_file_parsing_and_override() {
    let dir = tmp_dir("cfgfile");
    let cfg_path = dir.join("run.cfg");
    std::fs::write(&cfg_path, "p = 20\nbeta1 = 7 # inline comment\nbeta2 = 4\nalpha = 0.2\nseeds = 1\n").unwrap();
    let status = bin()
        .args(["deflate", "--config"])
        .arg(&cfg_path)
        .args(["--out"])
        .arg(&dir)
        .args(["--set", "seeds=2"]) // override wins
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&dir.join("manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["seeds"], "2");
    let runs = read(&dir.join("runs.csv"));
    assert_eq!(runs.lines().count(), 3, "header plus two seeds");
}

#[test]
fn broken_config_file_is_exit_code_two() {
    let dir = tmp_dir("brokencfg");
    let cfg_path = dir.join("run.cfg");
    std::fs::write(&cfg_path, "this is not a key value line\n").unwrap();
    let status = bin()
        .args(["deflate", "--config"])
        .arg(&cfg_path)
        .args(["--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn estimate_refuses_inside_bulk_with_exit_code_three() {
    let dir = tmp_dir("refuse");
    let out = bin()
        .args(["estimate", "--out"])
        .arg(&dir)
        .args([
            "--set", "mode=observables", "--set", "lambda1=1.2", "--set", "lambda2=4",
            "--set", "eta=0.5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bulk"), "diagnostic should name the bulk: {err}");
}

#[test]
fn manifest_determinism_byte_identical_csv() {
    let args = [
        "--set", "p=20", "--set", "beta1=7", "--set", "beta2=4", "--set", "alpha=0.2",
        "--set", "seeds=3", "--set", "seed=11",
    ];
    let d1 = tmp_dir("det1");
    let d2 = tmp_dir("det2");
    for d in [&d1, &d2] {
        let status = bin().args(["deflate", "--out"]).arg(d).args(args).status().unwrap();
        assert!(status.success());
    }
    assert_eq!(read(&d1.join("runs.csv")), read(&d2.join("runs.csv")));
    assert_eq!(read(&d1.join("summary.csv")), read(&d2.join("summary.csv")));
    let m1: serde_json::Value = serde_json::from_str(&read(&d1.join("manifest.json"))).unwrap();
    let m2: serde_json::Value = serde_json::from_str(&read(&d2.join("manifest.json"))).unwrap();
    assert_eq!(m1["outputs"], m2["outputs"], "output digests must match");
    assert_eq!(m1["seeds"], m2["seeds"]);
}

#[test]
fn solve_gamma_sweep_residual_column() {
    let dir = tmp_dir("solve");
    let status = bin()
        .args(["solve", "--out"])
        .arg(&dir)
        .args([
            "--set", "kind=gamma", "--set", "beta1=10", "--set", "beta2=8", "--set",
            "alpha=0.6", "--set", "gamma_step=0.25", "--set", "p=60",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let sweep = read(&dir.join("sweep.csv"));
    let mut lines = sweep.lines();
    let header = lines.next().unwrap();
    let res_idx = header.split(',').position(|c| c == "second_residual").unwrap();
    let status_idx = header.split(',').position(|c| c == "status").unwrap();
    let mut checked = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[status_idx] == "ok" {
            let res: f64 = fields[res_idx].parse().unwrap();
            assert!(res < 1e-9, "residual column must stay below 1e-9: {res}");
            checked += 1;
        }
    }
    assert!(checked >= 3, "expected several solved rows, got {checked}");
}

#[test]
fn spectrum_emits_svg_when_asked() {
    let dir = tmp_dir("svg");
    let status = bin()
        .args(["spectrum", "--out"])
        .arg(&dir)
        .args([
            "--svg", "--set", "p=25", "--set", "beta1=10", "--set", "beta2=7", "--set",
            "alpha=0.4", "--set", "bins=12",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let svg = read(&dir.join("histogram.svg"));
    assert!(svg.starts_with("<svg"));
    let hist = read(&dir.join("histogram.csv"));
    assert!(hist.starts_with("bin_center,density\n"));
    let dens = read(&dir.join("density.csv"));
    assert!(dens.starts_with("x,density\n"));
}

#[test]
fn unknown_figure_is_exit_code_two() {
    let dir = tmp_dir("figbad");
    let status = bin()
        .args(["figure", "fig42", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
