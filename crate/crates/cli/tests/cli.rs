use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn otto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otto-ldf"))
        .args(args)
        .env_remove("OTTO_LDF_OUT")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn prints_resolved_config_with_layers() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("run.toml");
    fs::write(&file, "[harmonic]\nq_star = 1.5\n[run]\nseed = 7\n").unwrap();
    let out = otto(&[
        "config",
        "--preset",
        "fig-s2a",
        "-c",
        file.to_str().unwrap(),
        "--set",
        "run.seed=9",
        "--seed",
        "11",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let value: toml::Table = text.parse().unwrap();
    assert_eq!(value["two_level"]["enabled"].as_bool(), Some(false));
    assert_eq!(value["harmonic"]["q_star"].as_float(), Some(1.5));
    assert_eq!(value["run"]["seed"].as_integer(), Some(11));
}

#[test]
fn config_errors_exit_2_with_line() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("bad.toml");
    fs::write(&file, "[baths]\nbeta_c = 3.0\n\n[ldf]\neta_min = 1.0\neta_max = 0.5\n").unwrap();
    let out = otto(&["ldf", "-c", file.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("line 6") && msg.contains("ldf.eta_max"), "{msg}");

    fs::write(&file, "[two_level]\nnu_taw = 2.0\n").unwrap();
    let out = otto(&["config", "-c", file.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let out = otto(&["config", "--set", "baths.beta_h"]);
    assert_eq!(code(&out), 2);

    // hot bath colder than the cold bath
    let out = otto(&["config", "--set", "baths.beta_h=5"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn linear_regime_rejected_for_sampling() {
    let dir = TempDir::new().unwrap();
    let out = otto(&["sample", "--regime", "linear", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("run.regime"));
}

#[test]
fn truncation_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let out = otto(&[
        "pearson",
        "--set",
        "two_level.enabled=false",
        "--set",
        "harmonic.levels=8",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = |dir: &TempDir| {
        vec![
            "sample".to_string(),
            "--set".into(),
            "sample.s=[5]".into(),
            "--set".into(),
            "sample.blocks=2000".into(),
            "--seed".into(),
            "42".into(),
            "-o".into(),
            dir.path().to_str().unwrap().into(),
        ]
    };
    for dir in [&a, &b] {
        let argv = args(dir);
        let out = otto(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 5);
    for name in names {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
    let hist = fs::read_to_string(a.path().join("sample_two_level_s5_hist.csv")).unwrap();
    assert!(hist.starts_with("# otto-ldf "));
    assert!(hist.contains("seed = 42"));
}

#[test]
fn adiabatic_blocks_share_one_bin() {
    let dir = TempDir::new().unwrap();
    let out = otto(&[
        "sample",
        "--regime",
        "adiabatic",
        "--set",
        "sample.s=[20]",
        "--set",
        "sample.blocks=3000",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for (engine, eta_th) in [("two_level", 0.5), ("harmonic", 0.5)] {
        let rows = data_rows(&dir.path().join(format!("sample_{engine}_s20_hist.csv")));
        let filled: Vec<_> = rows.iter().filter(|r| r[1] != "0").collect();
        assert_eq!(filled.len(), 1, "{engine}: {filled:?}");
        let center: f64 = filled[0][0].parse().unwrap();
        assert!((center - eta_th).abs() < 0.01, "{engine}: {center}");
    }
}

#[test]
fn contour_marks_undefined_region() {
    let dir = TempDir::new().unwrap();
    let out = otto(&[
        "contour",
        "--set",
        "contour.points1=41",
        "--set",
        "contour.points2=41",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("contour_harmonic_exact.json")).unwrap()).unwrap();
    let mask = doc["mask"].as_array().unwrap();
    let masked = mask.iter().flat_map(|r| r.as_array().unwrap()).filter(|v| v.as_bool() == Some(true)).count();
    assert!(masked > 0 && masked < 41 * 41, "{masked}");
    for (phi_row, mask_row) in doc["phi"].as_array().unwrap().iter().zip(mask) {
        for (phi, m) in phi_row.as_array().unwrap().iter().zip(mask_row.as_array().unwrap()) {
            assert_eq!(phi.is_null(), m.as_bool().unwrap());
        }
    }
    assert_eq!(doc["degenerate"], false);
    assert!(doc["config"]["contour"]["points1"] == 41);

    let tl: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("contour_two_level_exact.json")).unwrap()).unwrap();
    assert!(tl["phi"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).all(|v| v.is_f64()));
}

#[test]
fn adiabatic_contour_is_degenerate() {
    let dir = TempDir::new().unwrap();
    let out = otto(&[
        "contour",
        "--preset",
        "fig3b",
        "--set",
        "contour.points1=11",
        "--set",
        "contour.points2=11",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("contour_two_level_adiabatic.json")).unwrap()).unwrap();
    assert_eq!(doc["degenerate"], true);
}

#[test]
fn linear_ldf_writes_both_curves_and_verifies() {
    let dir = TempDir::new().unwrap();
    let out = otto(&[
        "ldf",
        "--preset",
        "fig-s1a",
        "--set",
        "ldf.eta_points=41",
        "--verify",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let exact = data_rows(&dir.path().join("ldf_two_level_exact.csv"));
    let linear = data_rows(&dir.path().join("ldf_two_level_linear.csv"));
    assert_eq!(exact.len(), 41);
    assert_eq!(linear.len(), 41);
    assert!(dir.path().join("plot_ldf.py").exists());
    assert!(stderr(&out).contains("verify two_level"));
}

#[test]
fn pearson_sweep_starts_perfectly_anticorrelated() {
    let dir = TempDir::new().unwrap();
    let out = otto(&["pearson", "--set", "harmonic.sweep_points=3", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = data_rows(&dir.path().join("pearson_harmonic.csv"));
    assert_eq!(rows.len(), 3);
    let rho: f64 = rows[0][1].parse().unwrap();
    assert!((rho + 1.0).abs() < 1e-12, "{rho}");
    let tl = data_rows(&dir.path().join("pearson_two_level.csv"));
    let last: f64 = tl.last().unwrap()[1].parse().unwrap();
    assert!((last + 1.0).abs() < 1e-12, "{last}");
}
