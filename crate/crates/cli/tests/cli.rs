//! End-to-end tests of the `wavecor` binary on a small, fast scene.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_wavecor")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawning the pipeline binary")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A scene small enough for the whole pipeline to run in seconds.
const SMALL_SCENE: &str = r#"
seed = 7

[array]
n_elements = 24
pitch_mm = 0.3
center_frequency_mhz = 5.0

[grid]
width_mm = 12.0
depth_mm = 14.0
spacing_mm = 0.1

[phantom]
background = "water"
speckle_per_cm2 = 400.0
jitter_fraction = 0.0

[[phantom.layers]]
material = "fat"
thickness_mm = 3.0

[[phantom.pins]]
x_mm = 0.0
z_mm = 8.0
reflectivity = 30.0

[[phantom.lesions]]
x_mm = 2.0
z_mm = 10.0
radius_mm = 1.5
echogenicity = 0.0

[simulate]
fs_mhz = 40.0
duration_us = 30.0
angles_deg = [-6.0, 0.0, 6.0]
pulse_cycles = 2

[beamform]
band_fraction = 0.8

[beamform.image]
width_mm = 8.0
z_start_mm = 5.0
z_end_mm = 12.0
lateral_spacing_mm = 0.1
axial_spacing_mm = 0.05
"#;

fn write_small_scene(dir: &Path) -> String {
    let path = dir.join("scene.toml");
    std::fs::write(&path, SMALL_SCENE).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn repro_runs_the_whole_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_small_scene(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run(&["repro", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_ok(&out);
    for name in [
        "spec.toml",
        "medium.bin",
        "scatterers.csv",
        "channel.bin",
        "image_wci.f64",
        "image_wci.txt",
        "image_wci.pgm",
        "image_hwci.f64",
        "image_hwci.txt",
        "image_hwci.pgm",
        "image_wci_metrics.csv",
        "image_hwci_metrics.csv",
        "comparison.csv",
    ] {
        assert!(out_dir.join(name).exists(), "missing artifact {name}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fwhm"), "summary block missing fwhm:\n{stdout}");
    assert!(stdout.contains("gcnr"), "summary block missing gcnr:\n{stdout}");
}

#[test]
fn phantom_stage_is_seeded_and_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_small_scene(tmp.path());
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let out = run(&[
            "phantom",
            "--config",
            &cfg,
            "--out-dir",
            dir.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_ok(&out);
    }
    for name in ["medium.bin", "scatterers.csv"] {
        let bytes_a = std::fs::read(a.join(name)).unwrap();
        let bytes_b = std::fs::read(b.join(name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs across identical runs");
    }
    let scat_a = std::fs::read(a.join("scatterers.csv")).unwrap();
    let scat_c = std::fs::read(c.join("scatterers.csv")).unwrap();
    assert_ne!(scat_a, scat_c, "different seeds gave identical scatterers");
}

#[test]
fn phantom_layers_flag_overrides_the_stack() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("scene.toml");
    // 3% per-region jitter over a single liver layer filling the grid.
    std::fs::write(
        &cfg_path,
        "[grid]\nwidth_mm = 8.0\ndepth_mm = 10.0\nspacing_mm = 0.1\n\
         [phantom]\nspeckle_per_cm2 = 0.0\njitter_fraction = 0.03\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "phantom",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--layers",
        "liver:10mm",
    ]);
    assert_ok(&out);
    let medium: wavecor::MediumMap64 = wavecor::io::read_medium(out_dir.join("medium.bin")).unwrap();
    let liver_c = wavecor::synth::Material::<f64>::liver().c;
    let first = medium.c()[(0, 0)];
    assert!(
        (first / liver_c - 1.0).abs() <= 0.031,
        "liver speed {first} outside 3% of {liver_c}"
    );
    for &v in medium.c() {
        assert_eq!(v, first, "single-layer medium should be one region value");
    }
}

#[test]
fn hwci_without_medium_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_small_scene(tmp.path());
    let out_dir = tmp.path().join("out");
    let dir = out_dir.to_str().unwrap();
    assert_ok(&run(&["phantom", "--config", &cfg, "--out-dir", dir]));
    assert_ok(&run(&["simulate", "--config", &cfg, "--out-dir", dir]));
    std::fs::remove_file(out_dir.join("medium.bin")).unwrap();

    let out = run(&["beamform", "--config", &cfg, "--out-dir", dir, "--mode", "hwci"]);
    assert_eq!(out.status.code(), Some(2), "expected usage exit code 2");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("medium"), "unhelpful error: {stderr}");

    // The homogeneous mode needs no medium map at all.
    let out = run(&["beamform", "--config", &cfg, "--out-dir", dir, "--mode", "wci"]);
    assert_ok(&out);
}

#[test]
fn modes_agree_bitwise_on_a_homogeneous_medium() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("scene.toml");
    // Same small scene but with the fat layer swapped for more water: every
    // region then shares the background speed and the medium map is constant.
    let uniform = SMALL_SCENE.replacen("material = \"fat\"", "material = \"water\"", 1);
    assert_ne!(uniform, SMALL_SCENE);
    std::fs::write(&cfg_path, uniform).unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let out_dir = tmp.path().join("out");
    let dir = out_dir.to_str().unwrap();
    assert_ok(&run(&["phantom", "--config", cfg, "--out-dir", dir]));
    assert_ok(&run(&["simulate", "--config", cfg, "--out-dir", dir]));
    assert_ok(&run(&["beamform", "--config", cfg, "--out-dir", dir, "--mode", "wci"]));
    assert_ok(&run(&["beamform", "--config", cfg, "--out-dir", dir, "--mode", "hwci"]));
    let wci = std::fs::read(out_dir.join("image_wci.f64")).unwrap();
    let hwci = std::fs::read(out_dir.join("image_hwci.f64")).unwrap();
    assert_eq!(wci, hwci, "constant-speed map must reduce hwci to wci");
}

#[test]
fn bad_band_fraction_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_small_scene(tmp.path());
    let out = run(&[
        "beamform",
        "--config",
        &cfg,
        "--out-dir",
        tmp.path().join("out").to_str().unwrap(),
        "--band-fraction",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_rejects_mismatched_region_lists() {
    use wavecor::metrics::MetricReport;
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    let report = MetricReport { fwhm_m: Some(0.5e-3), ..MetricReport::<f64>::default() };
    wavecor::io::write_metrics_csv(&a, &[("pin_8mm".to_string(), report)]).unwrap();
    wavecor::io::write_metrics_csv(&b, &[("pin_9mm".to_string(), report)]).unwrap();
    let out = run(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("differ"), "unhelpful error: {stderr}");
}

#[test]
fn beamform_is_byte_identical_across_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_small_scene(tmp.path());
    let out_dir = tmp.path().join("out");
    let dir = out_dir.to_str().unwrap();
    assert_ok(&run(&["phantom", "--config", &cfg, "--out-dir", dir]));
    assert_ok(&run(&["simulate", "--config", &cfg, "--out-dir", dir]));
    assert_ok(&run(&["beamform", "--config", &cfg, "--out-dir", dir, "--mode", "hwci"]));
    let first = std::fs::read(out_dir.join("image_hwci.f64")).unwrap();
    assert_ok(&run(&["beamform", "--config", &cfg, "--out-dir", dir, "--mode", "hwci"]));
    let second = std::fs::read(out_dir.join("image_hwci.f64")).unwrap();
    assert_eq!(first, second);
}
