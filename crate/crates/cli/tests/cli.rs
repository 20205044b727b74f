use std::path::Path;
use std::process::{Command, Output};

use mars_core::io::{read_cube, RunManifest};

fn mars(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mars"))
        .args(args)
        .output()
        .unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn resolution_prints_table_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = mars(&[
        "resolution",
        "--preset",
        "table1_car",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("ΔR = 1.22 m"), "{text}");
    assert!(text.contains("Δv = 0.24 m/s"), "{text}");
    assert!(
        text.contains("Δsinψx = 0.250 (no VA), 0.125 (VA)"),
        "{text}"
    );
    assert!(dir.path().join("resolution.csv").exists());
    let m = RunManifest::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.command, "resolution");
    assert_eq!(m.outputs.len(), 1);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(mars(&["resolution"]).status.code(), Some(2));
    assert_eq!(mars(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        mars(&["montecarlo", "--preset", "desk_small", "--scale", "huge"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert_eq!(
        mars(&["resolution", "--preset", "nope", "--out", &out])
            .status
            .code(),
        Some(3)
    );
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\n[radio]\ncarrier_freq_hz = -5.0\n").unwrap();
    let o = mars(&[
        "resolution",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stderr).unwrap().contains("error:"));
}

#[test]
fn waveform_writes_schedule_and_overhead() {
    let dir = tempfile::tempdir().unwrap();
    let o = mars(&[
        "waveform",
        "--preset",
        "desk_small",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success());
    for f in [
        "schedule.toml",
        "symbols.csv",
        "overhead.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn simulate_dumps_cube_with_scene_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let o = mars(&[
        "simulate",
        "--preset",
        "desk_small",
        "--targets",
        "2",
        "--dump-cube",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cube = read_cube(&dir.path().join("cube.bin")).unwrap();
    assert_eq!(cube.rx_count(), 16);
    assert_eq!(cube.chirp_occasions(), 3);
    assert_eq!(cube.samples, 512);
    assert_eq!(cube.slots(), 4);
    assert_eq!(cube.tone_count(), 61);
    let targets = std::fs::read_to_string(dir.path().join("targets.csv")).unwrap();
    assert_eq!(targets.lines().count(), 3);
    let est = std::fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 3);
}

#[test]
fn montecarlo_desk_scale_caps_drops() {
    let dir = tempfile::tempdir().unwrap();
    let o = mars(&[
        "montecarlo",
        "--preset",
        "desk_small",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let drops = std::fs::read_to_string(dir.path().join("drops.csv")).unwrap();
    // 3 pipelines × 20 drops × 1 target, plus the header
    assert_eq!(drops.lines().count(), 61);
    let curves = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(
        curves.lines().next().unwrap(),
        "sweep_value,pipeline,metric,value,ci95,drops,targets"
    );
    assert_eq!(curves.lines().count(), 1 + 3 * 5);
}

#[test]
fn replay_of_single_drop_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let o = mars(&[
        "montecarlo",
        "--preset",
        "desk_small",
        "--drop",
        "5",
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = dir.path().join("manifest.json");
    let r = mars(&["replay", "--manifest", manifest.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("identical curves.csv"), "{text}");
    assert!(text.contains("identical drops.csv"), "{text}");
    assert!(!text.contains("DIFFERS"));
}

#[test]
fn replay_detects_tampered_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert!(mars(&["waveform", "--preset", "desk_small", "--out", &out])
        .status
        .success());
    let manifest = dir.path().join("manifest.json");
    let mut m = RunManifest::load(&manifest).unwrap();
    m.outputs[0].sha256 = "0".repeat(64);
    m.save(&manifest).unwrap();
    let r = mars(&["replay", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(4));
    assert!(String::from_utf8(r.stdout).unwrap().contains("DIFFERS"));
}

#[test]
fn table1_car_cube_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = mars(&[
        "simulate",
        "--preset",
        "table1_car",
        "--targets",
        "1",
        "--dump-cube",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cube = read_cube(&dir.path().join("cube.bin")).unwrap();
    assert_eq!(
        (
            cube.rx_count(),
            cube.chirp_occasions(),
            cube.samples,
            cube.tone_count(),
            cube.slots()
        ),
        (64, 4, 2048, 496, 4)
    );
}
