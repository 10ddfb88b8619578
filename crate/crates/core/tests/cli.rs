//! End-to-end runs of the `specrec` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn specrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specrec")).args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path) -> (PathBuf, PathBuf) {
    let d = s(dir);
    let mask = specrec(&["mask-gen", "--width", "64", "--height", "64", "--seed", "1", "--density", "0.5", "--out-dir", &d]);
    assert_eq!(mask.status.code(), Some(0), "{}", stderr(&mask));
    let mask_path = dir.join("mask.srec");
    let sim = specrec(&["simulate", "--cube", &fixture("scene64x64x8.srec"), "--mask", &s(&mask_path), "--shear-step", "1", "--out-dir", &d]);
    assert_eq!(sim.status.code(), Some(0), "{}", stderr(&sim));
    (mask_path, dir.join("measurement.srec"))
}

#[test]
fn simulate_reconstruct_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let d = s(tmp.path());
    let (mask, y) = simulate(tmp.path());
    let rec = specrec(&[
        "reconstruct", "--measurement", &s(&y), "--mask", &s(&mask), "--bands", "8", "--shear-step", "1",
        "--method", "gaptv", "--outer-iters", "5", "--ground-truth", &fixture("scene64x64x8.srec"), "--out-dir", &d,
    ]);
    assert_eq!(rec.status.code(), Some(0), "{}", stderr(&rec));
    let trace = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6);

    let regions = tmp.path().join("regions.json");
    fs::write(&regions, r#"[{"x0":0,"y0":0,"w":16,"h":16}]"#).unwrap();
    let metrics = specrec(&[
        "metrics", "--truth", &fixture("scene64x64x8.srec"), "--estimate", &s(&tmp.path().join("reconstruction.srec")),
        "--regions", &s(&regions), "--out-dir", &d,
    ]);
    assert_eq!(metrics.status.code(), Some(0), "{}", stderr(&metrics));
    let csv = fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("full,"));
    assert!(rows[2].starts_with("region0,"));
    let psnr: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!(psnr > 15.0, "{psnr}");
}

#[test]
fn csc_without_dictionary_names_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let (mask, y) = simulate(tmp.path());
    let rec = specrec(&[
        "reconstruct", "--measurement", &s(&y), "--mask", &s(&mask), "--bands", "8", "--method", "csc-tv",
        "--out-dir", &s(tmp.path()),
    ]);
    assert_eq!(rec.status.code(), Some(1));
    assert!(stderr(&rec).contains("--dictionary"), "{}", stderr(&rec));
    assert!(!tmp.path().join("reconstruction.srec").exists());
}

#[test]
fn mask_generation_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["a.srec", "b.srec"] {
        let o = specrec(&["mask-gen", "--width", "33", "--height", "17", "--seed", "7", "--density", "0.4", "--name", name, "--out-dir", &s(tmp.path())]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(fs::read(tmp.path().join("a.srec")).unwrap(), fs::read(tmp.path().join("b.srec")).unwrap());
}

#[test]
fn outputs_stay_in_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = specrec(&["mask-gen", "--width", "8", "--height", "8", "--seed", "1", "--name", "../escape.srec", "--out-dir", &s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!tmp.path().join("escape.srec").exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(specrec(&["reconstruct", "--method"]).status.code(), Some(2));
    assert_eq!(specrec(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(specrec(&["--help"]).status.code(), Some(0));
}

#[test]
fn png_directory_feeds_simulate_and_export_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cave = tmp.path().join("cave");
    fs::create_dir(&cave).unwrap();
    for (i, offset) in [0u16, 20000, 40000].iter().enumerate() {
        let samples: Vec<u16> = (0..64u16).map(|p| offset + p * 100).collect();
        specrec::io::write_gray16(cave.join(format!("band_{i}.png")), 8, 8, &samples).unwrap();
    }
    let d = s(tmp.path());
    let o = specrec(&["mask-gen", "--width", "8", "--height", "8", "--seed", "3", "--out-dir", &d]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = specrec(&["simulate", "--cube-dir", &s(&cave), "--mask", &s(&tmp.path().join("mask.srec")), "--out-dir", &d]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(tmp.path().join("measurement.srec").exists());

    let o = specrec(&["export", "--image", &s(&tmp.path().join("measurement.srec")), "--name", "y.png", "--out-dir", &d]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (w, h, _) = specrec::io::read_gray16(tmp.path().join("y.png")).unwrap();
    assert_eq!((w, h), (8, 8));

    // export every band of a cube and read it back through the PNG loader
    let cube = specrec::io::load_cube_dir(&cave).unwrap();
    specrec::io::save_cube(&cube, tmp.path().join("cube.srec")).unwrap();
    let bands = tmp.path().join("bands");
    let o = specrec(&["export", "--cube", &s(&tmp.path().join("cube.srec")), "--out-dir", &s(&bands)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let back = specrec::io::load_cube_dir(&bands).unwrap();
    assert_eq!(back.data(), cube.data());

    let o = specrec(&["export", "--cube", &s(&tmp.path().join("cube.srec")), "--rgb", "2,1,0", "--name", "rgb.png", "--out-dir", &d]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(tmp.path().join("rgb.png").exists());
}
