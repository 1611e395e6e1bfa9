use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hawk_core::format;
use hawk_core::geometry::AngularGrid;
use hawk_core::groundtruth::DepthMap2D;
use hawk_core::imager::{HeatMap3D, RangeAxis};
use serde_json::Value;

fn hawk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hawk"))
        .args(args)
        .env_remove("HAWK_THREADS")
        .output()
        .expect("hawk runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout_json(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{e}: {l}")))
        .collect()
}

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small array so each simulation takes a fraction of a second.
fn write_fast_config(dir: &Path) -> PathBuf {
    let p = dir.join("fast.json");
    std::fs::write(&p, r#"{"array": {"nx": 8, "nz": 8}, "cull_upscale": 1, "seed": 3}"#).unwrap();
    p
}

fn write_scene(dir: &Path, mesh: &Path) -> PathBuf {
    let p = dir.join("car.json");
    let text = format!(
        r#"{{"radar_origin": [0, 0, 1], "ground_height": 0,
            "vehicles": [{{"mesh": {:?}, "x": 0.5, "y": 6.0, "yaw_deg": 60.0, "id": 0}}]}}"#,
        mesh.to_str().unwrap()
    );
    std::fs::write(&p, text).unwrap();
    p
}

fn simulate_into(dir: &Path) -> Output {
    let cfg = write_fast_config(dir);
    let scene = write_scene(dir, &assets().join("meshes/sedan.obj"));
    hawk(&["simulate", "--config", s(&cfg), "--scene", s(&scene), "--out", s(&dir.join("out"))])
}

#[test]
fn help_documents_every_flag() {
    let o = hawk(&["--help"]);
    assert_eq!(code(&o), 0);
    let mut text = String::from_utf8_lossy(&o.stdout).into_owned();
    for sub in ["simulate", "dataset", "metrics", "render", "kfold"] {
        assert!(text.contains(sub), "{sub}");
        let o = hawk(&[sub, "--help"]);
        assert_eq!(code(&o), 0);
        text.push_str(&String::from_utf8_lossy(&o.stdout));
    }
    for flag in ["--config", "--scene", "--out", "--seed", "--threads", "--count", "--k", "--mesh", "HAWK_THREADS"] {
        assert!(text.contains(flag), "{flag} undocumented");
    }
}

#[test]
fn invalid_flags_exit_64() {
    assert_eq!(code(&hawk(&["simulate", "--frobnicate"])), 64);
    assert_eq!(code(&hawk(&["teleport"])), 64);
    assert_eq!(code(&hawk(&[])), 64);
    assert_eq!(code(&hawk(&["kfold", "--manifest", "m.json", "--k", "five"])), 64);
}

#[test]
fn simulate_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate_into(dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    for ext in ["hwke", "hwkd", "ann.json"] {
        assert!(out.join(format!("car.{ext}")).is_file(), "{ext}");
    }
    let summary = &stdout_json(&o)[0];
    assert!(summary["peak_power"].as_f64().unwrap() > 0.0);
    assert!(summary["valid_pixels"].as_u64().unwrap() > 100);
    let h = format::read_heatmap(&out.join("car.hwke")).unwrap();
    assert_eq!((h.grid.n_az, h.grid.n_el, h.range.n), (64, 32, 96));
    let d = format::read_depthmap(&out.join("car.hwkd")).unwrap();
    assert_eq!((d.width(), d.height()), (256, 128));
}

#[test]
fn simulate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&simulate_into(a.path())), 0);
    assert_eq!(code(&simulate_into(b.path())), 0);
    for f in ["car.hwke", "car.hwkd", "car.ann.json"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn nonpositive_bandwidth_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"fmcw": {"bandwidth_hz": -1.0}}"#).unwrap();
    let scene = write_scene(dir.path(), &assets().join("meshes/sedan.obj"));
    let o = hawk(&["simulate", "--config", s(&cfg), "--scene", s(&scene), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("fmcw.bandwidth_hz"), "{}", stderr(&o));

    std::fs::write(&cfg, r#"{"fmcw": {"bandwidth": 1.0}}"#).unwrap();
    let o = hawk(&["simulate", "--config", s(&cfg), "--scene", s(&scene), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2, "unknown keys are a config error");
}

#[test]
fn missing_mesh_exits_1_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_car.obj");
    let scene = write_scene(dir.path(), &missing);
    let o = hawk(&["simulate", "--scene", s(&scene), "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no_such_car.obj"), "{}", stderr(&o));
}

#[test]
fn metrics_scores_truth_radar_and_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_into(dir.path())), 0);
    let out = dir.path().join("out");
    let ann = out.join("car.ann.json");

    let o = hawk(&["metrics", "--candidate", s(&out.join("car.hwkd")), "--annotations", s(&ann)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = &stdout_json(&o)[0];
    assert_eq!(r["pct_surface_missed"].as_f64(), Some(0.0));
    assert_eq!(r["pct_fictitious"].as_f64(), Some(0.0));
    // The box corner overhangs the rounded body by a few centimetres.
    assert!(r["errors"]["range_m"].as_f64().unwrap() < 0.1);
    assert!(r["errors"]["orientation_deg"].as_f64().unwrap() < 0.5);
    assert!(r["errors"]["length_m"].as_f64().unwrap() < 0.15);
    assert!(r["errors"]["height_m"].as_f64().unwrap() < 0.1);

    let cfg = write_fast_config(dir.path());
    let o = hawk(&[
        "metrics",
        "--candidate",
        s(&out.join("car.hwke")),
        "--annotations",
        s(&ann),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = &stdout_json(&o)[0];
    assert!(r["pct_surface_missed"].as_f64().unwrap().is_finite());
    if r["degenerate"] == Value::Bool(false) {
        assert!(r["errors"]["range_m"].as_f64().unwrap().is_finite());
    }

    let bytes = std::fs::read(out.join("car.hwkd")).unwrap();
    let trunc = dir.path().join("trunc.hwkd");
    std::fs::write(&trunc, &bytes[..bytes.len() / 2]).unwrap();
    let o = hawk(&["metrics", "--candidate", s(&trunc), "--annotations", s(&ann)]);
    assert_eq!(code(&o), 1);

    let small = dir.path().join("small.hwkd");
    format::write_depthmap(&small, &DepthMap2D::invalid(AngularGrid::heatmap_default())).unwrap();
    let o = hawk(&["metrics", "--candidate", s(&small), "--annotations", s(&ann)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

fn read_png_luma(p: &Path) -> image::GrayImage {
    image::open(p).unwrap().to_luma8()
}

#[test]
fn render_zero_peak_and_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let range = RangeAxis { min_m: 0.5, max_m: 10.0, n: 96 };
    let mut h = HeatMap3D::zeros(AngularGrid::heatmap_default(), range);
    let zero = dir.path().join("zero.hwke");
    format::write_heatmap(&zero, &h).unwrap();
    let png = dir.path().join("zero.png");
    assert_eq!(code(&hawk(&["render", "--input", s(&zero), "--out", s(&png)])), 0);
    let img = read_png_luma(&png);
    assert_eq!(img.dimensions(), (64, 32));
    assert!(img.pixels().all(|p| p.0 == [0]));

    let i = h.index(20, 10, 40);
    h.data[i] = 1.0;
    let peak = dir.path().join("peak.hwke");
    format::write_heatmap(&peak, &h).unwrap();
    let png = dir.path().join("peak.png");
    assert_eq!(code(&hawk(&["render", "--input", s(&peak), "--out", s(&png)])), 0);
    let lit: Vec<(u32, u32)> = read_png_luma(&png)
        .enumerate_pixels()
        .filter(|(_, _, p)| p.0[0] > 0)
        .map(|(x, y, _)| (x, y))
        .collect();
    assert_eq!(lit, vec![(20, 31 - 10)]);

    let mut d = DepthMap2D::invalid(AngularGrid::depth_default());
    for az in 100..140 {
        d.set(az, 60, 6.0 + az as f32 * 0.01);
    }
    let dm = dir.path().join("d.hwkd");
    format::write_depthmap(&dm, &d).unwrap();
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    assert_eq!(code(&hawk(&["render", "--input", s(&dm), "--out", s(&a)])), 0);
    assert_eq!(code(&hawk(&["render", "--input", s(&dm), "--out", s(&b)])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let rgb = image::open(&a).unwrap().to_rgb8();
    let sentinel = rgb.get_pixel(0, 0).0;
    assert_eq!(sentinel, format::SENTINEL_RGB);
    assert!(rgb.enumerate_pixels().filter(|(_, y, _)| *y == 127 - 60).all(|(x, _, p)| (100..140).contains(&x) != (p.0 == sentinel)));

    let mm = dir.path().join("mm.png");
    assert_eq!(code(&hawk(&["render", "--input", s(&dm), "--out", s(&mm), "--mm16"])), 0);
    let img = image::open(&mm).unwrap().to_luma16();
    assert_eq!(img.get_pixel(100, 127 - 60).0, [7000]);

    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"not a map").unwrap();
    assert_eq!(code(&hawk(&["render", "--input", s(&junk), "--out", s(&png)])), 1);
}

#[test]
fn dataset_kfold_and_batch_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fast_config(dir.path());
    let data = dir.path().join("data");
    let meshes = assets().join("meshes");
    let o = Command::new(env!("CARGO_BIN_EXE_hawk"))
        .args(["dataset", "--config", s(&cfg), "--mesh", s(&meshes), "--count", "4", "--out", s(&data), "--seed", "5", "--k", "2"])
        .env("HAWK_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout_json(&o)[0]["samples"], 4);
    let m: Value = serde_json::from_slice(&std::fs::read(data.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["folds"]["k"], 2);
    assert_eq!(m["config"]["meshes"].as_array().unwrap().len(), 3);

    let o = hawk(&["metrics", "--manifest", s(&data)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines = stdout_json(&o);
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[4]["summary"]["samples"], 4);

    // Ground truth scored as its own prediction.
    let preds = dir.path().join("preds");
    std::fs::create_dir(&preds).unwrap();
    for id in 0..4 {
        let f = format!("{id:06}.hwkd");
        std::fs::copy(data.join(&f), preds.join(&f)).unwrap();
    }
    let o = hawk(&["metrics", "--manifest", s(&data.join("manifest.json")), "--predictions", s(&preds)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = &stdout_json(&o)[4]["summary"];
    assert_eq!(summary["pct_surface_missed"]["p90"].as_f64(), Some(0.0));

    let o = hawk(&["kfold", "--manifest", s(&data), "--k", "4", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout_json(&o)[0]["fold_sizes"], serde_json::json!([1, 1, 1, 1]));
    assert_eq!(code(&hawk(&["kfold", "--manifest", s(&data), "--k", "5"])), 2);
    assert_eq!(code(&hawk(&["kfold", "--manifest", s(&dir.path().join("nowhere")), "--k", "2"])), 1);
}

#[test]
fn zero_threads_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_hawk"))
        .args(["kfold", "--manifest", "x", "--k", "2"])
        .env("HAWK_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 64);
}
