use std::path::Path;
use std::process::{Command, Output};

use fomtrace_core::imgcore::{encode_rgb8_png, frame_file_name, load_mask, mask_file_name, save_label, save_png_bytes};
use fomtrace_core::synth::DiskScene;
use fomtrace_core::LabelMap;

fn fomtrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fomtrace")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scene() -> DiskScene {
    DiskScene {
        width: 48,
        height: 36,
        frames: 4,
        radius: 8.0,
        start: (16.0, 18.0),
        velocity: (2.0, 0.0),
        ..DiskScene::tracking()
    }
}

/// Writes `frames/`, `gt/` and `init.png`; returns the root as a string.
fn dataset(root: &Path) -> String {
    let s = scene();
    for d in ["frames", "gt"] {
        std::fs::create_dir_all(root.join(d)).unwrap();
    }
    for t in 0..s.frames {
        let png = encode_rgb8_png(&s.frame::<f64>(t).to_rgb8());
        save_png_bytes(&png, &root.join("frames").join(frame_file_name(t))).unwrap();
        save_label(&s.label(t), &root.join("gt").join(mask_file_name(t))).unwrap();
    }
    save_label(&s.label(0), &root.join("init.png")).unwrap();
    root.to_str().unwrap().to_owned()
}

fn p(root: &str, rel: &str) -> String {
    format!("{root}/{rel}")
}

#[test]
fn segment_writes_one_mask_per_later_frame() {
    let dir = tempfile::tempdir().unwrap();
    let r = dataset(dir.path());
    let out = fomtrace(&["segment", "--frames", &p(&r, "frames"), "--init-mask", &p(&r, "init.png"), "--mode", "fomtrace", "--out", &p(&r, "out")]);
    assert!(out.status.success(), "{}", stderr(&out));
    for t in 1..4 {
        let m = load_mask(&dir.path().join("out").join(mask_file_name(t))).unwrap();
        assert_eq!(m.dims(), (48, 36));
        assert!(m.has_object());
    }
    assert!(!dir.path().join("out").join(mask_file_name(0)).exists());
    assert!(!dir.path().join("out").join(mask_file_name(4)).exists());
}

#[test]
fn segment_usage_and_range_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let r = dataset(dir.path());
    let out = fomtrace(&["segment", "--frames", &p(&r, "frames"), "--mode", "spift", "--out", &p(&r, "out")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));

    let out = fomtrace(&["segment", "--frames", &p(&r, "frames"), "--init-mask", &p(&r, "init.png"), "--mode", "fomtracew", "--gamma", "1.5", "--out", &p(&r, "out")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("gamma"), "{}", stderr(&out));

    let out = fomtrace(&["segment", "--frames", &p(&r, "nowhere"), "--init-mask", &p(&r, "init.png"), "--out", &p(&r, "out")]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = fomtrace(&["segment", "--frames", &p(&r, "frames"), "--init-mask", &p(&r, "init.png"), "--mode", "fast", "--out", &p(&r, "out")]);
    assert_eq!(out.status.code(), Some(2));

    save_label(&LabelMap::filled(48, 36, 0), &dir.path().join("empty.png")).unwrap();
    let out = fomtrace(&["segment", "--frames", &p(&r, "frames"), "--init-mask", &p(&r, "empty.png"), "--out", &p(&r, "out")]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let r = dataset(dir.path());
    std::fs::write(dir.path().join("bad.json"), r#"{"mode": "spift", "gamma": 1.5}"#).unwrap();
    let base = ["segment", "--frames", &p(&r, "frames"), "--init-mask", &p(&r, "init.png"), "--out", &p(&r, "out"), "--config", &p(&r, "bad.json")];
    assert_eq!(fomtrace(&base).status.code(), Some(2));
    let mut fixed = base.to_vec();
    fixed.extend(["--gamma", "0.5"]);
    let out = fomtrace(&fixed);
    assert!(out.status.success(), "{}", stderr(&out));

    std::fs::write(dir.path().join("typo.json"), r#"{"gama": 0.5}"#).unwrap();
    let out = fomtrace(&["segment", "--frames", &p(&r, "frames"), "--init-mask", &p(&r, "init.png"), "--out", &p(&r, "out"), "--config", &p(&r, "typo.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_prints_mean_iou_and_checks_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let r = dataset(dir.path());
    let out = fomtrace(&["eval", "--pred", &p(&r, "gt"), "--gt", &p(&r, "gt"), "--out", &p(&r, "same.json")]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "mean_iou=1.0000");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("same.json")).unwrap()).unwrap();
    assert_eq!(report["frames"].as_array().unwrap().len(), 4);

    let disjoint = dir.path().join("disjoint");
    std::fs::create_dir_all(&disjoint).unwrap();
    for t in 1..4 {
        let mut m = LabelMap::filled(48, 36, 0);
        m.set(47, 0, 1);
        save_label(&m, &disjoint.join(mask_file_name(t))).unwrap();
    }
    let out = fomtrace(&["eval", "--pred", &p(&r, "disjoint"), "--gt", &p(&r, "gt"), "--out", &p(&r, "d.json")]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "mean_iou=0.0000");

    std::fs::remove_file(disjoint.join(mask_file_name(3))).unwrap();
    let out = fomtrace(&["eval", "--pred", &p(&r, "disjoint"), "--gt", &p(&r, "gt"), "--out", &p(&r, "d.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_reads_the_correction_log() {
    let dir = tempfile::tempdir().unwrap();
    let r = dataset(dir.path());
    std::fs::write(
        dir.path().join("log.json"),
        r#"[{"t": 2, "markers": 2, "seconds": 4.0, "mode": "fomtrace"}, {"t": 2, "markers": 1, "seconds": 1.0, "mode": "fomtrace"}]"#,
    )
    .unwrap();
    let out = fomtrace(&["eval", "--pred", &p(&r, "gt"), "--gt", &p(&r, "gt"), "--log", &p(&r, "log.json"), "--out", &p(&r, "r.json")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["total_markers"], serde_json::json!(3));
    assert_eq!(report["frames"][2]["markers"], serde_json::json!(3));
}

#[test]
fn segtrack_import_merges_objects() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("segtrack");
    let jpeg = root.join("JPEGImages").join("pair");
    std::fs::create_dir_all(&jpeg).unwrap();
    for k in ["1", "2"] {
        std::fs::create_dir_all(root.join("GroundTruth").join("pair").join(k)).unwrap();
    }
    for t in 0..2 {
        let frame = image::RgbImage::from_fn(10, 8, |x, y| image::Rgb([x as u8 * 20, y as u8 * 20, 90]));
        frame.save(jpeg.join(format!("pair_{t:03}.bmp"))).unwrap();
        for (k, x0) in [("1", 0u32), ("2", 5)] {
            let mask = image::GrayImage::from_fn(10, 8, |x, _| image::Luma([if (x0..x0 + 3).contains(&x) { 255 } else { 0 }]));
            mask.save(root.join("GroundTruth").join("pair").join(k).join(format!("pair_{t:03}.png"))).unwrap();
        }
    }
    let out_dir = dir.path().join("imported");
    let out = fomtrace(&["import-segtrack", "--root", root.to_str().unwrap(), "--sequence", "pair", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = load_mask(&out_dir.join("gt").join(mask_file_name(1))).unwrap();
    assert_eq!((m.get(1, 3), m.get(4, 3), m.get(6, 3)), (1, 0, 2));
    assert!(out_dir.join("frames").join(frame_file_name(1)).is_file());

    let out = fomtrace(&["import-segtrack", "--root", root.to_str().unwrap(), "--sequence", "missing", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
