use fomtrace_core::eval::{sequence_report, ReportMeta};
use fomtrace_core::pipeline::{Mode, Session, SessionConfig};
use fomtrace_core::synth::DiskScene;

fn mean_iou(scene: &DiskScene, mode: Mode) -> f64 {
    let cfg = SessionConfig {
        mode,
        ..SessionConfig::default()
    };
    let mut s = Session::<f64>::init(scene.frames(), scene.label(0), cfg).unwrap();
    let out = s.run_uninterrupted().unwrap();
    sequence_report(ReportMeta::default(), &out, &scene.labels()[1..], 1, None)
        .unwrap()
        .mean_iou
}

#[test]
fn translating_disk_is_tracked() {
    let scene = DiskScene::tracking();
    assert!(mean_iou(&scene, Mode::Fomtrace) >= 0.90);
    assert!(mean_iou(&scene, Mode::Spift) >= 0.85);
}

#[test]
fn model_suppresses_leaks() {
    let scene = DiskScene::leak();
    let spift = mean_iou(&scene, Mode::Spift);
    let fom = mean_iou(&scene, Mode::Fomtrace);
    let fomw = mean_iou(&scene, Mode::Fomtracew);
    assert!(fom - spift >= 0.10, "fomtrace {fom} vs spift {spift}");
    assert!(fomw > spift, "fomtracew {fomw} vs spift {spift}");
}

#[test]
fn single_precision_sessions_run() {
    let scene = DiskScene {
        frames: 3,
        ..DiskScene::tracking()
    };
    let mut s = Session::<f32>::init(scene.frames(), scene.label(0), SessionConfig::default()).unwrap();
    let out = s.run_uninterrupted().unwrap();
    let r = sequence_report(ReportMeta::default(), &out, &scene.labels()[1..], 1, None).unwrap();
    assert!(r.mean_iou >= 0.9);
}
