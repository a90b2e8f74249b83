use std::path::PathBuf;

use rover_core::deflection::{
    estimate_series, fixture_camera, fixture_model, format_annotations, format_targets, obstacle_fixture,
    parse_annotations, parse_targets, smooth_deflection_series, stable_windows, CameraIntrinsics, FitOptions,
    ModelFile, AIRBORNE_FRAMES,
};
use rover_core::presets;
use rover_core::telemetry::parse_cot_table;
use rover_core::terrain::{simulate_traverse, Scenario};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Rewrites the generated fixture files when `REGENERATE_FIXTURES` is set.
#[test]
fn obstacle_fixture_matches_generator() {
    let fixture = obstacle_fixture().unwrap();
    let files = [
        ("deflection/obstacle_annotations.csv", format_annotations(&fixture.frames)),
        ("deflection/obstacle_targets.csv", format_targets(&fixture.targets)),
        ("deflection/wheel_model.kv", ModelFile::new(fixture.model).to_kv_string()),
        ("deflection/camera.kv", fixture.camera.to_kv_string()),
    ];
    let regenerate = std::env::var_os("REGENERATE_FIXTURES").is_some();
    for (rel, text) in files {
        let path = data_dir().join(rel);
        if regenerate {
            std::fs::write(&path, &text).unwrap();
        }
        let bundled = std::fs::read_to_string(&path).unwrap();
        assert!(bundled == text, "{rel} is stale; rerun with REGENERATE_FIXTURES=1");
    }
}

#[test]
fn bundled_files_parse() {
    assert_eq!(parse_annotations(presets::FIXTURE_ANNOTATIONS).unwrap().len(), 400);
    assert_eq!(parse_targets(presets::FIXTURE_TARGETS).unwrap().len(), 400);
    assert_eq!(ModelFile::parse(presets::FIXTURE_MODEL).unwrap().model, fixture_model());
    assert_eq!(CameraIntrinsics::from_kv_str(presets::FIXTURE_CAMERA).unwrap(), fixture_camera());
    let table = parse_cot_table(presets::TABLE2).unwrap();
    assert_eq!(table.len(), 8);
    assert_eq!(table.iter().filter(|r| r.label == "Nominal").count(), 3);
}

#[test]
fn every_scenario_simulates() {
    for (name, text) in presets::SCENARIOS {
        let sc = Scenario::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(sc.name, name);
        let recs = simulate_traverse(&sc).unwrap();
        assert!(recs.len() > 100, "{name}");
    }
    let table2: Vec<_> = presets::table2_scenarios().collect();
    assert_eq!(table2.len(), 8);
}

#[test]
fn fixture_series_reproduces_targets() {
    let frames = parse_annotations(presets::FIXTURE_ANNOTATIONS).unwrap();
    let targets = parse_targets(presets::FIXTURE_TARGETS).unwrap();
    let settings = ModelFile::parse(presets::FIXTURE_MODEL).unwrap();
    let cam = CameraIntrinsics::from_kv_str(presets::FIXTURE_CAMERA).unwrap();
    let series = estimate_series(&frames, &settings, &cam, &FitOptions::default()).unwrap();
    assert_eq!(series.len(), 2);
    let mut peak: f64 = 0.0;
    for s in &series {
        let smooth = smooth_deflection_series(&s.estimates, settings.smoothing_window).unwrap();
        for (raw, est) in s.estimates.iter().zip(&smooth) {
            let target = targets
                .iter()
                .find(|t| t.cam_id == s.cam_id && t.frame == est.frame)
                .unwrap()
                .fraction;
            assert!(
                (raw.fraction - target).abs() <= 0.002,
                "cam {} frame {}: {} vs {}",
                s.cam_id,
                est.frame,
                raw.fraction,
                target
            );
            peak = peak.max(raw.fraction).max(est.fraction);
            if s.cam_id == 0 && AIRBORNE_FRAMES.contains(&est.frame) {
                assert_eq!(raw.fraction, 0.0);
            }
        }
        for window in stable_windows(s.cam_id) {
            for est in smooth.iter().chain(&s.estimates).filter(|e| window.contains(&e.frame)) {
                assert!((0.035..=0.05).contains(&est.fraction), "cam {} frame {}: {}", s.cam_id, est.frame, est.fraction);
            }
        }
    }
    assert!(peak < 0.065, "{peak}");
}
