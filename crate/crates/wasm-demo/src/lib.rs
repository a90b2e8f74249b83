//! Browser bindings: pose tracks, yaw-energy curves and wheel deflection for the demo page.
//!
//! Each export is a thin wrapper over a plain function so the numbers can be tested natively.

use nalgebra::{Point2, Rotation3, Vector3};
use rover_core::deflection::{deflected_volume_fraction, fixture_camera, fixture_model, segment_fraction, synthetic_chord, WheelPose};
use rover_core::kinematics::{simulate_pose_track, TwistSegment};
use rover_core::metrics::{curve_crossings, energy_vs_yaw};
use rover_core::rover::{BodyTwist, LocomotionMode, RoverConfig};
use rover_core::terrain::{simulate_traverse, Scenario};
use wasm_bindgen::prelude::*;

pub type Result<T> = std::result::Result<T, String>;

fn msg(e: rover_core::Error) -> String {
    e.to_string()
}

/// Marker track as flat `[x, y, heading, ...]` triples.
pub fn marker_track(mode: &str, vx: f64, vy: f64, wz: f64, duration: f64, marker_x: f64, marker_y: f64) -> Result<Vec<f64>> {
    let mode: LocomotionMode = mode.parse()?;
    let profile = [TwistSegment::new(duration, BodyTwist::new(vx, vy, wz), mode)];
    let step = (duration / 400.0).max(0.01);
    let track = simulate_pose_track(&profile, &RoverConfig::default(), Point2::new(marker_x, marker_y), step).map_err(msg)?;
    Ok(track.iter().flat_map(|s| [s.marker.x, s.marker.y, s.pose.heading]).collect())
}

/// Cumulative energy against yaw on a 1° grid for a point turn and a skid-steer turn,
/// as `[yaw_deg, point_turn_j, skid_j, ...]`. NaN where a curve has ended.
pub fn yaw_energy_table(wz: f64, skid_efficiency: f64, max_deg: f64) -> Result<Vec<f64>> {
    let curve = |mode: LocomotionMode, efficiency: f64| -> Result<_> {
        let duration = max_deg.to_radians() / (wz.abs() * efficiency);
        let mut sc = Scenario::new(mode.as_str(), vec![TwistSegment::new(duration, BodyTwist::new(0.0, 0.0, wz), mode)]);
        sc.terrain.skid_rotation_efficiency = skid_efficiency;
        sc.step = (duration / 2000.0).max(0.01);
        Ok(energy_vs_yaw(&simulate_traverse(&sc).map_err(msg)?, mode.as_str()))
    };
    let pt = curve(LocomotionMode::PointTurn, 1.0)?;
    let skid = curve(LocomotionMode::SkidSteer, skid_efficiency)?;
    let mut out = Vec::new();
    for deg in 0..=max_deg.floor() as usize {
        let d = deg as f64;
        out.extend([d, pt.energy_at(d).unwrap_or(f64::NAN), skid.energy_at(d).unwrap_or(f64::NAN)]);
    }
    Ok(out)
}

/// Yaw angles at which the point-turn and skid-steer energy curves cross.
pub fn yaw_energy_crossings(wz: f64, skid_efficiency: f64, max_deg: f64) -> Result<Vec<f64>> {
    let table = yaw_energy_table(wz, skid_efficiency, max_deg)?;
    let rebuild = |col: usize| rover_core::metrics::YawEnergyCurve {
        label: String::new(),
        points: table.chunks(3).filter(|r| !r[col].is_nan()).map(|r| (r[0], r[col])).collect(),
    };
    Ok(curve_crossings(&rebuild(2), &rebuild(1), max_deg, 0.25))
}

/// Hull estimate and closed-form disc segment for a chord at `depth_ratio`·r, seen by the
/// fixture camera with the wheel yawed `yaw_deg`. Returns `[estimate, exact]`.
pub fn chord_deflection(depth_ratio: f64, yaw_deg: f64) -> Result<Vec<f64>> {
    let model = fixture_model();
    let cam = fixture_camera();
    let pose = WheelPose::new(Rotation3::from_euler_angles(0.0, yaw_deg.to_radians(), 0.0), Vector3::new(0.0, 0.0, 0.8));
    let chord = synthetic_chord(&model, &pose, &cam, depth_ratio, 0.0).map_err(msg)?;
    let exact = if depth_ratio >= 1.0 { 0.0 } else { segment_fraction(depth_ratio) };
    Ok(vec![deflected_volume_fraction(0, &model, &pose, &cam, &chord).fraction, exact])
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = markerTrack)]
pub fn marker_track_js(mode: &str, vx: f64, vy: f64, wz: f64, duration: f64, marker_x: f64, marker_y: f64) -> std::result::Result<Vec<f64>, JsError> {
    js(marker_track(mode, vx, vy, wz, duration, marker_x, marker_y))
}

#[wasm_bindgen(js_name = yawEnergyTable)]
pub fn yaw_energy_table_js(wz: f64, skid_efficiency: f64, max_deg: f64) -> std::result::Result<Vec<f64>, JsError> {
    js(yaw_energy_table(wz, skid_efficiency, max_deg))
}

#[wasm_bindgen(js_name = yawEnergyCrossings)]
pub fn yaw_energy_crossings_js(wz: f64, skid_efficiency: f64, max_deg: f64) -> std::result::Result<Vec<f64>, JsError> {
    js(yaw_energy_crossings(wz, skid_efficiency, max_deg))
}

#[wasm_bindgen(js_name = chordDeflection)]
pub fn chord_deflection_js(depth_ratio: f64, yaw_deg: f64) -> std::result::Result<Vec<f64>, JsError> {
    js(chord_deflection(depth_ratio, yaw_deg))
}
