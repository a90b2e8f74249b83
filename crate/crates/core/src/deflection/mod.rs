//! Wheel deflection from annotated images.
//!
//! A fitted wheel pose plus an image line undercutting the inboard perimeter gives two
//! points on that perimeter; the same cut is assumed on the outboard side, and the convex
//! hull of both cut-off perimeter arcs is the deflected volume.

pub mod annotations;
pub mod camera;
pub mod chord;
pub mod fit;
pub mod hull;
pub mod synth;

use std::f64::consts::TAU;

use nalgebra::{Point2, Vector3};

pub use camera::{project_wheel, CameraIntrinsics, WheelCircle, WheelModel3D, WheelPose};
pub use chord::{chord_circle_intersections, ChordHits};
pub use fit::{fit_wheel_pose, fit_wheel_pose_with, initial_pose_from_loops, FitOptions, PoseFit};
pub use annotations::{
    estimate_series, format_annotations, format_deflection_csv, format_targets, parse_annotations, parse_targets,
    CameraSeries, ModelFile, ANNOTATION_HEADER, DEFLECTION_HEADER,
};
pub use hull::{convex_hull_volume, ConvexHull};
pub use synth::{
    depth_ratio_for_fraction, fixture_camera, fixture_model, fixture_pose, obstacle_fixture, segment_fraction,
    stable_windows, synthetic_chord, AnnotatedFrame, DeflectionFixture, FixtureTarget, AIRBORNE_FRAMES,
};

use crate::error::{Error, Result};

/// Arc sampling used when building the hull point set.
pub const DEFAULT_ARC_STEP_DEG: f64 = 1.0;

/// Fraction above which a cut is flagged as implausible.
pub const IMPLAUSIBLE_FRACTION: f64 = 0.5;

/// Image line (two endpoints, px) undercutting the inboard perimeter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordAnnotation {
    pub a: Point2<f64>,
    pub b: Point2<f64>,
}

impl ChordAnnotation {
    pub fn new(a: Point2<f64>, b: Point2<f64>) -> Self {
        ChordAnnotation { a, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflectionEstimate {
    pub frame: usize,
    pub volume_m3: f64,
    pub fraction: f64,
    pub implausible: bool,
}

impl DeflectionEstimate {
    pub fn undeflected(frame: usize) -> Self {
        DeflectionEstimate {
            frame,
            volume_m3: 0.0,
            fraction: 0.0,
            implausible: false,
        }
    }
}

/// Hull point set for one frame: both perimeter arcs cut off by the chord, in the wheel
/// frame. Empty when the chord does not cut the inboard perimeter.
pub fn deflected_point_set(
    model: &WheelModel3D,
    pose: &WheelPose,
    cam: &CameraIntrinsics,
    chord: &ChordAnnotation,
    arc_step: f64,
) -> Vec<Vector3<f64>> {
    let Some((line_normal, line_offset)) = chord_line_on_inboard_plane(pose, cam, chord) else {
        return Vec::new();
    };
    let foot = Point2::from(line_normal * line_offset);
    let along = nalgebra::Vector2::new(-line_normal.y, line_normal.x);
    let ChordHits::Secant(p, q) =
        chord_circle_intersections(Point2::origin(), model.radius, foot, foot + along)
    else {
        return Vec::new();
    };

    // keep the arc on the ground-contact (+y) side of the cut
    let side = |pt: nalgebra::Vector2<f64>| line_normal.dot(&pt) - line_offset;
    let contact_side = side(nalgebra::Vector2::new(0.0, model.radius));
    let (phi_p, phi_q) = (p.y.atan2(p.x), q.y.atan2(q.x));
    let ccw = (phi_q - phi_p).rem_euclid(TAU);
    let mid = phi_p + ccw / 2.0;
    let mid_side = side(nalgebra::Vector2::new(mid.cos(), mid.sin()) * model.radius);
    let (start, span) = if contact_side == 0.0 {
        if ccw <= TAU - ccw {
            (phi_p, ccw)
        } else {
            (phi_q, TAU - ccw)
        }
    } else if contact_side.signum() == mid_side.signum() {
        (phi_p, ccw)
    } else {
        (phi_q, TAU - ccw)
    };

    let step = arc_step.max(1e-6);
    let mut angles: Vec<f64> = (0..)
        .map(|k| k as f64 * step)
        .take_while(|a| *a < span)
        .map(|a| start + a)
        .collect();
    angles.push(start + span);

    let mut points = Vec::with_capacity(angles.len() * 2);
    for phi in &angles {
        points.push(model.point(WheelCircle::Inboard, *phi));
        points.push(model.point(WheelCircle::Outboard, *phi));
    }
    points
}

/// Back-projects the image chord to a line `n·p = d` (unit `n`) in the inboard plane.
fn chord_line_on_inboard_plane(
    pose: &WheelPose,
    cam: &CameraIntrinsics,
    chord: &ChordAnnotation,
) -> Option<(nalgebra::Vector2<f64>, f64)> {
    let plane_cam = cam.back_project(&chord.a).cross(&cam.back_project(&chord.b));
    let normal = pose.rotation.inverse() * plane_cam;
    let offset = normal.dot(&pose.camera_centre());
    let in_plane = nalgebra::Vector2::new(normal.x, normal.y);
    let len = in_plane.norm();
    if len <= 1e-12 * normal.norm() || len == 0.0 {
        return None;
    }
    Some((in_plane / len, offset / len))
}

pub fn deflected_volume_fraction(
    frame: usize,
    model: &WheelModel3D,
    pose: &WheelPose,
    cam: &CameraIntrinsics,
    chord: &ChordAnnotation,
) -> DeflectionEstimate {
    deflected_volume_fraction_with(frame, model, pose, cam, chord, DEFAULT_ARC_STEP_DEG.to_radians())
}

pub fn deflected_volume_fraction_with(
    frame: usize,
    model: &WheelModel3D,
    pose: &WheelPose,
    cam: &CameraIntrinsics,
    chord: &ChordAnnotation,
    arc_step: f64,
) -> DeflectionEstimate {
    let points = deflected_point_set(model, pose, cam, chord, arc_step);
    let volume_m3 = convex_hull_volume(&points);
    let fraction = volume_m3 / model.volume();
    DeflectionEstimate {
        frame,
        volume_m3,
        fraction,
        implausible: fraction > IMPLAUSIBLE_FRACTION,
    }
}

/// Centred moving average over `window` frames (odd), truncated at the ends.
pub fn smooth_deflection_series(
    raw: &[DeflectionEstimate],
    window: usize,
) -> Result<Vec<DeflectionEstimate>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "smoothing window must be odd and >= 1, got {window}"
        )));
    }
    let half = window / 2;
    Ok((0..raw.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(raw.len());
            let n = (hi - lo) as f64;
            let fraction = raw[lo..hi].iter().map(|e| e.fraction).sum::<f64>() / n;
            DeflectionEstimate {
                frame: raw[i].frame,
                volume_m3: raw[lo..hi].iter().map(|e| e.volume_m3).sum::<f64>() / n,
                fraction,
                implausible: fraction > IMPLAUSIBLE_FRACTION,
            }
        })
        .collect())
}
