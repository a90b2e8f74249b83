//! Synthetic annotations: image loops and chords generated from known poses and cut depths.

use std::f64::consts::PI;

use nalgebra::{Point2, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::camera::{project_wheel, CameraIntrinsics, WheelModel3D, WheelPose};
use super::ChordAnnotation;
use crate::error::{Error, Result};

/// Disc fraction cut off by a chord at `depth_ratio` = distance/radius from the centre.
pub fn segment_fraction(depth_ratio: f64) -> f64 {
    let x = depth_ratio.clamp(-1.0, 1.0);
    (x.acos() - x * (1.0 - x * x).sqrt()) / PI
}

/// Inverse of [`segment_fraction`] by bisection.
pub fn depth_ratio_for_fraction(fraction: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if segment_fraction(mid) > fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Image chord for a straight cut at `depth_ratio`·r from the wheel centre, its normal
/// rotated `tilt` from the contact direction within the wheel plane.
pub fn synthetic_chord(
    model: &WheelModel3D,
    pose: &WheelPose,
    cam: &CameraIntrinsics,
    depth_ratio: f64,
    tilt: f64,
) -> Result<ChordAnnotation> {
    let (s, c) = tilt.sin_cos();
    let normal = Vector3::new(s, c, 0.0);
    let along = Vector3::new(c, -s, 0.0);
    let foot = normal * (depth_ratio * model.radius);
    let reach = 1.3 * model.radius;
    let project = |p: Vector3<f64>| cam.project(&pose.to_camera(&p)).ok_or(Error::WheelBehindCamera);
    Ok(ChordAnnotation::new(
        project(foot - along * reach)?,
        project(foot + along * reach)?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedFrame {
    pub frame: usize,
    pub cam_id: u32,
    /// inboard, outboard, hub
    pub loops: [Vec<Point2<f64>>; 3],
    pub chord: Option<ChordAnnotation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureTarget {
    pub frame: usize,
    pub cam_id: u32,
    pub fraction: f64,
}

#[derive(Debug, Clone)]
pub struct DeflectionFixture {
    pub model: WheelModel3D,
    pub camera: CameraIntrinsics,
    pub frames: Vec<AnnotatedFrame>,
    pub targets: Vec<FixtureTarget>,
}

pub const FIXTURE_FRAMES: usize = 200;
/// Frames in which wheel A is off the ground.
pub const AIRBORNE_FRAMES: std::ops::RangeInclusive<usize> = 125..=137;
pub const IMPACT_FRAME: usize = 138;

/// Stable windows (frame ranges) per camera: 0 is wheel A, 1 is wheel B.
pub fn stable_windows(cam_id: u32) -> Vec<std::ops::RangeInclusive<usize>> {
    match cam_id {
        0 => vec![1..=90, 151..=200],
        _ => vec![1..=137, 151..=200],
    }
}

/// Target deflection (fraction of wheel volume) for wheel A (`cam_id` 0) and B (1).
/// `None` while the wheel is airborne.
pub fn obstacle_profile(cam_id: u32, frame: usize) -> Option<f64> {
    let f = frame as f64;
    let percent = match cam_id {
        0 => match frame {
            1..=90 => 4.3 + 0.4 * (0.21 * f).sin(),
            91..=124 => {
                let start = 4.3 + 0.4 * (0.21 * 90.0f64).sin();
                start + (0.6 - start) * (f - 90.0) / 34.0
            }
            125..=137 => return None,
            IMPACT_FRAME => 6.1,
            139..=150 => 4.2 + 1.9 * (-(f - 138.0) / 3.0).exp(),
            _ => 4.1 + 0.35 * (0.17 * f).sin(),
        },
        _ => match frame {
            1..=137 => 4.0 + 0.4 * (0.13 * f + 1.0).sin(),
            IMPACT_FRAME => 6.35,
            139..=150 => 4.3 + 2.05 * (-(f - 138.0) / 2.5).exp(),
            _ => 4.2 + 0.4 * (0.19 * f).sin(),
        },
    };
    Some(percent / 100.0)
}

pub fn fixture_model() -> WheelModel3D {
    WheelModel3D {
        radius: 0.15,
        width: 0.12,
        hub_radius: 0.05,
    }
}

pub fn fixture_camera() -> CameraIntrinsics {
    CameraIntrinsics {
        fx: 800.0,
        fy: 800.0,
        cx: 640.0,
        cy: 480.0,
        width: 1280,
        height: 960,
    }
}

/// Camera-to-wheel pose for a frame; the wheel bobs slightly as the rover moves.
pub fn fixture_pose(cam_id: u32, frame: usize) -> WheelPose {
    let f = frame as f64;
    let (yaw, pitch, base) = match cam_id {
        0 => (25f64, -8f64, Vector3::new(0.05, 0.02, 0.75)),
        _ => (-20f64, 5f64, Vector3::new(-0.04, 0.03, 0.80)),
    };
    let wobble = (0.05 * f + cam_id as f64).sin();
    let rotation = Rotation3::from_euler_angles(
        (pitch + 0.8 * wobble).to_radians(),
        (yaw + 0.6 * (0.03 * f).cos()).to_radians(),
        (2.0 * wobble).to_radians(),
    );
    WheelPose::new(rotation, base + Vector3::new(0.004 * wobble, 0.006 * wobble, 0.0))
}

pub const FIXTURE_SEED: u64 = 0x5eed_0006;
pub const FIXTURE_LOOP_POINTS: usize = 36;
pub const FIXTURE_PIXEL_NOISE: f64 = 0.2;

/// Two wheels over an obstacle crossing: noisy loops and exact chords for every frame.
pub fn obstacle_fixture() -> Result<DeflectionFixture> {
    let model = fixture_model();
    let camera = fixture_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(FIXTURE_SEED);
    let noise = Normal::new(0.0, FIXTURE_PIXEL_NOISE).expect("positive std");
    let mut frames = Vec::new();
    let mut targets = Vec::new();
    for cam_id in [0u32, 1] {
        for frame in 1..=FIXTURE_FRAMES {
            let pose = fixture_pose(cam_id, frame);
            let mut loops = project_wheel(&model, &pose, &camera, FIXTURE_LOOP_POINTS)?;
            for p in loops.iter_mut().flatten() {
                p.x += noise.sample(&mut rng);
                p.y += noise.sample(&mut rng);
            }
            let target = obstacle_profile(cam_id, frame);
            let chord = match target {
                Some(fraction) => {
                    let tilt = (3.0 * (0.11 * frame as f64).sin()).to_radians();
                    Some(synthetic_chord(
                        &model,
                        &pose,
                        &camera,
                        depth_ratio_for_fraction(fraction),
                        tilt,
                    )?)
                }
                None => None,
            };
            frames.push(AnnotatedFrame {
                frame,
                cam_id,
                loops,
                chord,
            });
            targets.push(FixtureTarget {
                frame,
                cam_id,
                fraction: target.unwrap_or(0.0),
            });
        }
    }
    Ok(DeflectionFixture {
        model,
        camera,
        frames,
        targets,
    })
}
