//! Pinhole camera, wheel model and pose.
//!
//! Camera frame: x right, y down, z along the optical axis. Wheel frame: z along the axle
//! from the inboard to the outboard perimeter, +y towards the ground contact, origin at the
//! inboard perimeter centre.

use std::f64::consts::TAU;

use nalgebra::{Matrix2x3, Point2, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::kv::KeyValues;

const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn validate(self) -> Result<Self> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidConfig("focal lengths must be positive".into()));
        }
        if !(self.cx >= 0.0
            && self.cy >= 0.0
            && self.cx <= self.width as f64
            && self.cy <= self.height as f64)
        {
            return Err(Error::InvalidConfig("principal point outside image".into()));
        }
        Ok(self)
    }

    /// Projects a camera-frame point; `None` at or behind the camera plane.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Point2<f64>> {
        if p.z <= MIN_DEPTH {
            return None;
        }
        Some(Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// d(pixel)/d(camera point)
    pub(crate) fn projection_jacobian(&self, p: &Vector3<f64>) -> Matrix2x3<f64> {
        let iz = 1.0 / p.z;
        Matrix2x3::new(
            self.fx * iz,
            0.0,
            -self.fx * p.x * iz * iz,
            0.0,
            self.fy * iz,
            -self.fy * p.y * iz * iz,
        )
    }

    /// Viewing ray direction (unnormalised) through a pixel.
    pub fn back_project(&self, px: &Point2<f64>) -> Vector3<f64> {
        Vector3::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy, 1.0)
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let cam = CameraIntrinsics {
            fx: kv.take("fx", 0.0)?,
            fy: kv.take("fy", 0.0)?,
            cx: kv.take("cx", 0.0)?,
            cy: kv.take("cy", 0.0)?,
            width: kv.take("width", 0)?,
            height: kv.take("height", 0)?,
        };
        kv.finish()?;
        cam.validate()
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "fx = {}\nfy = {}\ncx = {}\ncy = {}\nwidth = {}\nheight = {}\n",
            self.fx, self.fy, self.cx, self.cy, self.width, self.height
        )
    }
}

/// Simplified wheel: two perimeter circles `width` apart plus the hub plate on the inboard face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelModel3D {
    pub radius: f64,
    pub width: f64,
    pub hub_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WheelCircle {
    Inboard,
    Outboard,
    Hub,
}

impl WheelCircle {
    pub const ALL: [WheelCircle; 3] = [WheelCircle::Inboard, WheelCircle::Outboard, WheelCircle::Hub];
}

impl WheelModel3D {
    pub fn validate(self) -> Result<Self> {
        if !(self.radius > 0.0 && self.hub_radius > 0.0 && self.hub_radius < self.radius) {
            return Err(Error::InvalidConfig("need 0 < hub_radius < radius".into()));
        }
        if !(self.width > 0.0) {
            return Err(Error::InvalidConfig("non-positive wheel width".into()));
        }
        Ok(self)
    }

    /// Radius and axial offset of a circle in the wheel frame.
    pub fn circle(&self, which: WheelCircle) -> (f64, f64) {
        match which {
            WheelCircle::Inboard => (self.radius, 0.0),
            WheelCircle::Outboard => (self.radius, self.width),
            WheelCircle::Hub => (self.hub_radius, 0.0),
        }
    }

    pub fn point(&self, which: WheelCircle, phi: f64) -> Vector3<f64> {
        let (r, z) = self.circle(which);
        Vector3::new(r * phi.cos(), r * phi.sin(), z)
    }

    pub fn tangent(&self, which: WheelCircle, phi: f64) -> Vector3<f64> {
        let (r, _) = self.circle(which);
        Vector3::new(-r * phi.sin(), r * phi.cos(), 0.0)
    }

    /// Undeformed reference volume π·r²·width.
    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius * self.width
    }
}

/// Wheel frame → camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelPose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl WheelPose {
    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        WheelPose {
            rotation,
            translation,
        }
    }

    pub fn from_rotation_vector(rvec: Vector3<f64>, translation: Vector3<f64>) -> Self {
        WheelPose::new(Rotation3::new(rvec), translation)
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Axle direction in the camera frame.
    pub fn axle(&self) -> Vector3<f64> {
        self.rotation * Vector3::z()
    }

    /// Camera centre in the wheel frame.
    pub fn camera_centre(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }

    /// Angle between axle directions (spin about the axle is unobservable from circles).
    pub fn axle_angle_to(&self, other: &WheelPose) -> f64 {
        let c = self.axle().dot(&other.axle()).clamp(-1.0, 1.0);
        c.acos()
    }
}

/// Samples each of the three circles uniformly and projects them.
/// Loops are in [`WheelCircle::ALL`] order, points ordered by parameter angle.
pub fn project_wheel(
    model: &WheelModel3D,
    pose: &WheelPose,
    cam: &CameraIntrinsics,
    samples_per_circle: usize,
) -> Result<[Vec<Point2<f64>>; 3]> {
    let mut loops: [Vec<Point2<f64>>; 3] = Default::default();
    for (i, which) in WheelCircle::ALL.into_iter().enumerate() {
        for k in 0..samples_per_circle {
            let phi = TAU * k as f64 / samples_per_circle as f64;
            let p = pose.to_camera(&model.point(which, phi));
            loops[i].push(cam.project(&p).ok_or(Error::WheelBehindCamera)?);
        }
    }
    Ok(loops)
}
