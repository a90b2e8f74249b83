//! Rover configuration and the shared locomotion types.
//!
//! Body frame: x forward, y left, z up, origin at the centre of the rectangle
//! formed by the four wheel contact points.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::kv::KeyValues;

/// Physical description of the breadboard. Lengths in metres, power in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoverConfig {
    pub mass: f64,
    pub gravity: f64,
    /// Distance between front and rear axles (L).
    pub wheel_longitudinal_separation: f64,
    /// Track width (W).
    pub wheel_lateral_separation: f64,
    pub wheel_radius: f64,
    pub wheel_width: f64,
    pub ground_clearance: f64,
    pub drive_motor_rated_power: f64,
    pub steering_motor_rated_power: f64,
    /// rad/s
    pub steering_rate: f64,
    /// rad, symmetric about zero
    pub steering_limit: f64,
}

pub const EARTH_GRAVITY: f64 = 9.81;
pub const LUNAR_GRAVITY: f64 = 1.62;

impl Default for RoverConfig {
    fn default() -> Self {
        RoverConfig {
            mass: 84.0,
            gravity: EARTH_GRAVITY,
            wheel_longitudinal_separation: 0.980,
            wheel_lateral_separation: 0.830,
            wheel_radius: 0.15,
            wheel_width: 0.12,
            ground_clearance: 0.250,
            drive_motor_rated_power: 13.0,
            steering_motor_rated_power: 16.0,
            steering_rate: 10f64.to_radians(),
            steering_limit: 95f64.to_radians(),
        }
    }
}

impl RoverConfig {
    pub fn lunar() -> Self {
        RoverConfig {
            gravity: LUNAR_GRAVITY,
            ..Default::default()
        }
    }

    /// Weight force m·g in newtons.
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn validate(self) -> Result<Self> {
        validate_config(self)
    }

    pub fn position(&self, wheel: WheelId) -> Point2<f64> {
        let half_l = self.wheel_longitudinal_separation / 2.0;
        let half_w = self.wheel_lateral_separation / 2.0;
        match wheel {
            WheelId::FrontLeft => Point2::new(half_l, half_w),
            WheelId::FrontRight => Point2::new(half_l, -half_w),
            WheelId::RearLeft => Point2::new(-half_l, half_w),
            WheelId::RearRight => Point2::new(-half_l, -half_w),
        }
    }

    /// Reads a `key = value` file on top of the breadboard defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let config = Self::from_kv(&mut kv)?;
        kv.finish()?;
        Ok(config)
    }

    pub(crate) fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let d = RoverConfig::default();
        let config = RoverConfig {
            mass: kv.take("mass", d.mass)?,
            gravity: kv.take("gravity", d.gravity)?,
            wheel_longitudinal_separation: kv
                .take("wheel_longitudinal_separation", d.wheel_longitudinal_separation)?,
            wheel_lateral_separation: kv.take("wheel_lateral_separation", d.wheel_lateral_separation)?,
            wheel_radius: kv.take("wheel_radius", d.wheel_radius)?,
            wheel_width: kv.take("wheel_width", d.wheel_width)?,
            ground_clearance: kv.take("ground_clearance", d.ground_clearance)?,
            drive_motor_rated_power: kv.take("drive_motor_rated_power", d.drive_motor_rated_power)?,
            steering_motor_rated_power: kv
                .take("steering_motor_rated_power", d.steering_motor_rated_power)?,
            steering_rate: kv.take("steering_rate", d.steering_rate)?,
            steering_limit: kv.take("steering_limit", d.steering_limit)?,
        };
        validate_config(config)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "mass = {}\ngravity = {}\nwheel_longitudinal_separation = {}\nwheel_lateral_separation = {}\n\
             wheel_radius = {}\nwheel_width = {}\nground_clearance = {}\ndrive_motor_rated_power = {}\n\
             steering_motor_rated_power = {}\nsteering_rate = {}\nsteering_limit = {}\n",
            self.mass,
            self.gravity,
            self.wheel_longitudinal_separation,
            self.wheel_lateral_separation,
            self.wheel_radius,
            self.wheel_width,
            self.ground_clearance,
            self.drive_motor_rated_power,
            self.steering_motor_rated_power,
            self.steering_rate,
            self.steering_limit,
        )
    }
}

/// Returns the config unchanged when every invariant holds, otherwise the first violation.
pub fn validate_config(raw: RoverConfig) -> Result<RoverConfig> {
    let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
    let all_finite = [
        raw.mass,
        raw.gravity,
        raw.wheel_longitudinal_separation,
        raw.wheel_lateral_separation,
        raw.wheel_radius,
        raw.wheel_width,
        raw.ground_clearance,
        raw.drive_motor_rated_power,
        raw.steering_motor_rated_power,
        raw.steering_rate,
        raw.steering_limit,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !all_finite {
        return bad("non-finite value");
    }
    if raw.mass <= 0.0 {
        return bad("non-positive mass");
    }
    if raw.gravity <= 0.0 {
        return bad("non-positive gravity");
    }
    if raw.wheel_radius <= 0.0 {
        return bad("zero wheel radius");
    }
    if raw.wheel_longitudinal_separation <= 0.0
        || raw.wheel_lateral_separation <= 0.0
        || raw.wheel_width <= 0.0
        || raw.ground_clearance <= 0.0
    {
        return bad("non-positive length");
    }
    if raw.drive_motor_rated_power < 0.0 || raw.steering_motor_rated_power < 0.0 {
        return bad("negative rated power");
    }
    if raw.steering_limit <= 0.0 {
        return bad("empty steering range");
    }
    if raw.steering_limit > PI {
        return bad("steering limit beyond pi");
    }
    if raw.steering_rate <= 0.0 {
        return bad("non-positive steering rate");
    }
    Ok(raw)
}

/// Contact-point positions in the body frame, in [`WheelId::ALL`] order.
pub fn wheel_positions(config: &RoverConfig) -> [Point2<f64>; 4] {
    WheelId::ALL.map(|w| config.position(w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocomotionMode {
    Ackermann,
    SkidSteer,
    Crab,
    PointTurn,
}

impl LocomotionMode {
    pub const ALL: [LocomotionMode; 4] = [
        LocomotionMode::Ackermann,
        LocomotionMode::SkidSteer,
        LocomotionMode::Crab,
        LocomotionMode::PointTurn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LocomotionMode::Ackermann => "ackermann",
            LocomotionMode::SkidSteer => "skid_steer",
            LocomotionMode::Crab => "crab",
            LocomotionMode::PointTurn => "point_turn",
        }
    }
}

impl fmt::Display for LocomotionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LocomotionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ackermann" => Ok(LocomotionMode::Ackermann),
            "skid_steer" | "skid" => Ok(LocomotionMode::SkidSteer),
            "crab" => Ok(LocomotionMode::Crab),
            "point_turn" => Ok(LocomotionMode::PointTurn),
            other => Err(format!("unknown locomotion mode `{other}`")),
        }
    }
}

/// Planar body velocity: forward, lateral (left positive) and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyTwist {
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
}

impl BodyTwist {
    pub const ZERO: BodyTwist = BodyTwist {
        vx: 0.0,
        vy: 0.0,
        wz: 0.0,
    };

    pub fn new(vx: f64, vy: f64, wz: f64) -> Self {
        BodyTwist { vx, vy, wz }
    }

    pub fn linear_speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn scaled(&self, k: f64) -> Self {
        BodyTwist::new(self.vx * k, self.vy * k, self.wz * k)
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.wz.is_finite()
    }

    /// Velocity of a body-fixed point.
    pub fn velocity_at(&self, p: &Point2<f64>) -> (f64, f64) {
        (self.vx - self.wz * p.y, self.vy + self.wz * p.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WheelId {
    FrontLeft,
    FrontRight,
    RearLeft,
    RearRight,
}

impl WheelId {
    pub const ALL: [WheelId; 4] = [
        WheelId::FrontLeft,
        WheelId::FrontRight,
        WheelId::RearLeft,
        WheelId::RearRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_left(self) -> bool {
        matches!(self, WheelId::FrontLeft | WheelId::RearLeft)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            WheelId::FrontLeft => "fl",
            WheelId::FrontRight => "fr",
            WheelId::RearLeft => "rl",
            WheelId::RearRight => "rr",
        }
    }
}

impl fmt::Display for WheelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short_name().to_ascii_uppercase())
    }
}

/// Drive speed (rad/s, positive rolls the wheel along its heading) and steering angle
/// (rad, counter-clockwise positive about the wheel's vertical axis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelCommand {
    pub wheel_id: WheelId,
    pub drive_speed: f64,
    pub steering_angle: f64,
}

impl WheelCommand {
    pub fn new(wheel_id: WheelId, drive_speed: f64, steering_angle: f64) -> Self {
        WheelCommand {
            wheel_id,
            drive_speed,
            steering_angle,
        }
    }

    pub fn neutral(wheel_id: WheelId) -> Self {
        WheelCommand::new(wheel_id, 0.0, 0.0)
    }
}

pub type WheelCommands = [WheelCommand; 4];

pub fn neutral_commands() -> WheelCommands {
    WheelId::ALL.map(WheelCommand::neutral)
}
