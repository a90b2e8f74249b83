//! Electrical power of the drive and steering actuators.
//!
//! Per drive: `idle + (F·v + k·v² + μ·N·v_lat) / η`, where `F` is rolling resistance plus
//! the slope component of a quarter of the weight (plus a quarter of any drawbar force),
//! `v = |ω|·r` the rolling speed, and `v_lat` the sideways scrub speed implied by the
//! command set. Steering units draw a holding power, or the moving power while turning.

use crate::error::{Error, Result};
use crate::kinematics::{inverse_kinematics, lateral_slip_speeds};
use crate::kv::KeyValues;
use crate::rover::{BodyTwist, LocomotionMode, RoverConfig, WheelCommands};

use super::slip::TerrainParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModelParams {
    /// W per drive, drawn whenever powered.
    pub idle_power_per_drive: f64,
    pub rolling_resistance_coeff: f64,
    pub drivetrain_efficiency: f64,
    /// W per steering unit holding position.
    pub steering_hold_power: f64,
    /// W per steering unit while repositioning.
    pub steering_move_power: f64,
    /// W·s²/m² per drive.
    pub speed_quadratic_coeff: f64,
    /// Sideways friction coefficient for wheels dragged across the ground.
    pub lateral_friction_coeff: f64,
}

impl Default for PowerModelParams {
    /// Flat-ground breadboard fit (see `calibrate_power`) with a 0.6 drivetrain efficiency
    /// and 0.5 W steering hold.
    fn default() -> Self {
        PowerModelParams {
            idle_power_per_drive: 0.0,
            rolling_resistance_coeff: 0.054973,
            drivetrain_efficiency: 0.6,
            steering_hold_power: 0.5,
            steering_move_power: 8.0,
            speed_quadratic_coeff: 1970.02,
            lateral_friction_coeff: 0.5,
        }
    }
}

impl PowerModelParams {
    pub fn validate(self) -> Result<Self> {
        let all_non_negative = [
            self.idle_power_per_drive,
            self.rolling_resistance_coeff,
            self.drivetrain_efficiency,
            self.steering_hold_power,
            self.steering_move_power,
            self.speed_quadratic_coeff,
            self.lateral_friction_coeff,
        ]
        .iter()
        .all(|v| *v >= 0.0 && v.is_finite());
        if !all_non_negative {
            return Err(Error::InvalidConfig("power parameters must be non-negative".into()));
        }
        if !(self.drivetrain_efficiency > 0.0 && self.drivetrain_efficiency <= 1.0) {
            return Err(Error::InvalidConfig("drivetrain efficiency must be within (0, 1]".into()));
        }
        Ok(self)
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let p = Self::from_kv(&mut kv)?;
        kv.finish()?;
        Ok(p)
    }

    pub(crate) fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let d = PowerModelParams::default();
        PowerModelParams {
            idle_power_per_drive: kv.take("idle_power_per_drive", d.idle_power_per_drive)?,
            rolling_resistance_coeff: kv.take("rolling_resistance_coeff", d.rolling_resistance_coeff)?,
            drivetrain_efficiency: kv.take("drivetrain_efficiency", d.drivetrain_efficiency)?,
            steering_hold_power: kv.take("steering_hold_power", d.steering_hold_power)?,
            steering_move_power: kv.take("steering_move_power", d.steering_move_power)?,
            speed_quadratic_coeff: kv.take("speed_quadratic_coeff", d.speed_quadratic_coeff)?,
            lateral_friction_coeff: kv.take("lateral_friction_coeff", d.lateral_friction_coeff)?,
        }
        .validate()
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "idle_power_per_drive = {}\nrolling_resistance_coeff = {}\ndrivetrain_efficiency = {}\n\
             steering_hold_power = {}\nsteering_move_power = {}\nspeed_quadratic_coeff = {}\n\
             lateral_friction_coeff = {}\n",
            self.idle_power_per_drive,
            self.rolling_resistance_coeff,
            self.drivetrain_efficiency,
            self.steering_hold_power,
            self.steering_move_power,
            self.speed_quadratic_coeff,
            self.lateral_friction_coeff,
        )
    }
}

/// Per-actuator electrical power, drives then steering units, in wheel order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerBreakdown {
    pub drive: [f64; 4],
    pub steering: [f64; 4],
}

impl PowerBreakdown {
    pub fn total(&self) -> f64 {
        self.drive.iter().chain(&self.steering).sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        PowerBreakdown {
            drive: self.drive.map(|p| p * k),
            steering: self.steering.map(|p| p * k),
        }
    }
}

pub fn drive_power(
    commands: &WheelCommands,
    terrain: &TerrainParams,
    config: &RoverConfig,
    power: &PowerModelParams,
    steering_in_motion: &[bool; 4],
) -> PowerBreakdown {
    let slope = terrain.slope();
    let quarter_weight = config.weight() / 4.0;
    let resist = (power.rolling_resistance_coeff * slope.cos() + slope.sin()) * quarter_weight
        + terrain.drawbar_force / 4.0;
    let scrub = lateral_slip_speeds(commands, config);
    let mut out = PowerBreakdown::default();
    for (i, cmd) in commands.iter().enumerate() {
        let v = cmd.drive_speed.abs() * config.wheel_radius;
        let mechanical = resist * v
            + power.speed_quadratic_coeff * v * v
            + power.lateral_friction_coeff * quarter_weight * slope.cos() * scrub[i];
        out.drive[i] = power.idle_power_per_drive + mechanical.max(0.0) / power.drivetrain_efficiency;
        out.steering[i] = if steering_in_motion[i] {
            power.steering_move_power
        } else {
            power.steering_hold_power
        };
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reposition {
    pub duration: f64,
    pub energy: f64,
    pub moving: [bool; 4],
}

const ANGLE_TOL: f64 = 1e-12;

/// All moving units turn at `steering_rate` and draw moving power until the slowest arrives.
pub fn steering_reposition(
    from: &[f64; 4],
    to: &[f64; 4],
    config: &RoverConfig,
    power: &PowerModelParams,
) -> Reposition {
    let deltas: Vec<f64> = from.iter().zip(to).map(|(a, b)| (b - a).abs()).collect();
    let moving = [0, 1, 2, 3].map(|i| deltas[i] > ANGLE_TOL);
    let max_delta = deltas.iter().cloned().fold(0.0, f64::max);
    let duration = if max_delta > ANGLE_TOL {
        max_delta / config.steering_rate
    } else {
        0.0
    };
    let count = moving.iter().filter(|m| **m).count() as f64;
    Reposition {
        duration,
        energy: power.steering_move_power * count * duration,
        moving,
    }
}

/// Steering angles a mode settles at before moving; point turn needs its tangent layout,
/// the other modes start from straight ahead.
pub fn mode_steering_angles(mode: LocomotionMode, config: &RoverConfig) -> Result<[f64; 4]> {
    Ok(match mode {
        LocomotionMode::PointTurn => {
            inverse_kinematics(BodyTwist::new(0.0, 0.0, 1.0), mode, config)?.map(|c| c.steering_angle)
        }
        _ => [0.0; 4],
    })
}

pub fn steering_reposition_energy(
    from_mode: LocomotionMode,
    to_mode: LocomotionMode,
    config: &RoverConfig,
    power: &PowerModelParams,
) -> Result<Reposition> {
    Ok(steering_reposition(
        &mode_steering_angles(from_mode, config)?,
        &mode_steering_angles(to_mode, config)?,
        config,
        power,
    ))
}
