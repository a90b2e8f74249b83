use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::kinematics::{forward_odometry, inverse_kinematics, parse_twist_profile, step_times, Pose2, TwistSegment};
use crate::kv::KeyValues;
use crate::rover::{BodyTwist, RoverConfig, WheelCommands};

use super::power::{drive_power, steering_reposition, PowerBreakdown, PowerModelParams};
use super::slip::{SlipSampler, TerrainParams};

/// Synthetic supply voltage; only V·I is meaningful downstream.
pub const BUS_VOLTAGE: f64 = 24.0;

pub const ACTUATOR_NAMES: [&str; 8] = [
    "drive_fl", "drive_fr", "drive_rl", "drive_rr", "steer_fl", "steer_fr", "steer_rl", "steer_rr",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorSample {
    pub voltage: f64,
    pub current: f64,
}

impl ActuatorSample {
    pub fn power(&self) -> f64 {
        self.voltage * self.current
    }
}

/// One telemetry sample. Actuator values hold over `[t, t_next)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TelemetryRecord {
    pub t: f64,
    /// Ground-truth marker position and body heading.
    pub pose: Pose2,
    pub odo_twist: BodyTwist,
    pub commanded_twist: BodyTwist,
    /// Drives then steering units, in wheel order.
    pub actuators: [ActuatorSample; 8],
    pub drive_speeds: [f64; 4],
    pub steering_angles: [f64; 4],
}

impl TelemetryRecord {
    pub fn power(&self) -> f64 {
        self.actuators.iter().map(ActuatorSample::power).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Mode label for reports, e.g. `Nominal`.
    pub label: String,
    pub profile: Vec<TwistSegment>,
    pub terrain: TerrainParams,
    pub config: RoverConfig,
    pub power: PowerModelParams,
    pub marker_offset: Point2<f64>,
    pub step: f64,
    /// Measured CoT this scenario is meant to reproduce, if any.
    pub reference_cot: Option<f64>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, profile: Vec<TwistSegment>) -> Self {
        let name = name.into();
        Scenario {
            label: name.clone(),
            name,
            profile,
            terrain: TerrainParams::default(),
            config: RoverConfig::default(),
            power: PowerModelParams::default(),
            marker_offset: Point2::origin(),
            step: 0.01,
            reference_cot: None,
        }
    }

    /// Key/value header (`rover.`, `terrain.` and `power.` prefixes for the parameter
    /// groups) followed by a `[profile]` line and a twist-profile CSV.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let split = lines
            .iter()
            .position(|l| l.trim() == "[profile]")
            .ok_or_else(|| Error::parse(lines.len().max(1), "missing `[profile]` section"))?;
        let mut kv = KeyValues::parse_lines(lines[..split].iter().enumerate().map(|(i, l)| (i + 1, *l)))?;
        let mut rover_kv = kv.take_prefixed("rover");
        let config = RoverConfig::from_kv(&mut rover_kv)?;
        rover_kv.finish()?;
        let mut terrain_kv = kv.take_prefixed("terrain");
        let terrain = TerrainParams::from_kv(&mut terrain_kv)?;
        terrain_kv.finish()?;
        let mut power_kv = kv.take_prefixed("power");
        let power = PowerModelParams::from_kv(&mut power_kv)?;
        power_kv.finish()?;
        let name = kv.take_string("name").unwrap_or_else(|| "scenario".into());
        let label = kv.take_string("label").unwrap_or_else(|| name.clone());
        let step: f64 = kv.take("step", 0.01)?;
        let marker_offset = Point2::new(kv.take("marker_x", 0.0)?, kv.take("marker_y", 0.0)?);
        let reference_cot = match kv.take_string("reference_cot") {
            None => None,
            Some(v) => Some(v.parse().map_err(|_| Error::InvalidConfig(format!("invalid reference_cot `{v}`")))?),
        };
        kv.finish()?;
        if !(step > 0.0) {
            return Err(Error::NonPositiveStep(step));
        }
        let profile_text = lines[split + 1..].join("\n");
        let profile = parse_twist_profile(&profile_text, split + 2)?;
        Ok(Scenario {
            name,
            label,
            profile,
            terrain,
            config,
            power,
            marker_offset,
            step,
            reference_cot,
        })
    }
}

fn record(
    t: f64,
    pose: &Pose2,
    marker: &Point2<f64>,
    cmds: &WheelCommands,
    odo: BodyTwist,
    commanded: BodyTwist,
    power: &PowerBreakdown,
) -> TelemetryRecord {
    let m = pose.transform(marker);
    let mut actuators = [ActuatorSample::default(); 8];
    for (slot, p) in actuators.iter_mut().zip(power.drive.iter().chain(&power.steering)) {
        *slot = ActuatorSample {
            voltage: BUS_VOLTAGE,
            current: p / BUS_VOLTAGE,
        };
    }
    TelemetryRecord {
        t,
        pose: Pose2 {
            x: m.x,
            y: m.y,
            heading: pose.heading,
        },
        odo_twist: odo,
        commanded_twist: commanded,
        actuators,
        drive_speeds: cmds.map(|c| c.drive_speed),
        steering_angles: cmds.map(|c| c.steering_angle),
    }
}

/// Runs a scenario: each segment is preceded by a steering reposition (body at rest,
/// steering units moving) whenever its wheel angles differ from the current ones.
/// Odometry comes from the commanded wheel set, the pose from the slipped twist.
/// A final record closes the series at the end time.
pub fn simulate_traverse(scenario: &Scenario) -> Result<Vec<TelemetryRecord>> {
    let Scenario {
        profile,
        terrain,
        config,
        power,
        marker_offset,
        step,
        ..
    } = scenario;
    let config = config.validate()?;
    let terrain = terrain.validate()?;
    let power = power.validate()?;
    if !(*step > 0.0) {
        return Err(Error::NonPositiveStep(*step));
    }
    let mut out = Vec::new();
    if profile.is_empty() {
        return Ok(out);
    }
    let mut sampler = SlipSampler::new(terrain);
    let mut pose = Pose2::default();
    let mut t = 0.0;
    let mut angles = [0.0; 4];
    let mut last = None;
    for seg in profile {
        if seg.duration.is_nan() || seg.duration <= 0.0 {
            return Err(Error::NonPositiveDuration(seg.duration));
        }
        let cmds = inverse_kinematics(seg.twist, seg.mode, &config)?;
        let target = cmds.map(|c| c.steering_angle);
        let rep = steering_reposition(&angles, &target, &config, &power);
        if rep.duration > 0.0 {
            let start = angles;
            for (ts, _) in step_times(rep.duration, *step) {
                let f = ts / rep.duration;
                let mut moving_cmds = cmds;
                for i in 0..4 {
                    moving_cmds[i].drive_speed = 0.0;
                    moving_cmds[i].steering_angle = start[i] + f * (target[i] - start[i]);
                }
                let p = drive_power(&moving_cmds, &terrain, &config, &power, &rep.moving);
                out.push(record(t + ts, &pose, marker_offset, &moving_cmds, BodyTwist::ZERO, BodyTwist::ZERO, &p));
            }
            t += rep.duration;
        }
        angles = target;
        let odo = forward_odometry(&cmds, seg.mode, &config);
        let p = drive_power(&cmds, &terrain, &config, &power, &[false; 4]);
        for (ts, dt) in step_times(seg.duration, *step) {
            out.push(record(t + ts, &pose, marker_offset, &cmds, odo, seg.twist, &p));
            let achieved = sampler.sample(seg.twist, seg.mode);
            pose = pose.integrate(&achieved, dt);
        }
        last = Some((cmds, p));
        t += seg.duration;
    }
    if let Some((cmds, p)) = last {
        let odo = out.last().map(|r| r.odo_twist).unwrap_or_default();
        let commanded = out.last().map(|r| r.commanded_twist).unwrap_or_default();
        out.push(record(t, &pose, marker_offset, &cmds, odo, commanded, &p));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rover::LocomotionMode;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn rotation(mode: LocomotionMode, degrees: f64) -> Scenario {
        let wz = 0.1;
        let seg = TwistSegment::new(degrees.to_radians() / wz, BodyTwist::new(0.0, 0.0, wz), mode);
        Scenario::new("rot", vec![seg])
    }

    fn odo_yaw(records: &[TelemetryRecord]) -> f64 {
        records.windows(2).map(|w| w[0].odo_twist.wz * (w[1].t - w[0].t)).sum()
    }

    #[test]
    fn point_turn_half_turn() {
        let recs = simulate_traverse(&rotation(LocomotionMode::PointTurn, 180.0)).unwrap();
        let last = recs.last().unwrap();
        assert!((last.pose.heading - PI).abs().to_degrees() < 0.1);
        assert_abs_diff_eq!(last.pose.heading / odo_yaw(&recs), 1.0, epsilon = 1e-9);
        // reposition comes first with the body still
        assert_eq!(recs[0].odo_twist, BodyTwist::ZERO);
        assert!(recs[0].actuators[4].power() > 7.9);
    }

    #[test]
    fn skid_half_turn_loses_a_quarter() {
        let recs = simulate_traverse(&rotation(LocomotionMode::SkidSteer, 180.0)).unwrap();
        let gt = recs.last().unwrap().pose.heading;
        assert_abs_diff_eq!(odo_yaw(&recs).to_degrees(), 180.0, epsilon = 1e-9);
        assert_abs_diff_eq!(gt.to_degrees(), 135.0, epsilon = 1e-9);
        assert_abs_diff_eq!(gt / odo_yaw(&recs), 0.75, epsilon = 1e-6);
    }

    #[test]
    fn empty_profile_is_empty_telemetry() {
        assert!(simulate_traverse(&Scenario::new("none", vec![])).unwrap().is_empty());
    }

    #[test]
    fn time_increases_and_power_is_non_negative() {
        let mut sc = rotation(LocomotionMode::PointTurn, 90.0);
        sc.profile.push(TwistSegment::new(3.0, BodyTwist::new(0.05, 0.0, 0.0), LocomotionMode::Ackermann));
        sc.profile.push(TwistSegment::new(2.0, BodyTwist::new(0.03, 0.02, 0.0), LocomotionMode::Crab));
        let recs = simulate_traverse(&sc).unwrap();
        assert!(recs.windows(2).all(|w| w[1].t > w[0].t));
        assert!(recs.iter().all(|r| r.power() >= 0.0));
    }

    #[test]
    fn seeded_noise_is_bit_reproducible() {
        let mut sc = rotation(LocomotionMode::SkidSteer, 45.0);
        sc.terrain.noise_std = 0.1;
        sc.terrain.rng_seed = 7;
        let a = simulate_traverse(&sc).unwrap();
        let b = simulate_traverse(&sc).unwrap();
        assert_eq!(a, b);
        sc.terrain.rng_seed = 8;
        assert_ne!(a, simulate_traverse(&sc).unwrap());
    }

    #[test]
    fn kinematic_errors_propagate() {
        let sc = Scenario::new(
            "bad",
            vec![TwistSegment::new(1.0, BodyTwist::new(0.0, 0.1, 0.0), LocomotionMode::Ackermann)],
        );
        assert!(matches!(simulate_traverse(&sc), Err(Error::LateralVelocityUnsupported(_))));
    }

    #[test]
    fn scenario_file() {
        let text = "name = flat\nlabel = Nominal\nreference_cot = 1.10\nmarker_x = 0.2\n\
                    rover.mass = 80\nterrain.slope_deg = 10\npower.steering_hold_power = 0\n\
                    [profile]\nduration_s,vx,vy,wz,mode\n5,0.06,0,0,ackermann\n";
        let sc = Scenario::parse(text).unwrap();
        assert_eq!(sc.label, "Nominal");
        assert_eq!(sc.reference_cot, Some(1.10));
        assert_eq!(sc.config.mass, 80.0);
        assert_eq!(sc.terrain.slope_deg, 10.0);
        assert_eq!(sc.power.steering_hold_power, 0.0);
        assert_eq!(sc.marker_offset, Point2::new(0.2, 0.0));
        assert_eq!(sc.profile.len(), 1);

        let err = Scenario::parse("bogus = 1\n[profile]\nduration_s,vx,vy,wz,mode\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = Scenario::parse("name = x\n[profile]\nduration_s,vx,vy,wz,mode\n1,a,0,0,crab\n").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        assert!(Scenario::parse("name = x\n").is_err());
    }
}
