//! Body twist ↔ wheel command mapping for the four locomotion modes, odometry,
//! ICR recovery and slip-free pose integration.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Point2, Vector2};

use crate::error::{Error, Result};
use crate::rover::{BodyTwist, LocomotionMode, RoverConfig, WheelCommand, WheelCommands, WheelId};

const ZERO_TOL: f64 = 1e-12;

/// Instantaneous centre of rotation in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IcrResult {
    Finite(Point2<f64>),
    AtInfinity,
}

pub fn inverse_kinematics(
    twist: BodyTwist,
    mode: LocomotionMode,
    config: &RoverConfig,
) -> Result<WheelCommands> {
    check_mode_twist(twist, mode)?;
    let r = config.wheel_radius;
    let mut out = [WheelCommand::neutral(WheelId::FrontLeft); 4];
    for wheel in WheelId::ALL {
        let p = config.position(wheel);
        let (speed, angle) = match mode {
            LocomotionMode::SkidSteer => {
                // differential drive: only the longitudinal component is commanded
                ((twist.vx - twist.wz * p.y) / r, 0.0)
            }
            _ => {
                let (vx, vy) = twist.velocity_at(&p);
                let v = vx.hypot(vy);
                if v <= ZERO_TOL {
                    (0.0, 0.0)
                } else {
                    (v / r, vy.atan2(vx))
                }
            }
        };
        let (speed, angle) = normalize_steering(wheel, speed, angle, config.steering_limit)?;
        out[wheel.index()] = WheelCommand::new(wheel, speed, angle);
    }
    Ok(out)
}

fn check_mode_twist(twist: BodyTwist, mode: LocomotionMode) -> Result<()> {
    if !twist.is_finite() {
        return Err(Error::InvalidConfig("non-finite twist".into()));
    }
    match mode {
        LocomotionMode::Ackermann | LocomotionMode::SkidSteer if twist.vy.abs() > ZERO_TOL => {
            Err(Error::LateralVelocityUnsupported(mode))
        }
        LocomotionMode::Crab if twist.wz.abs() > ZERO_TOL => Err(Error::YawRateUnsupported(mode)),
        LocomotionMode::PointTurn if twist.linear_speed() > ZERO_TOL => {
            Err(Error::TranslationUnsupported(mode))
        }
        _ => Ok(()),
    }
}

/// Folds an angle into [-limit, limit] using (angle ± π, -speed) when needed.
fn normalize_steering(wheel: WheelId, speed: f64, angle: f64, limit: f64) -> Result<(f64, f64)> {
    let mut angle = wrap_angle(angle);
    let mut speed = speed;
    if angle.abs() > limit {
        angle -= PI.copysign(angle);
        speed = -speed;
    }
    if angle.abs() > limit + 1e-12 {
        return Err(Error::SteeringLimitExceeded {
            wheel,
            angle_deg: angle.to_degrees(),
        });
    }
    Ok((speed, angle))
}

/// Wraps into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

fn contact_velocity(cmd: &WheelCommand, r: f64) -> Vector2<f64> {
    let (s, c) = cmd.steering_angle.sin_cos();
    Vector2::new(c, s) * (cmd.drive_speed * r)
}

/// Least-squares body twist from measured wheel speeds and steering angles.
///
/// Skid steering trusts only each wheel's rolling direction (the wheels scrub sideways by
/// design); every other mode uses the full no-slip contact velocity.
pub fn forward_odometry(
    commands: &WheelCommands,
    mode: LocomotionMode,
    config: &RoverConfig,
) -> BodyTwist {
    match mode {
        LocomotionMode::SkidSteer => fit_rolling_twist(commands, config),
        _ => {
            let mut a = DMatrix::zeros(8, 3);
            let mut b = DVector::zeros(8);
            for (i, cmd) in commands.iter().enumerate() {
                let p = config.position(cmd.wheel_id);
                let v = contact_velocity(cmd, config.wheel_radius);
                a[(2 * i, 0)] = 1.0;
                a[(2 * i, 2)] = -p.y;
                b[2 * i] = v.x;
                a[(2 * i + 1, 1)] = 1.0;
                a[(2 * i + 1, 2)] = p.x;
                b[2 * i + 1] = v.y;
            }
            solve_min_norm(a, b)
        }
    }
}

/// Minimum-norm twist explaining only the rolling-direction speed of each wheel.
pub fn fit_rolling_twist(commands: &WheelCommands, config: &RoverConfig) -> BodyTwist {
    let mut a = DMatrix::zeros(4, 3);
    let mut b = DVector::zeros(4);
    for (i, cmd) in commands.iter().enumerate() {
        let p = config.position(cmd.wheel_id);
        let (s, c) = cmd.steering_angle.sin_cos();
        a[(i, 0)] = c;
        a[(i, 1)] = s;
        a[(i, 2)] = p.x * s - p.y * c;
        b[i] = cmd.drive_speed * config.wheel_radius;
    }
    solve_min_norm(a, b)
}

/// Per-wheel sideways sliding speed (m/s) when the body moves with [`fit_rolling_twist`].
/// Zero for any kinematically consistent command set.
pub fn lateral_slip_speeds(commands: &WheelCommands, config: &RoverConfig) -> [f64; 4] {
    let twist = fit_rolling_twist(commands, config);
    commands.map(|cmd| {
        let (vx, vy) = twist.velocity_at(&config.position(cmd.wheel_id));
        let (s, c) = cmd.steering_angle.sin_cos();
        (-s * vx + c * vy).abs()
    })
}

fn solve_min_norm(a: DMatrix<f64>, b: DVector<f64>) -> BodyTwist {
    let x = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .expect("svd computed with both U and V");
    BodyTwist::new(x[0], x[1], x[2])
}

/// Least-squares intersection of the four wheel axes, with the RMS point-to-axis distance.
pub fn icr_of(commands: &WheelCommands, config: &RoverConfig) -> (IcrResult, f64) {
    let mut normal = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    let mut lines = Vec::with_capacity(4);
    for cmd in commands {
        let (s, c) = cmd.steering_angle.sin_cos();
        // axis through the wheel, perpendicular to the rolling direction u: u·q = u·p
        let u = Vector2::new(c, s);
        let offset = u.dot(&config.position(cmd.wheel_id).coords);
        normal += u * u.transpose();
        rhs += u * offset;
        lines.push((u, offset));
    }
    let eig = normal.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 1e-12 * hi.max(1.0) {
        return (IcrResult::AtInfinity, 0.0);
    }
    let q = normal.try_inverse().expect("checked eigenvalues") * rhs;
    let mean_sq = lines
        .iter()
        .map(|(u, d)| (u.dot(&q) - d).powi(2))
        .sum::<f64>()
        / lines.len() as f64;
    (IcrResult::Finite(Point2::from(q)), mean_sq.sqrt())
}

/// World-frame planar pose. Heading is kept continuous (not wrapped).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub fn position(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    /// World position of a body-frame point.
    pub fn transform(&self, p: &Point2<f64>) -> Point2<f64> {
        let (s, c) = self.heading.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Exact motion under a constant body twist for `dt` seconds.
    pub fn integrate(&self, twist: &BodyTwist, dt: f64) -> Pose2 {
        let dtheta = twist.wz * dt;
        let (dx, dy) = if dtheta.abs() < 1e-12 {
            (twist.vx * dt, twist.vy * dt)
        } else {
            let (s, c) = dtheta.sin_cos();
            (
                (twist.vx * s - twist.vy * (1.0 - c)) / twist.wz,
                (twist.vx * (1.0 - c) + twist.vy * s) / twist.wz,
            )
        };
        let (hs, hc) = self.heading.sin_cos();
        Pose2 {
            x: self.x + hc * dx - hs * dy,
            y: self.y + hs * dx + hc * dy,
            heading: self.heading + dtheta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistSegment {
    pub duration: f64,
    pub twist: BodyTwist,
    pub mode: LocomotionMode,
}

impl TwistSegment {
    pub fn new(duration: f64, twist: BodyTwist, mode: LocomotionMode) -> Self {
        TwistSegment {
            duration,
            twist,
            mode,
        }
    }
}

pub const PROFILE_HEADER: &str = "duration_s,vx,vy,wz,mode";

/// Reads a `duration_s,vx,vy,wz,mode` CSV. `first_line` is the file line of the header,
/// so errors point into an enclosing document.
pub fn parse_twist_profile(text: &str, first_line: usize) -> Result<Vec<TwistSegment>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != PROFILE_HEADER {
        return Err(Error::parse(
            first_line,
            format!("expected header `{PROFILE_HEADER}`"),
        ));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = first_line - 1 + record.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("invalid number `{}`", &record[i])))
        };
        let mode = record[4]
            .parse::<LocomotionMode>()
            .map_err(|e| Error::parse(line, e))?;
        out.push(TwistSegment::new(
            num(0)?,
            BodyTwist::new(num(1)?, num(2)?, num(3)?),
            mode,
        ));
    }
    Ok(out)
}

pub fn format_twist_profile(profile: &[TwistSegment]) -> String {
    let mut s = String::from(PROFILE_HEADER);
    s.push('\n');
    for seg in profile {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            seg.duration, seg.twist.vx, seg.twist.vy, seg.twist.wz, seg.mode
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub t: f64,
    pub pose: Pose2,
    pub marker: Point2<f64>,
}

/// Splits a duration into steps of `step`, the last one possibly shorter.
pub(crate) fn step_times(duration: f64, step: f64) -> impl Iterator<Item = (f64, f64)> {
    let n = ((duration / step) - 1e-9).ceil().max(1.0) as usize;
    (0..n).map(move |k| {
        let t0 = k as f64 * step;
        let t1 = if k + 1 == n { duration } else { (k + 1) as f64 * step };
        (t0, t1 - t0)
    })
}

/// Integrates a piecewise-constant, slip-free twist profile and reports the marker track.
pub fn simulate_pose_track(
    profile: &[TwistSegment],
    config: &RoverConfig,
    marker_offset: Point2<f64>,
    step: f64,
) -> Result<Vec<TrackSample>> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::NonPositiveStep(step));
    }
    let mut pose = Pose2::default();
    let mut t0 = 0.0;
    let mut out = vec![TrackSample {
        t: 0.0,
        pose,
        marker: pose.transform(&marker_offset),
    }];
    for seg in profile {
        if seg.duration.is_nan() || seg.duration <= 0.0 {
            return Err(Error::NonPositiveDuration(seg.duration));
        }
        inverse_kinematics(seg.twist, seg.mode, config)?;
        for (t, dt) in step_times(seg.duration, step) {
            pose = pose.integrate(&seg.twist, dt);
            out.push(TrackSample {
                t: t0 + t + dt,
                pose,
                marker: pose.transform(&marker_offset),
            });
        }
        t0 += seg.duration;
    }
    Ok(out)
}
