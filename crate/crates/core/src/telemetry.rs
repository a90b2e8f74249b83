//! Telemetry files: motion capture, actuator logs, joined telemetry and CoT tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kinematics::{forward_odometry, wrap_angle, Pose2};
use crate::rover::{LocomotionMode, RoverConfig, WheelCommand, WheelId};
use crate::terrain::{ActuatorSample, CotRow, TelemetryRecord, ACTUATOR_NAMES};

pub const MOCAP_HEADER: &str = "t,x,y,z,qw,qx,qy,qz,marker";
pub const ACTUATOR_HEADER: &str = "t,actuator,voltage,current,measurement";
pub const COT_TABLE_HEADER: &str = "mode,slope_deg,velocity_mps,cot";

const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MocapRecord {
    pub t: f64,
    pub position: [f64; 3],
    /// (w, x, y, z), unit norm.
    pub orientation: [f64; 4],
    pub marker: String,
}

impl MocapRecord {
    /// Rotation about world z.
    pub fn heading(&self) -> f64 {
        let [w, x, y, z] = self.orientation;
        (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &str) -> Result<()> {
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != expected {
        return Err(Error::parse(1, format!("expected header `{expected}`")));
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn field(record: &csv::StringRecord, i: usize, line: usize) -> Result<f64> {
    let raw = &record[i];
    if raw.is_empty() {
        return Ok(f64::NAN);
    }
    raw.parse()
        .map_err(|_| Error::parse(line, format!("invalid number `{raw}`")))
}

fn finite(record: &csv::StringRecord, i: usize, line: usize) -> Result<f64> {
    let v = field(record, i, line)?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("missing or non-finite value in column {}", i + 1)));
    }
    Ok(v)
}

pub fn parse_mocap_csv(path: impl AsRef<Path>) -> Result<Vec<MocapRecord>> {
    parse_mocap_str(&std::fs::read_to_string(path)?)
}

pub fn parse_mocap_str(text: &str) -> Result<Vec<MocapRecord>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, MOCAP_HEADER)?;
    let mut out: Vec<MocapRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let n = |i| finite(&rec, i, line);
        let q = [n(4)?, n(5)?, n(6)?, n(7)?];
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnitQuaternion(line));
        }
        let t = n(0)?;
        if out.last().is_some_and(|p| t < p.t) {
            return Err(Error::parse(line, format!("time {t} goes backwards")));
        }
        out.push(MocapRecord {
            t,
            position: [n(1)?, n(2)?, n(3)?],
            orientation: q,
            marker: rec[8].to_string(),
        });
    }
    Ok(out)
}

pub fn format_mocap_csv(records: &[MocapRecord]) -> String {
    let mut s = format!("{MOCAP_HEADER}\n");
    for r in records {
        let [x, y, z] = r.position;
        let [qw, qx, qy, qz] = r.orientation;
        let _ = writeln!(s, "{:.6},{x:.6},{y:.6},{z:.6},{qw:.9},{qx:.9},{qy:.9},{qz:.9},{}", r.t, r.marker);
    }
    s
}

/// One actuator sample. `measurement` is rad/s for drives and rad for steering units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorRecord {
    pub t: f64,
    /// Index into [`ACTUATOR_NAMES`].
    pub actuator: usize,
    pub voltage: f64,
    pub current: f64,
    pub measurement: f64,
}

pub fn actuator_index(name: &str) -> Option<usize> {
    ACTUATOR_NAMES.iter().position(|n| *n == name)
}

pub fn parse_actuator_csv(path: impl AsRef<Path>) -> Result<Vec<ActuatorRecord>> {
    parse_actuator_str(&std::fs::read_to_string(path)?)
}

pub fn parse_actuator_str(text: &str) -> Result<Vec<ActuatorRecord>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, ACTUATOR_HEADER)?;
    let mut last_t = [f64::NEG_INFINITY; 8];
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let actuator = actuator_index(&rec[1])
            .ok_or_else(|| Error::parse(line, format!("unknown actuator `{}`", &rec[1])))?;
        let t = finite(&rec, 0, line)?;
        if t < last_t[actuator] {
            return Err(Error::parse(line, format!("time {t} goes backwards for {}", &rec[1])));
        }
        last_t[actuator] = t;
        out.push(ActuatorRecord {
            t,
            actuator,
            voltage: finite(&rec, 2, line)?,
            current: finite(&rec, 3, line)?,
            measurement: finite(&rec, 4, line)?,
        });
    }
    Ok(out)
}

pub fn format_actuator_csv(records: &[ActuatorRecord]) -> String {
    let mut s = format!("{ACTUATOR_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{:.6},{},{:.6},{:.6},{:.6}",
            r.t, ACTUATOR_NAMES[r.actuator], r.voltage, r.current, r.measurement
        );
    }
    s
}

/// Actuator log of a telemetry series, one row per actuator per record.
pub fn actuator_records(telemetry: &[TelemetryRecord]) -> Vec<ActuatorRecord> {
    let mut out = Vec::with_capacity(telemetry.len() * 8);
    for r in telemetry {
        for (i, a) in r.actuators.iter().enumerate() {
            out.push(ActuatorRecord {
                t: r.t,
                actuator: i,
                voltage: a.voltage,
                current: a.current,
                measurement: if i < 4 { r.drive_speeds[i] } else { r.steering_angles[i - 4] },
            });
        }
    }
    out
}

/// Motion-capture log of a telemetry series with the marker at height `z`.
pub fn mocap_records(telemetry: &[TelemetryRecord], z: f64, marker: &str) -> Vec<MocapRecord> {
    telemetry
        .iter()
        .map(|r| {
            let (s, c) = (0.5 * r.pose.heading).sin_cos();
            MocapRecord {
                t: r.t,
                position: [r.pose.x, r.pose.y, z],
                orientation: [c, 0.0, 0.0, s],
                marker: marker.to_string(),
            }
        })
        .collect()
}

/// Actuator samples on one clock with the mocap interpolated onto it.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSample {
    pub t: f64,
    /// Marker x, y, z and heading; `None` inside a mocap dropout.
    pub mocap: Option<([f64; 3], f64)>,
    pub actuators: [ActuatorSample; 8],
    pub measurements: [f64; 8],
}

/// Groups the actuator log by timestamp and interpolates the mocap linearly onto it.
/// Samples whose bracketing mocap rows are more than `max_gap` apart, or outside the
/// mocap range, become holes.
pub fn align_series(mocap: &[MocapRecord], actuators: &[ActuatorRecord], max_gap: f64) -> Result<Vec<AlignedSample>> {
    let (Some(m0), Some(m1)) = (mocap.first(), mocap.last()) else {
        return Err(Error::NoTemporalOverlap);
    };
    let mut sorted: Vec<&ActuatorRecord> = actuators.iter().collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.actuator.cmp(&b.actuator)));
    let (Some(a0), Some(a1)) = (sorted.first(), sorted.last()) else {
        return Err(Error::NoTemporalOverlap);
    };
    if a1.t < m0.t || a0.t > m1.t {
        return Err(Error::NoTemporalOverlap);
    }
    let mut out: Vec<AlignedSample> = Vec::new();
    for rec in sorted {
        if out.last().is_none_or(|s| s.t != rec.t) {
            out.push(AlignedSample {
                t: rec.t,
                mocap: interpolate(mocap, rec.t, max_gap),
                actuators: [ActuatorSample::default(); 8],
                measurements: [f64::NAN; 8],
            });
        }
        let s = out.last_mut().expect("pushed above");
        s.actuators[rec.actuator] = ActuatorSample {
            voltage: rec.voltage,
            current: rec.current,
        };
        s.measurements[rec.actuator] = rec.measurement;
    }
    Ok(out)
}

fn interpolate(mocap: &[MocapRecord], t: f64, max_gap: f64) -> Option<([f64; 3], f64)> {
    let i = mocap.partition_point(|m| m.t < t);
    if i < mocap.len() && mocap[i].t == t {
        return Some((mocap[i].position, mocap[i].heading()));
    }
    if i == 0 || i == mocap.len() {
        return None;
    }
    let (a, b) = (&mocap[i - 1], &mocap[i]);
    if b.t - a.t > max_gap {
        return None;
    }
    let f = (t - a.t) / (b.t - a.t);
    let p = [0, 1, 2].map(|k| a.position[k] + f * (b.position[k] - a.position[k]));
    let ha = a.heading();
    Some((p, ha + f * wrap_angle(b.heading() - ha)))
}

/// Builds telemetry from aligned samples. Odometry comes from the measured wheel speeds
/// and steering angles under `mode`; holes carry NaN poses. Headings are unwrapped.
pub fn aligned_to_telemetry(samples: &[AlignedSample], mode: LocomotionMode, config: &RoverConfig) -> Vec<TelemetryRecord> {
    let mut prev_heading: Option<f64> = None;
    samples
        .iter()
        .map(|s| {
            let speeds = [0, 1, 2, 3].map(|i| s.measurements[i]);
            let angles = [0, 1, 2, 3].map(|i| s.measurements[4 + i]);
            let cmds = WheelId::ALL.map(|w| WheelCommand::new(w, speeds[w.index()], angles[w.index()]));
            let odo = if cmds.iter().all(|c| c.drive_speed.is_finite() && c.steering_angle.is_finite()) {
                forward_odometry(&cmds, mode, config)
            } else {
                Default::default()
            };
            let pose = match s.mocap {
                Some((p, h)) => {
                    let h = match prev_heading {
                        Some(prev) => prev + wrap_angle(h - prev),
                        None => h,
                    };
                    prev_heading = Some(h);
                    Pose2 { x: p[0], y: p[1], heading: h }
                }
                None => Pose2 {
                    x: f64::NAN,
                    y: f64::NAN,
                    heading: f64::NAN,
                },
            };
            TelemetryRecord {
                t: s.t,
                pose,
                odo_twist: odo,
                commanded_twist: odo,
                actuators: s.actuators,
                drive_speeds: speeds,
                steering_angles: angles,
            }
        })
        .collect()
}

pub fn telemetry_header() -> String {
    let mut cols: Vec<String> = ["t", "x", "y", "heading", "odo_vx", "odo_vy", "odo_wz", "cmd_vx", "cmd_vy", "cmd_wz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for name in ACTUATOR_NAMES {
        cols.push(format!("{name}_v"));
        cols.push(format!("{name}_i"));
    }
    for w in WheelId::ALL {
        cols.push(format!("speed_{}", w.short_name()));
    }
    for w in WheelId::ALL {
        cols.push(format!("angle_{}", w.short_name()));
    }
    cols.join(",")
}

fn num(s: &mut String, v: f64) {
    if v.is_finite() {
        let _ = write!(s, "{v:.6}");
    }
}

/// Telemetry CSV, six decimals, empty fields for NaN.
pub fn format_telemetry_csv(records: &[TelemetryRecord]) -> String {
    let mut s = telemetry_header();
    s.push('\n');
    for r in records {
        let mut vals = vec![
            r.t,
            r.pose.x,
            r.pose.y,
            r.pose.heading,
            r.odo_twist.vx,
            r.odo_twist.vy,
            r.odo_twist.wz,
            r.commanded_twist.vx,
            r.commanded_twist.vy,
            r.commanded_twist.wz,
        ];
        for a in &r.actuators {
            vals.push(a.voltage);
            vals.push(a.current);
        }
        vals.extend(r.drive_speeds);
        vals.extend(r.steering_angles);
        for (i, v) in vals.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            num(&mut s, *v);
        }
        s.push('\n');
    }
    s
}

pub fn parse_telemetry_csv(path: impl AsRef<Path>) -> Result<Vec<TelemetryRecord>> {
    parse_telemetry_str(&std::fs::read_to_string(path)?)
}

pub fn parse_telemetry_str(text: &str) -> Result<Vec<TelemetryRecord>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &telemetry_header())?;
    let mut out: Vec<TelemetryRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let f = |i| field(&rec, i, line);
        let t = finite(&rec, 0, line)?;
        if out.last().is_some_and(|p| t <= p.t) {
            return Err(Error::parse(line, format!("time {t} is not increasing")));
        }
        let mut r = TelemetryRecord {
            t,
            pose: Pose2 {
                x: f(1)?,
                y: f(2)?,
                heading: f(3)?,
            },
            ..Default::default()
        };
        r.odo_twist = crate::rover::BodyTwist::new(f(4)?, f(5)?, f(6)?);
        r.commanded_twist = crate::rover::BodyTwist::new(f(7)?, f(8)?, f(9)?);
        for k in 0..8 {
            r.actuators[k] = ActuatorSample {
                voltage: finite(&rec, 10 + 2 * k, line)?,
                current: finite(&rec, 11 + 2 * k, line)?,
            };
        }
        for k in 0..4 {
            r.drive_speeds[k] = f(26 + k)?;
            r.steering_angles[k] = f(30 + k)?;
        }
        out.push(r);
    }
    Ok(out)
}

pub fn parse_cot_table(text: &str) -> Result<Vec<CotRow>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, COT_TABLE_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        out.push(CotRow::new(&rec[0], finite(&rec, 1, line)?, finite(&rec, 2, line)?, finite(&rec, 3, line)?));
    }
    Ok(out)
}

pub fn format_cot_table(rows: &[CotRow]) -> String {
    let mut s = format!("{COT_TABLE_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.label, r.slope_deg, r.velocity, r.cot);
    }
    s
}
