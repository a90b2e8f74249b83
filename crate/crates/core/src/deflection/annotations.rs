//! Annotation CSV (`frame,cam_id,inboard,outboard,hub,x1,y1,x2,y2`), wheel model files,
//! deflection output CSV, and the per-camera estimation pipeline.
//!
//! Loops are serialised as space-separated `u:v` pixel pairs. Frames without a chord
//! leave `x1..y2` empty.

use std::collections::BTreeMap;

use nalgebra::{Point2, Vector3};

use super::camera::{CameraIntrinsics, WheelModel3D, WheelPose};
use super::fit::{fit_wheel_pose_with, initial_pose_from_loops, FitOptions, MIN_POINTS_PER_LOOP};
use super::synth::{AnnotatedFrame, FixtureTarget};
use super::{deflected_volume_fraction_with, ChordAnnotation, DeflectionEstimate, DEFAULT_ARC_STEP_DEG};
use crate::error::{Error, Result};
use crate::kv::KeyValues;

pub const ANNOTATION_HEADER: &str = "frame,cam_id,inboard,outboard,hub,x1,y1,x2,y2";
pub const DEFLECTION_HEADER: &str = "frame,volume_m3,fraction";

fn format_loop(points: &[Point2<f64>]) -> String {
    points
        .iter()
        .map(|p| format!("{:.6}:{:.6}", p.x, p.y))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_loop(text: &str, line: usize) -> Result<Vec<Point2<f64>>> {
    text.split_whitespace()
        .map(|pair| {
            let (u, v) = pair
                .split_once(':')
                .ok_or_else(|| Error::parse(line, format!("bad loop point `{pair}`")))?;
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("bad loop point `{pair}`")))
            };
            Ok(Point2::new(num(u)?, num(v)?))
        })
        .collect()
}

pub fn format_annotations(frames: &[AnnotatedFrame]) -> String {
    let mut out = String::from(ANNOTATION_HEADER);
    out.push('\n');
    for f in frames {
        let chord = match &f.chord {
            Some(c) => format!("{:.6},{:.6},{:.6},{:.6}", c.a.x, c.a.y, c.b.x, c.b.y),
            None => ",,,".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f.frame,
            f.cam_id,
            format_loop(&f.loops[0]),
            format_loop(&f.loops[1]),
            format_loop(&f.loops[2]),
            chord
        ));
    }
    out
}

pub fn parse_annotations(text: &str) -> Result<Vec<AnnotatedFrame>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != ANNOTATION_HEADER {
        return Err(Error::parse(1, format!("expected header `{ANNOTATION_HEADER}`")));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let int = |i: usize| {
            record[i]
                .parse::<usize>()
                .map_err(|_| Error::parse(line, format!("invalid integer `{}`", &record[i])))
        };
        let chord_fields: Vec<&str> = (5..9).map(|i| &record[i]).collect();
        let chord = if chord_fields.iter().all(|s| s.is_empty()) {
            None
        } else {
            let v: Vec<f64> = chord_fields
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::parse(line, format!("invalid chord coordinate `{s}`")))
                })
                .collect::<Result<_>>()?;
            Some(ChordAnnotation::new(Point2::new(v[0], v[1]), Point2::new(v[2], v[3])))
        };
        out.push(AnnotatedFrame {
            frame: int(0)?,
            cam_id: int(1)? as u32,
            loops: [
                parse_loop(&record[2], line)?,
                parse_loop(&record[3], line)?,
                parse_loop(&record[4], line)?,
            ],
            chord,
        });
    }
    Ok(out)
}

pub fn format_targets(targets: &[FixtureTarget]) -> String {
    let mut out = String::from("frame,cam_id,fraction\n");
    for t in targets {
        out.push_str(&format!("{},{},{:.9}\n", t.frame, t.cam_id, t.fraction));
    }
    out
}

pub fn parse_targets(text: &str) -> Result<Vec<FixtureTarget>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = || Error::parse(line, "malformed target row");
        out.push(FixtureTarget {
            frame: record[0].parse().map_err(|_| bad())?,
            cam_id: record[1].parse().map_err(|_| bad())?,
            fraction: record[2].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

pub fn format_deflection_csv(series: &[DeflectionEstimate]) -> String {
    let mut out = String::from(DEFLECTION_HEADER);
    out.push('\n');
    for e in series {
        out.push_str(&format!("{},{:.9},{:.6}\n", e.frame, e.volume_m3, e.fraction));
    }
    out
}

/// Settings read from a wheel model file alongside the geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelFile {
    pub model: WheelModel3D,
    pub arc_step_deg: f64,
    pub smoothing_window: usize,
    /// Pose-fit iteration cap per frame.
    pub max_iterations: usize,
    /// Starting pose for the first frame of every camera; estimated from the loops if absent.
    pub guess: Option<WheelPose>,
}

impl ModelFile {
    pub fn new(model: WheelModel3D) -> Self {
        ModelFile {
            model,
            arc_step_deg: DEFAULT_ARC_STEP_DEG,
            smoothing_window: 9,
            max_iterations: FitOptions::default().max_iterations,
            guess: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let model = WheelModel3D {
            radius: kv.take("radius", 0.0)?,
            width: kv.take("width", 0.0)?,
            hub_radius: kv.take("hub_radius", 0.0)?,
        }
        .validate()?;
        let arc_step_deg: f64 = kv.take("arc_step_deg", DEFAULT_ARC_STEP_DEG)?;
        if !(arc_step_deg > 0.0) {
            return Err(Error::InvalidConfig("arc_step_deg must be positive".into()));
        }
        let smoothing_window = kv.take("smoothing_window", 9)?;
        let max_iterations = kv.take("max_iterations", FitOptions::default().max_iterations)?;
        let keys = ["guess_rx", "guess_ry", "guess_rz", "guess_tx", "guess_ty", "guess_tz"];
        let values: Vec<Option<f64>> = keys
            .iter()
            .map(|k| kv.take(k, f64::NAN).map(|v| (!v.is_nan()).then_some(v)))
            .collect::<Result<_>>()?;
        let guess = match values.iter().filter(|v| v.is_some()).count() {
            0 => None,
            6 => {
                let v: Vec<f64> = values.into_iter().flatten().collect();
                Some(WheelPose::from_rotation_vector(
                    Vector3::new(v[0], v[1], v[2]),
                    Vector3::new(v[3], v[4], v[5]),
                ))
            }
            _ => return Err(Error::InvalidConfig("pose guess needs all of guess_r*/guess_t*".into())),
        };
        kv.finish()?;
        Ok(ModelFile {
            model,
            arc_step_deg,
            smoothing_window,
            max_iterations,
            guess,
        })
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            max_iterations: self.max_iterations,
            ..Default::default()
        }
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = format!(
            "radius = {}\nwidth = {}\nhub_radius = {}\narc_step_deg = {}\nsmoothing_window = {}\nmax_iterations = {}\n",
            self.model.radius,
            self.model.width,
            self.model.hub_radius,
            self.arc_step_deg,
            self.smoothing_window,
            self.max_iterations
        );
        if let Some(g) = &self.guess {
            let r = g.rotation.scaled_axis();
            let t = g.translation;
            s.push_str(&format!(
                "guess_rx = {}\nguess_ry = {}\nguess_rz = {}\nguess_tx = {}\nguess_ty = {}\nguess_tz = {}\n",
                r.x, r.y, r.z, t.x, t.y, t.z
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct CameraSeries {
    pub cam_id: u32,
    pub estimates: Vec<DeflectionEstimate>,
    pub fit_rms_px: Vec<f64>,
}

/// Fits every frame's pose (warm-started from the previous frame of the same camera) and
/// estimates its deflection. Frames without a chord count as undeflected.
pub fn estimate_series(
    frames: &[AnnotatedFrame],
    settings: &ModelFile,
    cam: &CameraIntrinsics,
    options: &FitOptions,
) -> Result<Vec<CameraSeries>> {
    let mut by_cam: BTreeMap<u32, Vec<&AnnotatedFrame>> = BTreeMap::new();
    for f in frames {
        by_cam.entry(f.cam_id).or_default().push(f);
    }
    let mut out = Vec::new();
    for (cam_id, mut list) in by_cam {
        list.sort_by_key(|f| f.frame);
        let mut previous: Option<WheelPose> = settings.guess;
        let mut estimates = Vec::with_capacity(list.len());
        let mut fit_rms_px = Vec::with_capacity(list.len());
        for f in list {
            let has_loops = f.loops.iter().all(|l| l.len() >= MIN_POINTS_PER_LOOP);
            if !has_loops {
                if f.chord.is_some() {
                    return Err(Error::TooFewPoints {
                        needed: MIN_POINTS_PER_LOOP,
                        got: f.loops.iter().map(Vec::len).min().unwrap_or(0),
                    });
                }
                estimates.push(DeflectionEstimate::undeflected(f.frame));
                fit_rms_px.push(f64::NAN);
                continue;
            }
            let guess = match previous {
                Some(p) => p,
                None => initial_pose_from_loops(&f.loops, &settings.model, cam)?,
            };
            let fit = fit_wheel_pose_with(&f.loops, &settings.model, cam, &guess, options)?;
            previous = Some(fit.pose);
            fit_rms_px.push(fit.rms_px);
            estimates.push(match &f.chord {
                Some(chord) => deflected_volume_fraction_with(
                    f.frame,
                    &settings.model,
                    &fit.pose,
                    cam,
                    chord,
                    settings.arc_step_deg.to_radians(),
                ),
                None => DeflectionEstimate::undeflected(f.frame),
            });
        }
        out.push(CameraSeries {
            cam_id,
            estimates,
            fit_rms_px,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deflection::synth::{fixture_camera, fixture_model, obstacle_fixture};

    #[test]
    fn annotation_round_trip() {
        let fixture = obstacle_fixture().unwrap();
        let text = format_annotations(&fixture.frames[..30]);
        let parsed = parse_annotations(&text).unwrap();
        assert_eq!(format_annotations(&parsed), text);
        assert_eq!(parsed.len(), 30);
    }

    #[test]
    fn malformed_annotation_line() {
        let text = format!("{ANNOTATION_HEADER}\n1,0,1:2 3:4,1:2,1:2,,,,\n2,0,1:x,,,,,,\n");
        let err = parse_annotations(&text).unwrap_err().to_string();
        assert!(err.starts_with("line 3"), "{err}");
    }

    #[test]
    fn model_file_round_trip() {
        let mut settings = ModelFile::new(fixture_model());
        assert_eq!(ModelFile::parse(&settings.to_kv_string()).unwrap(), settings);
        settings.guess = Some(WheelPose::from_rotation_vector(
            Vector3::new(0.1, 0.2, 0.3),
            Vector3::new(0.0, 0.0, 1.0),
        ));
        let back = ModelFile::parse(&settings.to_kv_string()).unwrap();
        assert!((back.guess.unwrap().translation - settings.guess.unwrap().translation).norm() < 1e-12);
        assert!(ModelFile::parse("radius = 0.15\nwidth = 0.1\nhub_radius = 0.05\nguess_rx = 1\n").is_err());
    }

    #[test]
    fn chordless_frames_are_undeflected() {
        let fixture = obstacle_fixture().unwrap();
        let frames: Vec<_> = fixture
            .frames
            .iter()
            .filter(|f| f.cam_id == 0 && (120..=130).contains(&f.frame))
            .cloned()
            .collect();
        let series = estimate_series(
            &frames,
            &ModelFile::new(fixture_model()),
            &fixture_camera(),
            &FitOptions::default(),
        )
        .unwrap();
        assert_eq!(series.len(), 1);
        for e in &series[0].estimates {
            if e.frame >= 125 {
                assert_eq!(e.fraction, 0.0);
            } else {
                assert!(e.fraction > 0.0);
            }
        }
    }
}
