//! Wheel pose from labelled image loops.
//!
//! Residuals are signed normal distances from each observed point to the projection of
//! its circle, with the closest curve parameter re-solved at every evaluation. The
//! rotation is updated on the right with no component about the axle, since the
//! coaxial circles carry no information about spin.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Point2, Rotation3, SMatrix, SVector, Vector2, Vector3};

use super::camera::{CameraIntrinsics, WheelCircle, WheelModel3D, WheelPose};
use crate::error::{Error, Result};

pub const MIN_POINTS_PER_LOOP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Dense samples per circle used to seed the closest-point search.
    pub curve_samples: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            curve_samples: 720,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseFit {
    pub pose: WheelPose,
    pub rms_px: f64,
    pub iterations: usize,
}

type Jac = SVector<f64, 5>;

struct Evaluation {
    residuals: Vec<f64>,
    jacobian: Vec<Jac>,
}

impl Evaluation {
    fn cost(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }
}

/// Levenberg-Marquardt refinement. Converges from guesses within 20° of the true
/// orientation and 20% of the true translation; [`initial_pose_from_loops`] gets there
/// from the loops alone.
pub fn fit_wheel_pose(
    observed: &[Vec<Point2<f64>>; 3],
    model: &WheelModel3D,
    cam: &CameraIntrinsics,
    initial_guess: &WheelPose,
) -> Result<PoseFit> {
    fit_wheel_pose_with(observed, model, cam, initial_guess, &FitOptions::default())
}

pub fn fit_wheel_pose_with(
    observed: &[Vec<Point2<f64>>; 3],
    model: &WheelModel3D,
    cam: &CameraIntrinsics,
    initial_guess: &WheelPose,
    options: &FitOptions,
) -> Result<PoseFit> {
    if let Some(short) = observed.iter().find(|l| l.len() < MIN_POINTS_PER_LOOP) {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS_PER_LOOP,
            got: short.len(),
        });
    }
    let n_points: usize = observed.iter().map(Vec::len).sum();
    let mut pose = *initial_guess;
    let mut eval = evaluate(observed, model, cam, &pose, options).ok_or(Error::WheelBehindCamera)?;
    let mut cost = eval.cost();
    let mut lambda = 1e-3;
    let rms = |c: f64| (c / n_points as f64).sqrt();

    for iteration in 1..=options.max_iterations {
        let mut jtj = SMatrix::<f64, 5, 5>::zeros();
        let mut jte = Jac::zeros();
        for (row, e) in eval.jacobian.iter().zip(&eval.residuals) {
            jtj += row * row.transpose();
            jte += row * *e;
        }
        if cost <= 1e-26 * n_points as f64 {
            return Ok(finish(pose, initial_guess, rms(cost), iteration));
        }

        let mut accepted = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for i in 0..5 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-jte))) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = apply_step(&pose, &step);
            match evaluate(observed, model, cam, &candidate, options) {
                Some(next) if next.cost() < cost => {
                    let small = step.norm() < 1e-12;
                    let stalled = cost - next.cost() <= 1e-15 * cost;
                    pose = candidate;
                    cost = next.cost();
                    eval = next;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if small || stalled {
                        return Ok(finish(pose, initial_guess, rms(cost), iteration));
                    }
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !accepted {
            // no downhill step left at any damping: local minimum
            return Ok(finish(pose, initial_guess, rms(cost), iteration));
        }
    }
    Err(Error::NonConvergence {
        iterations: options.max_iterations,
        rms_px: rms(cost),
        best: Box::new(canonical_spin(&pose, initial_guess)),
    })
}

fn finish(pose: WheelPose, guess: &WheelPose, rms_px: f64, iterations: usize) -> PoseFit {
    PoseFit {
        pose: canonical_spin(&pose, guess),
        rms_px,
        iterations,
    }
}

/// Re-expresses the pose so the wheel +y axis is the guess's +y projected off the axle.
fn canonical_spin(pose: &WheelPose, guess: &WheelPose) -> WheelPose {
    let axle = pose.axle();
    let reference = guess.rotation * Vector3::y();
    let mut y = reference - axle * reference.dot(&axle);
    if y.norm() < 1e-9 {
        y = pose.rotation * Vector3::y();
    }
    let y = y.normalize();
    let x = y.cross(&axle);
    let rotation = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, axle]));
    WheelPose::new(rotation, pose.translation)
}

fn apply_step(pose: &WheelPose, step: &Jac) -> WheelPose {
    let spin = Rotation3::new(Vector3::new(step[0], step[1], 0.0));
    WheelPose::new(
        pose.rotation * spin,
        pose.translation + Vector3::new(step[2], step[3], step[4]),
    )
}

fn evaluate(
    observed: &[Vec<Point2<f64>>; 3],
    model: &WheelModel3D,
    cam: &CameraIntrinsics,
    pose: &WheelPose,
    options: &FitOptions,
) -> Option<Evaluation> {
    let m = options.curve_samples.max(16);
    let dphi = TAU / m as f64;
    let mut residuals = Vec::new();
    let mut jacobian = Vec::new();
    for (which, points) in WheelCircle::ALL.into_iter().zip(observed) {
        let project = |phi: f64| cam.project(&pose.to_camera(&model.point(which, phi)));
        let dense: Vec<Point2<f64>> = (0..m)
            .map(|k| project(k as f64 * dphi))
            .collect::<Option<_>>()?;
        for obs in points {
            let seed = dense
                .iter()
                .enumerate()
                .map(|(k, p)| (k, (p - obs).norm_squared()))
                .fold((0, f64::MAX), |b, c| if c.1 < b.1 { c } else { b })
                .0;
            let phi = golden_min(
                |phi| project(phi).map_or(f64::MAX, |p| (p - obs).norm_squared()),
                seed as f64 * dphi - dphi,
                seed as f64 * dphi + dphi,
            );

            let local = model.point(which, phi);
            let pc = pose.to_camera(&local);
            let px = cam.project(&pc)?;
            let jp = cam.projection_jacobian(&pc);
            let tangent = jp * (pose.rotation * model.tangent(which, phi));
            let normal = Vector2::new(-tangent.y, tangent.x);
            let normal = if normal.norm() > 0.0 {
                normal.normalize()
            } else {
                (obs - px).try_normalize(0.0).unwrap_or_else(Vector2::x)
            };
            residuals.push(normal.dot(&(obs - px)));

            let g = -(jp.transpose() * normal);
            let d_wx = pose.rotation * Vector3::x().cross(&local);
            let d_wy = pose.rotation * Vector3::y().cross(&local);
            jacobian.push(Jac::new(g.dot(&d_wx), g.dot(&d_wy), g.x, g.y, g.z));
        }
    }
    Some(Evaluation {
        residuals,
        jacobian,
    })
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..48 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Rough pose from the loop shapes alone: depth from the inboard loop's apparent size,
/// axle tilt from its eccentricity, and the tilt sign from where the outboard loop sits.
pub fn initial_pose_from_loops(
    observed: &[Vec<Point2<f64>>; 3],
    model: &WheelModel3D,
    cam: &CameraIntrinsics,
) -> Result<WheelPose> {
    let inboard = &observed[0];
    let outboard = &observed[1];
    if inboard.len() < MIN_POINTS_PER_LOOP || outboard.len() < MIN_POINTS_PER_LOOP {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS_PER_LOOP,
            got: inboard.len().min(outboard.len()),
        });
    }
    let centroid = |pts: &[Point2<f64>]| {
        pts.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / pts.len() as f64
    };
    let c_in = centroid(inboard);
    let c_out = centroid(outboard);
    let mut cov = nalgebra::Matrix2::zeros();
    for p in inboard {
        let d = p.coords - c_in;
        cov += d * d.transpose();
    }
    cov /= inboard.len() as f64;
    let eig = cov.symmetric_eigen();
    let (imax, imin) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let major = (2.0 * eig.eigenvalues[imax]).sqrt();
    let minor = (2.0 * eig.eigenvalues[imin].max(0.0)).sqrt();
    if !(major > 0.0) {
        return Err(Error::InvalidConfig("inboard loop has no extent".into()));
    }
    let minor_dir = eig.eigenvectors.column(imin).into_owned();

    let f = 0.5 * (cam.fx + cam.fy);
    let ray = cam.back_project(&Point2::from(c_in)).normalize();
    let centre = ray * (f * model.radius / major) / ray.z.max(1e-6);
    let view = centre.normalize();
    let tilt = (minor / major).clamp(0.0, 1.0).acos();
    let side = Vector3::new(minor_dir.x, minor_dir.y, 0.0);
    let side = (side - view * side.dot(&view)).try_normalize(1e-12).unwrap_or_else(Vector3::x);

    let camera_down = Vector3::y();
    let pose_for = |axle: Vector3<f64>| {
        let mut y = camera_down - axle * camera_down.dot(&axle);
        if y.norm() < 1e-9 {
            y = Vector3::x() - axle * axle.x;
        }
        let y = y.normalize();
        let x = y.cross(&axle);
        WheelPose::new(
            Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, axle])),
            centre,
        )
    };
    [1.0, -1.0]
        .into_iter()
        .map(|s| pose_for(view * tilt.cos() + side * (s * tilt.sin())))
        .filter_map(|pose| {
            let out_centre = cam.project(&pose.to_camera(&Vector3::new(0.0, 0.0, model.width)))?;
            Some(((out_centre.coords - c_out).norm(), pose))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, pose)| pose)
        .ok_or(Error::WheelBehindCamera)
}
