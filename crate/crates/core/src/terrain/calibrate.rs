//! Fits the drive power model to measured cost-of-transport rows.
//!
//! Straight driving at speed `v` up slope `θ` gives
//! `CoT = 4·idle/(mgv) + c_rr·cosθ/η + 4·k·v/(η·m·g) + 4·hold/(mgv) + sinθ/η`,
//! linear in `(idle, c_rr, k)` once `η` and the steering hold power are fixed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kinematics::inverse_kinematics;
use crate::rover::{BodyTwist, LocomotionMode, RoverConfig};

use super::power::{drive_power, PowerModelParams};
use super::slip::TerrainParams;

const FREE_PARAMS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CotRow {
    pub label: String,
    pub slope_deg: f64,
    pub velocity: f64,
    pub cot: f64,
}

impl CotRow {
    pub fn new(label: impl Into<String>, slope_deg: f64, velocity: f64, cot: f64) -> Self {
        CotRow {
            label: label.into(),
            slope_deg,
            velocity,
            cot,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: PowerModelParams,
    /// measured − predicted, per input row.
    pub residuals: Vec<f64>,
}

impl Calibration {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Cost of transport the power model predicts for straight driving.
pub fn predict_cot(
    slope_deg: f64,
    velocity: f64,
    config: &RoverConfig,
    power: &PowerModelParams,
    terrain: &TerrainParams,
) -> Result<f64> {
    if !(velocity > 0.0) {
        return Err(Error::ZeroVelocity);
    }
    let cmds = inverse_kinematics(BodyTwist::new(velocity, 0.0, 0.0), LocomotionMode::Ackermann, config)?;
    let terrain = TerrainParams { slope_deg, ..*terrain };
    let p = drive_power(&cmds, &terrain, config, power, &[false; 4]).total();
    Ok(p / (config.weight() * velocity))
}

/// Non-negative least-squares fit of idle power, rolling resistance and the quadratic
/// speed coefficient. Efficiency, steering and scrub parameters are taken from `base`.
pub fn calibrate_power(rows: &[CotRow], config: &RoverConfig, base: &PowerModelParams) -> Result<Calibration> {
    if rows.len() < FREE_PARAMS {
        return Err(Error::UnderdeterminedCalibration {
            rows: rows.len(),
            params: FREE_PARAMS,
        });
    }
    let base = base.validate()?;
    let mg = config.weight();
    let eta = base.drivetrain_efficiency;
    let mut a = DMatrix::zeros(rows.len(), FREE_PARAMS);
    let mut b = DVector::zeros(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if !(row.velocity > 0.0) {
            return Err(Error::ZeroVelocity);
        }
        let th = row.slope_deg.to_radians();
        let mgv = mg * row.velocity;
        a[(i, 0)] = 4.0 / mgv;
        a[(i, 1)] = th.cos() / eta;
        a[(i, 2)] = 4.0 * row.velocity / (eta * mg);
        b[i] = row.cot - 4.0 * base.steering_hold_power / mgv - th.sin() / eta;
    }
    let x = nnls_enumerate(&a, &b);
    let params = PowerModelParams {
        idle_power_per_drive: x[0],
        rolling_resistance_coeff: x[1],
        speed_quadratic_coeff: x[2],
        ..base
    };
    let residuals = rows
        .iter()
        .map(|r| Ok(r.cot - predict_cot(r.slope_deg, r.velocity, config, &params, &TerrainParams::default())?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Calibration { params, residuals })
}

/// Exact NNLS for a handful of columns: the optimum is the unconstrained fit on its own
/// support, so the best feasible subset fit is the answer.
fn nnls_enumerate(a: &DMatrix<f64>, b: &DVector<f64>) -> Vec<f64> {
    let n = a.ncols();
    let mut best = (b.norm_squared(), vec![0.0; n]);
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
        let Ok(sol) = sub.clone().svd(true, true).solve(b, 1e-14) else {
            continue;
        };
        if sol.iter().any(|v| *v < 0.0) {
            continue;
        }
        let cost = (&sub * &sol - b).norm_squared();
        if cost < best.0 * (1.0 - 1e-12) {
            let mut x = vec![0.0; n];
            for (k, j) in cols.iter().enumerate() {
                x[*j] = sol[k];
            }
            best = (cost, x);
        }
    }
    best.1
}
