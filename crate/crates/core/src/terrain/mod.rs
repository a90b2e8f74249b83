//! Regolith slip, actuator power and full traverse simulation.

pub mod calibrate;
pub mod power;
pub mod slip;
pub mod traverse;

pub use calibrate::{calibrate_power, predict_cot, Calibration, CotRow};
pub use power::{
    drive_power, mode_steering_angles, steering_reposition, steering_reposition_energy, PowerBreakdown,
    PowerModelParams, Reposition,
};
pub use slip::{apply_slip, SlipSampler, TerrainParams};
pub use traverse::{simulate_traverse, ActuatorSample, Scenario, TelemetryRecord, ACTUATOR_NAMES, BUS_VOLTAGE};
