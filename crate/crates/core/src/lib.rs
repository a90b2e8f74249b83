//! Locomotion modelling and analysis for a four-wheel, individually steered rover.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN on purpose

pub mod error;
pub mod kinematics;
pub mod kv;
pub mod rover;

pub use error::{Error, Result};
pub mod deflection;
pub mod metrics;
pub mod presets;
pub mod telemetry;
pub mod terrain;
