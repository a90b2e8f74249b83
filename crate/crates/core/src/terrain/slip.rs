use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::rover::{BodyTwist, LocomotionMode};

/// Terrain and slip parameters. Efficiencies are achieved/commanded yaw-rate ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainParams {
    pub slope_deg: f64,
    pub skid_rotation_efficiency: f64,
    pub point_turn_efficiency: f64,
    pub longitudinal_slip_ratio: f64,
    /// Relative std of multiplicative noise on the achieved twist.
    pub noise_std: f64,
    pub rng_seed: u64,
    /// Extra resisting force (N) from a payload or excavation tool; 0 disables it.
    pub drawbar_force: f64,
}

impl Default for TerrainParams {
    fn default() -> Self {
        TerrainParams {
            slope_deg: 0.0,
            skid_rotation_efficiency: 0.75,
            point_turn_efficiency: 1.0,
            longitudinal_slip_ratio: 0.05,
            noise_std: 0.0,
            rng_seed: 0,
            drawbar_force: 0.0,
        }
    }
}

impl TerrainParams {
    /// No slip, no noise.
    pub fn ideal() -> Self {
        TerrainParams {
            skid_rotation_efficiency: 1.0,
            point_turn_efficiency: 1.0,
            longitudinal_slip_ratio: 0.0,
            ..Default::default()
        }
    }

    pub fn slope(&self) -> f64 {
        self.slope_deg.to_radians()
    }

    pub fn validate(self) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let eff_ok = |e: f64| e > 0.0 && e <= 1.0;
        if !(self.slope_deg >= 0.0 && self.slope_deg < 90.0) {
            return bad("slope must be within [0, 90) degrees");
        }
        if !eff_ok(self.skid_rotation_efficiency) || !eff_ok(self.point_turn_efficiency) {
            return bad("efficiencies must be within (0, 1]");
        }
        if !(self.longitudinal_slip_ratio >= 0.0 && self.longitudinal_slip_ratio < 1.0) {
            return bad("longitudinal slip ratio must be within [0, 1)");
        }
        if !(self.noise_std >= 0.0) || !(self.drawbar_force >= 0.0) {
            return bad("noise and drawbar force must be non-negative");
        }
        Ok(self)
    }

    pub(crate) fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let d = TerrainParams::default();
        TerrainParams {
            slope_deg: kv.take("slope_deg", d.slope_deg)?,
            skid_rotation_efficiency: kv.take("skid_rotation_efficiency", d.skid_rotation_efficiency)?,
            point_turn_efficiency: kv.take("point_turn_efficiency", d.point_turn_efficiency)?,
            longitudinal_slip_ratio: kv.take("longitudinal_slip_ratio", d.longitudinal_slip_ratio)?,
            noise_std: kv.take("noise_std", d.noise_std)?,
            rng_seed: kv.take("rng_seed", d.rng_seed)?,
            drawbar_force: kv.take("drawbar_force", d.drawbar_force)?,
        }
        .validate()
    }
}

/// Twist the ground actually delivers for a commanded twist, without noise.
pub fn apply_slip(cmd: BodyTwist, mode: LocomotionMode, terrain: &TerrainParams) -> BodyTwist {
    let linear = 1.0 - terrain.longitudinal_slip_ratio;
    let yaw = match mode {
        LocomotionMode::SkidSteer => terrain.skid_rotation_efficiency,
        LocomotionMode::PointTurn => terrain.point_turn_efficiency,
        LocomotionMode::Ackermann | LocomotionMode::Crab => 1.0,
    };
    BodyTwist::new(cmd.vx * linear, cmd.vy * linear, cmd.wz * yaw)
}

/// [`apply_slip`] plus seeded zero-mean noise, reproducible for a given `rng_seed`.
#[derive(Debug, Clone)]
pub struct SlipSampler {
    terrain: TerrainParams,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl SlipSampler {
    pub fn new(terrain: TerrainParams) -> Self {
        let noise = (terrain.noise_std > 0.0)
            .then(|| Normal::new(0.0, terrain.noise_std).expect("validated std"));
        SlipSampler {
            rng: ChaCha8Rng::seed_from_u64(terrain.rng_seed),
            terrain,
            noise,
        }
    }

    pub fn sample(&mut self, cmd: BodyTwist, mode: LocomotionMode) -> BodyTwist {
        let achieved = apply_slip(cmd, mode, &self.terrain);
        match &self.noise {
            None => achieved,
            Some(n) => {
                let mut jitter = || 1.0 + n.sample(&mut self.rng);
                BodyTwist::new(achieved.vx * jitter(), achieved.vy * jitter(), achieved.wz * jitter())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn skid_loses_a_quarter_of_yaw() {
        let out = apply_slip(BodyTwist::new(0.0, 0.0, 0.1), LocomotionMode::SkidSteer, &TerrainParams::default());
        assert!((out.wz - 0.075).abs() < 1e-15);
    }

    #[test]
    fn point_turn_keeps_yaw() {
        let out = apply_slip(BodyTwist::new(0.0, 0.0, 0.1), LocomotionMode::PointTurn, &TerrainParams::default());
        assert_eq!(out.wz, 0.1);
    }

    #[test]
    fn zero_in_zero_out() {
        let noisy = TerrainParams {
            noise_std: 0.2,
            ..Default::default()
        };
        let mut sampler = SlipSampler::new(noisy);
        for mode in LocomotionMode::ALL {
            assert_eq!(apply_slip(BodyTwist::ZERO, mode, &noisy), BodyTwist::ZERO);
            assert_eq!(sampler.sample(BodyTwist::ZERO, mode), BodyTwist::ZERO);
        }
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let terrain = TerrainParams {
            noise_std: 0.05,
            rng_seed: 42,
            ..Default::default()
        };
        let draw = || {
            let mut s = SlipSampler::new(terrain);
            (0..10)
                .map(|_| s.sample(BodyTwist::new(0.06, 0.0, 0.1), LocomotionMode::Ackermann))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
        assert_ne!(draw()[0], draw()[1]);
    }

    #[test]
    fn validation() {
        assert!(TerrainParams { skid_rotation_efficiency: 0.0, ..Default::default() }.validate().is_err());
        assert!(TerrainParams { slope_deg: 90.0, ..Default::default() }.validate().is_err());
        assert!(TerrainParams::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn ideal_terrain_is_identity(vx in -1.0f64..1.0, vy in -1.0f64..1.0, wz in -1.0f64..1.0, m in 0usize..4) {
            let cmd = BodyTwist::new(vx, vy, wz);
            prop_assert_eq!(apply_slip(cmd, LocomotionMode::ALL[m], &TerrainParams::ideal()), cmd);
        }
    }
}
