//! Evaluation quantities computed from telemetry, real or simulated.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kinematics::wrap_angle;
use crate::rover::RoverConfig;
use crate::terrain::TelemetryRecord;

/// `P / (m·g·v)`.
pub fn cost_of_transport(power: f64, mass: f64, gravity: f64, velocity: f64) -> Result<f64> {
    if !(velocity > 0.0) {
        return Err(Error::ZeroVelocity);
    }
    if !(mass > 0.0 && gravity > 0.0) {
        return Err(Error::InvalidConfig("mass and gravity must be positive".into()));
    }
    Ok(power / (mass * gravity * velocity))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CotReport {
    pub label: String,
    pub slope_deg: f64,
    pub mass: f64,
    pub gravity: f64,
    pub mean_velocity: f64,
    pub mean_power: f64,
    pub cost_of_transport: f64,
}

impl CotReport {
    pub fn labelled(mut self, label: impl Into<String>, slope_deg: f64) -> Self {
        self.label = label.into();
        self.slope_deg = slope_deg;
        self
    }
}

/// Mean of the encoder rim speeds.
pub fn encoder_speed(record: &TelemetryRecord, config: &RoverConfig) -> f64 {
    record.drive_speeds.iter().map(|w| w.abs()).sum::<f64>() * config.wheel_radius / 4.0
}

/// Time-weighted mean power and encoder speed over the intervals where the wheels turn.
pub fn mean_cot(records: &[TelemetryRecord], config: &RoverConfig) -> Result<CotReport> {
    if records.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "cost of transport needs at least 2 records, got {}",
            records.len()
        )));
    }
    let (mut time, mut energy, mut distance) = (0.0, 0.0, 0.0);
    for w in records.windows(2) {
        let dt = w[1].t - w[0].t;
        let v = encoder_speed(&w[0], config);
        if v > 1e-12 && dt > 0.0 {
            time += dt;
            energy += w[0].power() * dt;
            distance += v * dt;
        }
    }
    if time == 0.0 {
        return Err(Error::ZeroVelocity);
    }
    let (mean_power, mean_velocity) = (energy / time, distance / time);
    Ok(CotReport {
        label: String::new(),
        slope_deg: 0.0,
        mass: config.mass,
        gravity: config.gravity,
        mean_velocity,
        mean_power,
        cost_of_transport: cost_of_transport(mean_power, config.mass, config.gravity, mean_velocity)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct YawEnergyCurve {
    pub label: String,
    /// (cumulative |yaw| deg, cumulative energy J), both non-decreasing.
    pub points: Vec<(f64, f64)>,
}

impl YawEnergyCurve {
    /// Energy at `yaw_deg`, linear between samples. Where several samples share a yaw
    /// (reposition at rest) the latest one wins, so `energy_at(0.0)` includes it.
    /// `None` beyond the end of the curve.
    pub fn energy_at(&self, yaw_deg: f64) -> Option<f64> {
        let i = self.points.partition_point(|p| p.0 < yaw_deg);
        if i == self.points.len() {
            let last = self.points.last()?;
            return (yaw_deg <= last.0 + 1e-6).then_some(last.1);
        }
        let (y1, e1) = self.points[i];
        if y1 == yaw_deg || i == 0 {
            let j = i + self.points[i..].partition_point(|p| p.0 <= y1) - 1;
            return Some(self.points[j].1);
        }
        let (y0, e0) = self.points[i - 1];
        Some(e0 + (e1 - e0) * (yaw_deg - y0) / (y1 - y0))
    }

    pub fn max_yaw(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.0)
    }
}

/// Integrated electrical energy against unwrapped cumulative ground-truth |yaw|.
pub fn energy_vs_yaw(records: &[TelemetryRecord], label: impl Into<String>) -> YawEnergyCurve {
    let mut points = Vec::with_capacity(records.len());
    let (mut yaw, mut energy) = (0.0, 0.0);
    if !records.is_empty() {
        points.push((0.0, 0.0));
    }
    for w in records.windows(2) {
        yaw += wrap_angle(w[1].pose.heading - w[0].pose.heading).abs().to_degrees();
        energy += w[0].power().max(0.0) * (w[1].t - w[0].t);
        points.push((yaw, energy));
    }
    YawEnergyCurve {
        label: label.into(),
        points,
    }
}

/// Yaw angles in `(0, max_deg]` where `a − b` changes sign, probed every `step_deg`.
pub fn curve_crossings(a: &YawEnergyCurve, b: &YawEnergyCurve, max_deg: f64, step_deg: f64) -> Vec<f64> {
    let diff = |y: f64| Some(a.energy_at(y)? - b.energy_at(y)?);
    let n = (max_deg / step_deg).round() as usize;
    let mut out = Vec::new();
    let mut prev = diff(0.0);
    for k in 1..=n {
        let y = k as f64 * step_deg;
        let cur = diff(y);
        if let (Some(p), Some(c)) = (prev, cur) {
            if p.signum() != c.signum() && p != 0.0 {
                // bisect inside the bracket
                let (mut lo, mut hi) = (y - step_deg, y);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    match diff(mid) {
                        Some(d) if d.signum() == p.signum() => lo = mid,
                        _ => hi = mid,
                    }
                }
                out.push(0.5 * (lo + hi));
            }
        }
        prev = cur;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyOptions {
    /// Width of the central window for the ground-truth derivative, s.
    pub window: f64,
    /// Window-averaged odometry yaw rates below this (rad/s) are gaps.
    pub min_odo_rate: f64,
    pub clamp: f64,
}

impl Default for EfficiencyOptions {
    fn default() -> Self {
        EfficiencyOptions {
            window: 0.5,
            min_odo_rate: 1e-3,
            clamp: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSample {
    pub t: f64,
    /// `None` is a gap.
    pub ratio: Option<f64>,
}

impl RatioSample {
    pub fn clamped(&self, limit: f64) -> Option<f64> {
        self.ratio.map(|r| r.clamp(-limit, limit))
    }
}

/// Ground-truth yaw rate over a central window divided by the odometry yaw rate
/// averaged over the same window. NaN headings mark holes; windows touching them are gaps.
pub fn angular_speed_efficiency(
    t: &[f64],
    heading: &[f64],
    odo_wz: &[f64],
    opts: &EfficiencyOptions,
) -> Result<Vec<RatioSample>> {
    if t.len() != heading.len() || t.len() != odo_wz.len() {
        return Err(Error::InsufficientSamples("series lengths differ".into()));
    }
    if t.len() < 2 {
        return Err(Error::InsufficientSamples("efficiency needs at least 2 samples".into()));
    }
    let half = 0.5 * opts.window;
    let eps = 1e-9;
    let mut out = Vec::with_capacity(t.len());
    for k in 0..t.len() {
        let a = t.partition_point(|x| *x < t[k] - half - eps);
        let b = t.partition_point(|x| *x <= t[k] + half + eps) - 1;
        let ratio = (|| {
            if b <= a {
                return None;
            }
            let span = &heading[a..=b];
            if span.iter().any(|h| h.is_nan()) || odo_wz[a..b].iter().any(|w| w.is_nan()) {
                return None;
            }
            let dt = t[b] - t[a];
            let gt_turn: f64 = span.windows(2).map(|w| wrap_angle(w[1] - w[0])).sum();
            let odo_turn: f64 = (a..b).map(|j| odo_wz[j] * (t[j + 1] - t[j])).sum();
            let odo_rate = odo_turn / dt;
            (odo_rate.abs() >= opts.min_odo_rate).then(|| (gt_turn / dt) / odo_rate)
        })();
        out.push(RatioSample { t: t[k], ratio });
    }
    Ok(out)
}

pub fn telemetry_efficiency(records: &[TelemetryRecord], opts: &EfficiencyOptions) -> Result<Vec<RatioSample>> {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let h: Vec<f64> = records.iter().map(|r| r.pose.heading).collect();
    let w: Vec<f64> = records.iter().map(|r| r.odo_twist.wz).collect();
    angular_speed_efficiency(&t, &h, &w, opts)
}

/// Median of the non-gap ratios.
pub fn median_ratio(samples: &[RatioSample]) -> Option<f64> {
    let mut r: Vec<f64> = samples.iter().filter_map(|s| s.ratio).collect();
    if r.is_empty() {
        return None;
    }
    r.sort_by(f64::total_cmp);
    let n = r.len();
    Some(if n % 2 == 1 { r[n / 2] } else { 0.5 * (r[n / 2 - 1] + r[n / 2]) })
}

/// `(encoder − mocap) / encoder`; non-positive encoder speeds are gaps.
pub fn longitudinal_slip(encoder_v: &[f64], mocap_v: &[f64]) -> Result<Vec<Option<f64>>> {
    if encoder_v.len() != mocap_v.len() {
        return Err(Error::InsufficientSamples("series lengths differ".into()));
    }
    Ok(encoder_v
        .iter()
        .zip(mocap_v)
        .map(|(e, m)| (*e > 0.0 && m.is_finite()).then(|| (e - m) / e))
        .collect())
}

/// Window-averaged encoder and marker speeds per record, for slip analysis.
pub fn telemetry_speeds(records: &[TelemetryRecord], config: &RoverConfig, window: f64) -> (Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let half = 0.5 * window;
    let mut enc = Vec::with_capacity(records.len());
    let mut moc = Vec::with_capacity(records.len());
    for k in 0..records.len() {
        let a = t.partition_point(|x| *x < t[k] - half - 1e-9);
        let b = t.partition_point(|x| *x <= t[k] + half + 1e-9) - 1;
        if b <= a {
            enc.push(f64::NAN);
            moc.push(f64::NAN);
            continue;
        }
        let dt = t[b] - t[a];
        let dist: f64 = (a..b).map(|j| encoder_speed(&records[j], config) * (t[j + 1] - t[j])).sum();
        let (pa, pb) = (records[a].pose, records[b].pose);
        enc.push(dist / dt);
        moc.push((pb.x - pa.x).hypot(pb.y - pa.y) / dt);
    }
    (enc, moc)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn table2_csv(reports: &[CotReport], references: &[Option<f64>]) -> String {
    let mut s = String::from("# table2 cost of transport\nmode,slope_deg,velocity_mps,mean_power_w,cot,reference_cot\n");
    for (i, r) in reports.iter().enumerate() {
        let reference = references.get(i).copied().flatten();
        let _ = writeln!(
            s,
            "{},{:.1},{:.6},{:.6},{:.6},{}",
            r.label, r.slope_deg, r.mean_velocity, r.mean_power, r.cost_of_transport, opt(reference)
        );
    }
    s
}

/// Every curve as `mode,yaw_deg,energy_j`, resampled on a 1 degree grid.
pub fn fig3_csv(curves: &[YawEnergyCurve]) -> String {
    let mut s = String::from("# fig3 energy per degree of yaw\nmode,yaw_deg,energy_j\n");
    for c in curves {
        let n = c.max_yaw().floor() as usize;
        for deg in 0..=n {
            if let Some(e) = c.energy_at(deg as f64) {
                let _ = writeln!(s, "{},{},{:.6}", c.label, deg, e);
            }
        }
    }
    s
}

pub fn fig4_csv(samples: &[RatioSample], clamp: f64) -> String {
    let mut s = String::from("# fig4 ground truth / odometry angular speed\nt_s,ratio,ratio_clamped\n");
    for r in samples {
        let _ = writeln!(s, "{:.6},{},{}", r.t, opt(r.ratio), opt(r.clamped(clamp)));
    }
    s
}

pub fn slip_csv(t: &[f64], encoder_v: &[f64], mocap_v: &[f64], slip: &[Option<f64>]) -> String {
    let mut s = String::from("# longitudinal slip\nt_s,encoder_v,mocap_v,slip\n");
    for i in 0..t.len() {
        let f = |x: f64| if x.is_finite() { format!("{x:.6}") } else { String::new() };
        let _ = writeln!(s, "{:.6},{},{},{}", t[i], f(encoder_v[i]), f(mocap_v[i]), opt(slip[i]));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::TwistSegment;
    use crate::rover::{BodyTwist, LocomotionMode};
    use crate::terrain::{simulate_traverse, steering_reposition_energy, ActuatorSample, PowerModelParams, Scenario};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn constant(power: f64, v: f64, n: usize, dt: f64) -> Vec<TelemetryRecord> {
        let r = RoverConfig::default().wheel_radius;
        (0..n)
            .map(|k| {
                let mut rec = TelemetryRecord {
                    t: k as f64 * dt,
                    drive_speeds: [v / r; 4],
                    ..Default::default()
                };
                rec.actuators[0] = ActuatorSample {
                    voltage: 24.0,
                    current: power / 24.0,
                };
                rec
            })
            .collect()
    }

    fn rotation(mode: LocomotionMode, deg: f64) -> Vec<TelemetryRecord> {
        let seg = TwistSegment::new(deg.to_radians() / 0.1, BodyTwist::new(0.0, 0.0, 0.1), mode);
        simulate_traverse(&Scenario::new("rot", vec![seg])).unwrap()
    }

    #[test]
    fn cot_examples() {
        assert_abs_diff_eq!(cost_of_transport(54.39, 84.0, 9.81, 0.06).unwrap(), 1.100, epsilon = 1e-3);
        assert_eq!(cost_of_transport(0.0, 84.0, 9.81, 0.06).unwrap(), 0.0);
        let err = cost_of_transport(1.0, 84.0, 9.81, 0.0).unwrap_err();
        assert_eq!(err.to_string(), "undefined at zero velocity");
    }

    #[test]
    fn mean_cot_constant_signal() {
        let rep = mean_cot(&constant(54.39, 0.06, 500, 0.01), &RoverConfig::default()).unwrap();
        let oracle = 54.39 / (84.0 * 9.81 * 0.06);
        assert_abs_diff_eq!(rep.cost_of_transport, oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(rep.cost_of_transport, 1.100, epsilon = 1e-3);
        let again = cost_of_transport(rep.mean_power, rep.mass, rep.gravity, rep.mean_velocity).unwrap();
        assert_eq!(again, rep.cost_of_transport);
    }

    #[test]
    fn mean_cot_errors() {
        let one = constant(10.0, 0.06, 1, 0.01);
        assert!(mean_cot(&one, &RoverConfig::default())
            .unwrap_err()
            .to_string()
            .contains("insufficient samples"));
        assert!(matches!(
            mean_cot(&constant(10.0, 0.0, 10, 0.01), &RoverConfig::default()),
            Err(Error::ZeroVelocity)
        ));
    }

    #[test]
    fn simulated_flat_run_matches_reference() {
        let seg = TwistSegment::new(20.0, BodyTwist::new(0.03, 0.0, 0.0), LocomotionMode::Ackermann);
        let recs = simulate_traverse(&Scenario::new("flat", vec![seg])).unwrap();
        let rep = mean_cot(&recs, &RoverConfig::default()).unwrap();
        assert!((rep.cost_of_transport - 0.646).abs() <= 0.15, "{}", rep.cost_of_transport);
    }

    #[test]
    fn point_turn_curve_starts_with_reposition() {
        let c = RoverConfig::default();
        let curve = energy_vs_yaw(&rotation(LocomotionMode::PointTurn, 90.0), "point_turn");
        let rep = steering_reposition_energy(LocomotionMode::SkidSteer, LocomotionMode::PointTurn, &c, &PowerModelParams::default())
            .unwrap();
        assert_abs_diff_eq!(curve.energy_at(0.0).unwrap(), rep.energy, epsilon = 1e-9);
        assert!(rep.energy > 0.0);
        let skid = energy_vs_yaw(&rotation(LocomotionMode::SkidSteer, 90.0), "skid");
        assert_eq!(skid.energy_at(0.0).unwrap(), 0.0);
    }

    #[test]
    fn energy_is_linear_in_power() {
        let recs = rotation(LocomotionMode::PointTurn, 30.0);
        let doubled: Vec<_> = recs
            .iter()
            .map(|r| {
                let mut r = *r;
                for a in &mut r.actuators {
                    a.current *= 2.0;
                }
                r
            })
            .collect();
        let (a, b) = (energy_vs_yaw(&recs, "a"), energy_vs_yaw(&doubled, "b"));
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.0, q.0);
            assert_abs_diff_eq!(2.0 * p.1, q.1, epsilon = 1e-9);
        }
    }

    #[test]
    fn curves_are_monotone() {
        let c = energy_vs_yaw(&rotation(LocomotionMode::SkidSteer, 60.0), "s");
        assert!(c.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    }

    #[test]
    fn single_crossover() {
        let pt = energy_vs_yaw(&rotation(LocomotionMode::PointTurn, 360.0), "pt");
        let sk = energy_vs_yaw(&rotation(LocomotionMode::SkidSteer, 480.0), "sk");
        let x = curve_crossings(&sk, &pt, 360.0, 0.5);
        assert_eq!(x.len(), 1, "{x:?}");
        assert!(sk.energy_at(360.0).unwrap() > pt.energy_at(360.0).unwrap());
    }

    #[test]
    fn efficiency_identity_and_skid() {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 0.01).collect();
        let w: Vec<f64> = t.iter().map(|x| 0.1 + 0.02 * x.sin()).collect();
        let mut h = vec![0.0];
        for k in 1..t.len() {
            h.push(h[k - 1] + w[k - 1] * 0.01);
        }
        let ratios = angular_speed_efficiency(&t, &h, &w, &EfficiencyOptions::default()).unwrap();
        for r in &ratios {
            assert_abs_diff_eq!(r.ratio.unwrap(), 1.0, epsilon = 1e-6);
        }
        let skid = telemetry_efficiency(&rotation(LocomotionMode::SkidSteer, 180.0), &EfficiencyOptions::default()).unwrap();
        assert_abs_diff_eq!(median_ratio(&skid).unwrap(), 0.75, epsilon = 1e-6);
        let pt = telemetry_efficiency(&rotation(LocomotionMode::PointTurn, 180.0), &EfficiencyOptions::default()).unwrap();
        assert_abs_diff_eq!(median_ratio(&pt).unwrap(), 1.0, epsilon = 1e-6);
        // the reposition phase has no odometry rotation
        assert!(pt[0].ratio.is_none());
    }

    #[test]
    fn efficiency_gaps_at_holes() {
        let t: Vec<f64> = (0..300).map(|k| k as f64 * 0.01).collect();
        let w = vec![0.1; 300];
        let mut h: Vec<f64> = t.iter().map(|x| 0.1 * x).collect();
        for x in &mut h[100..200] {
            *x = f64::NAN;
        }
        let r = angular_speed_efficiency(&t, &h, &w, &EfficiencyOptions::default()).unwrap();
        assert!(r[150].ratio.is_none());
        assert!(r[10].ratio.is_some() && r[280].ratio.is_some());
        assert!(r[80].ratio.is_none(), "window reaches into the hole");
    }

    #[test]
    fn clamp_keeps_raw() {
        let s = RatioSample { t: 0.0, ratio: Some(12.0) };
        assert_eq!(s.clamped(5.0), Some(5.0));
        assert!(fig4_csv(&[s], 5.0).contains("12.000000,5.000000"));
    }

    #[test]
    fn slip_examples() {
        let s = longitudinal_slip(&[0.06, 0.06, 0.06, 0.0], &[0.06, 0.045, 0.066, 0.01]).unwrap();
        assert_abs_diff_eq!(s[0].unwrap(), 0.0);
        assert_abs_diff_eq!(s[1].unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s[2].unwrap(), -0.1, epsilon = 1e-12);
        assert_eq!(s[3], None);
    }

    #[test]
    fn simulated_slip_matches_terrain() {
        let seg = TwistSegment::new(10.0, BodyTwist::new(0.06, 0.0, 0.0), LocomotionMode::Ackermann);
        let mut sc = Scenario::new("flat", vec![seg]);
        sc.marker_offset = nalgebra::Point2::new(0.3, 0.1);
        let recs = simulate_traverse(&sc).unwrap();
        let (e, m) = telemetry_speeds(&recs, &sc.config, 0.5);
        let slip = longitudinal_slip(&e, &m).unwrap();
        assert_abs_diff_eq!(slip[500].unwrap(), 0.05, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn cot_homogeneity(p in 0.0f64..500.0, v in 0.01f64..1.0, k in 0.1f64..10.0) {
            let base = cost_of_transport(p, 84.0, 9.81, v).unwrap();
            prop_assert!((cost_of_transport(k * p, 84.0, 9.81, v).unwrap() - k * base).abs() <= 1e-12 * (1.0 + k * base));
            prop_assert!((cost_of_transport(p, 84.0, 9.81, k * v).unwrap() - base / k).abs() <= 1e-12 * (1.0 + base));
        }
    }
}
