//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{Point2, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rover_core::deflection::{
    deflected_volume_fraction, estimate_series, fit_wheel_pose, fixture_camera, fixture_model, parse_annotations,
    parse_targets, project_wheel, smooth_deflection_series, stable_windows, CameraIntrinsics, ChordAnnotation,
    ModelFile, WheelPose, AIRBORNE_FRAMES,
};
use rover_core::kinematics::{forward_odometry, icr_of, inverse_kinematics, simulate_pose_track, IcrResult, TwistSegment};
use rover_core::metrics::{cost_of_transport, curve_crossings, energy_vs_yaw, median_ratio, telemetry_efficiency, EfficiencyOptions};
use rover_core::presets;
use rover_core::rover::{BodyTwist, LocomotionMode, RoverConfig};
use rover_core::telemetry::parse_cot_table;
use rover_core::terrain::{calibrate_power, predict_cot, simulate_traverse, CotRow, PowerModelParams, Scenario, TerrainParams};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn three_sig(x: f64) -> f64 {
    let mag = 10f64.powf(x.abs().log10().floor() - 2.0);
    (x / mag).round() * mag
}

fn cot_identity() -> Check {
    let cot = cost_of_transport(54.39, 84.0, 9.81, 0.06).map_err(|e| e.to_string())?;
    ensure((cot - 1.100).abs() <= 0.001, || format!("cot {cot}"))?;
    let rows = parse_cot_table(presets::TABLE2).map_err(|e| e.to_string())?;
    ensure(rows.len() == 8, || format!("{} rows", rows.len()))?;
    for r in &rows {
        let p = r.cot * 84.0 * 9.81 * r.velocity;
        let back = cost_of_transport(p, 84.0, 9.81, r.velocity).map_err(|e| e.to_string())?;
        ensure(three_sig(back) == three_sig(r.cot), || format!("{} @ {}: {back}", r.label, r.velocity))?;
    }
    Ok(format!("cot(54.39 W) = {cot:.4}; 8/8 rows round-trip"))
}

fn calibration_fit() -> Check {
    let config = RoverConfig::default();
    let rows = parse_cot_table(presets::TABLE2).map_err(|e| e.to_string())?;
    let flat: Vec<CotRow> = rows.into_iter().filter(|r| r.label == "Nominal" && r.slope_deg == 0.0).collect();
    let cal = calibrate_power(&flat, &config, &PowerModelParams::default()).map_err(|e| e.to_string())?;
    let worst = cal.max_abs_residual();
    ensure(flat.len() == 3 && worst <= 0.15, || format!("max residual {worst}"))?;

    let truth = PowerModelParams {
        idle_power_per_drive: 2.3,
        rolling_resistance_coeff: 0.12,
        speed_quadratic_coeff: 850.0,
        ..Default::default()
    };
    let synthetic: Vec<CotRow> = [(0.0, 0.02), (0.0, 0.045), (8.0, 0.06), (14.0, 0.03), (22.0, 0.08)]
        .iter()
        .map(|&(s, v)| CotRow::new("synthetic", s, v, predict_cot(s, v, &config, &truth, &TerrainParams::default()).unwrap()))
        .collect();
    let rec = calibrate_power(&synthetic, &config, &truth).map_err(|e| e.to_string())?.params;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let errs = [
        rel(rec.idle_power_per_drive, truth.idle_power_per_drive),
        rel(rec.rolling_resistance_coeff, truth.rolling_resistance_coeff),
        rel(rec.speed_quadratic_coeff, truth.speed_quadratic_coeff),
    ];
    let max_rel = errs.iter().cloned().fold(0.0, f64::max);
    ensure(max_rel <= 1e-6, || format!("synthetic recovery error {max_rel:e}"))?;
    Ok(format!("flat-row max |residual| = {worst:.4}; synthetic recovery rel err {max_rel:.1e}"))
}

fn rotation(mode: LocomotionMode, deg: f64) -> Scenario {
    let wz = 0.1;
    Scenario::new(
        mode.as_str(),
        vec![TwistSegment::new(deg.to_radians() / wz, BodyTwist::new(0.0, 0.0, wz), mode)],
    )
}

fn mode_efficiency() -> Check {
    let mut skid = rotation(LocomotionMode::SkidSteer, 180.0);
    skid.terrain.skid_rotation_efficiency = 0.75;
    let pt = rotation(LocomotionMode::PointTurn, 180.0);
    let eff = |sc: &Scenario| -> Result<f64, String> {
        let recs = simulate_traverse(sc).map_err(|e| e.to_string())?;
        let samples = telemetry_efficiency(&recs, &EfficiencyOptions::default()).map_err(|e| e.to_string())?;
        median_ratio(&samples).ok_or_else(|| "no ratios".to_string())
    };
    let (s, p) = (eff(&skid)?, eff(&pt)?);
    ensure((s - 0.75).abs() <= 0.01 && (p - 1.0).abs() <= 0.01, || format!("skid {s}, point turn {p}"))?;
    Ok(format!("skid {s:.4}, point turn {p:.4}"))
}

fn crossover() -> Check {
    let load = |name: &str| -> Result<Scenario, String> {
        Scenario::parse(presets::scenario(name).ok_or("missing preset")?).map_err(|e| e.to_string())
    };
    let (pt_sc, sk_sc) = (load("fig3_point_turn_360")?, load("fig3_skid_steer_360")?);
    ensure(pt_sc.power == PowerModelParams::default() && sk_sc.power == PowerModelParams::default(), || {
        "presets override power defaults".into()
    })?;
    let pt = energy_vs_yaw(&simulate_traverse(&pt_sc).map_err(|e| e.to_string())?, "point_turn");
    let sk = energy_vs_yaw(&simulate_traverse(&sk_sc).map_err(|e| e.to_string())?, "skid_steer");
    ensure(pt.max_yaw() >= 360.0 - 1e-6 && sk.max_yaw() >= 360.0 - 1e-6, || "curves shorter than 360 deg".into())?;
    let pt0 = pt.energy_at(0.0).unwrap();
    let sk0 = sk.energy_at(0.0).unwrap();
    ensure(pt0 > 0.0, || format!("point turn at 0+: {pt0}"))?;
    ensure(sk0.abs() < 1e-9, || format!("skid at 0+: {sk0}"))?;
    let xs = curve_crossings(&sk, &pt, 360.0, 0.25);
    ensure(xs.len() == 1, || format!("crossings {xs:?}"))?;
    let x = xs[0];
    let mut deg = (x / 0.25).ceil() * 0.25 + 0.25;
    while deg <= 360.0 {
        let (a, b) = (pt.energy_at(deg).unwrap(), sk.energy_at(deg).unwrap());
        ensure(a < b, || format!("point turn not lower at {deg}: {a} vs {b}"))?;
        deg += 0.25;
    }
    Ok(format!(
        "point turn starts at {pt0:.2} J, skid at {sk0:.2} J; single crossing at {x:.2} deg; at 360 deg {:.0} J vs {:.0} J",
        pt.energy_at(360.0).unwrap(),
        sk.energy_at(360.0).unwrap()
    ))
}

fn kinematics_suite() -> Check {
    let start = Instant::now();
    let c = RoverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_icr, mut worst_rt) = (0.0f64, 0.0f64);
    for k in 0..1000 {
        let (twist, mode) = if k % 2 == 0 {
            let mut wz: f64 = rng.gen_range(-0.5..0.5);
            if wz.abs() < 1e-3 {
                wz = 0.1;
            }
            (BodyTwist::new(rng.gen_range(-0.3..0.3), 0.0, wz), LocomotionMode::Ackermann)
        } else {
            (BodyTwist::new(0.0, 0.0, rng.gen_range(0.01..0.5) * if rng.gen() { 1.0 } else { -1.0 }), LocomotionMode::PointTurn)
        };
        let cmds = inverse_kinematics(twist, mode, &c).map_err(|e| format!("{twist:?}: {e}"))?;
        let (icr, res) = icr_of(&cmds, &c);
        ensure(matches!(icr, IcrResult::Finite(_)), || format!("{twist:?}: ICR at infinity"))?;
        worst_icr = worst_icr.max(res);
        let back = forward_odometry(&cmds, mode, &c);
        worst_rt = worst_rt.max((back.vx - twist.vx).abs()).max((back.vy - twist.vy).abs()).max((back.wz - twist.wz).abs());
    }
    for _ in 0..250 {
        let twist = BodyTwist::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 0.0);
        let back = forward_odometry(&inverse_kinematics(twist, LocomotionMode::Crab, &c).unwrap(), LocomotionMode::Crab, &c);
        worst_rt = worst_rt.max((back.vx - twist.vx).abs()).max((back.vy - twist.vy).abs()).max(back.wz.abs());
    }
    ensure(worst_icr < 1e-9, || format!("ICR residual {worst_icr:e}"))?;
    ensure(worst_rt < 1e-9, || format!("round trip error {worst_rt:e}"))?;

    let crab = vec![TwistSegment::new(30.0, BodyTwist::new(0.05, -0.04, 0.0), LocomotionMode::Crab)];
    let track = simulate_pose_track(&crab, &c, Point2::new(0.3, 0.1), 0.01).map_err(|e| e.to_string())?;
    ensure(track.iter().all(|s| s.pose.heading == 0.0), || "crab heading drifted".into())?;

    let offset = Point2::new(0.35, -0.12);
    let turn = vec![TwistSegment::new(40.0, BodyTwist::new(0.0, 0.0, 0.2), LocomotionMode::PointTurn)];
    let track = simulate_pose_track(&turn, &c, offset, 0.01).map_err(|e| e.to_string())?;
    let r0 = offset.coords.norm();
    let worst_r = track.iter().map(|s| (s.marker.coords.norm() - r0).abs()).fold(0.0, f64::max);
    ensure(worst_r < 1e-4, || format!("marker radius error {worst_r:e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "ICR {worst_icr:.1e} m, round trip {worst_rt:.1e}, crab drift 0, marker radius err {worst_r:.1e} m, {secs:.2} s"
    ))
}

fn segment_fraction(x: f64) -> f64 {
    (x.acos() - x * (1.0 - x * x).sqrt()) / std::f64::consts::PI
}

fn hull_oracle() -> Check {
    let model = fixture_model();
    let cam = fixture_camera();
    let z = 0.8;
    let pose = WheelPose::new(Rotation3::identity(), Vector3::new(0.0, 0.0, z));
    let chord = |h: f64| {
        let v = cam.cy + cam.fy * h / z;
        ChordAnnotation::new(Point2::new(cam.cx - 300.0, v), Point2::new(cam.cx + 300.0, v))
    };
    let mut prev = 0.0;
    let mut worst = 0.0f64;
    for ratio in [0.99, 0.95, 0.9, 0.8, 0.6] {
        let est = deflected_volume_fraction(0, &model, &pose, &cam, &chord(ratio * model.radius));
        let oracle = segment_fraction(ratio);
        let rel = (est.fraction - oracle).abs() / oracle;
        worst = worst.max(rel);
        ensure(rel <= 0.01, || format!("h/r {ratio}: {} vs {oracle}", est.fraction))?;
        ensure(est.fraction > prev, || format!("not monotone at h/r {ratio}"))?;
        prev = est.fraction;
    }
    let tangent = deflected_volume_fraction(0, &model, &pose, &cam, &chord(model.radius)).fraction;
    ensure(tangent == 0.0, || format!("tangent chord gives {tangent}"))?;
    Ok(format!("worst relative error {:.3}%, monotone, tangent = 0", 100.0 * worst))
}

fn fixture_reproduction() -> Check {
    let frames = parse_annotations(presets::FIXTURE_ANNOTATIONS).map_err(|e| e.to_string())?;
    let targets = parse_targets(presets::FIXTURE_TARGETS).map_err(|e| e.to_string())?;
    let settings = ModelFile::parse(presets::FIXTURE_MODEL).map_err(|e| e.to_string())?;
    let cam = CameraIntrinsics::from_kv_str(presets::FIXTURE_CAMERA).map_err(|e| e.to_string())?;
    let series = estimate_series(&frames, &settings, &cam, &settings.fit_options()).map_err(|e| e.to_string())?;
    let (mut peak, mut worst_dev) = (0.0f64, 0.0f64);
    for s in &series {
        let smooth = smooth_deflection_series(&s.estimates, settings.smoothing_window).map_err(|e| e.to_string())?;
        for raw in &s.estimates {
            let target = targets
                .iter()
                .find(|t| t.cam_id == s.cam_id && t.frame == raw.frame)
                .ok_or("missing target")?
                .fraction;
            worst_dev = worst_dev.max((raw.fraction - target).abs());
            peak = peak.max(raw.fraction);
        }
        peak = smooth.iter().map(|e| e.fraction).fold(peak, f64::max);
        for window in stable_windows(s.cam_id) {
            for e in s.estimates.iter().chain(&smooth).filter(|e| window.contains(&e.frame)) {
                ensure((0.035..=0.05).contains(&e.fraction), || {
                    format!("cam {} frame {}: {:.4} outside stable band", s.cam_id, e.frame, e.fraction)
                })?;
            }
        }
        if s.cam_id == 0 {
            for e in s.estimates.iter().filter(|e| AIRBORNE_FRAMES.contains(&e.frame)) {
                ensure(e.fraction == 0.0, || format!("airborne frame {} at {}", e.frame, e.fraction))?;
            }
        }
    }
    ensure(worst_dev <= 0.002, || format!("max deviation from oracle {:.3} pp", 100.0 * worst_dev))?;
    ensure(peak < 0.065, || format!("peak {:.3}%", 100.0 * peak))?;
    Ok(format!(
        "stable windows in [3.5%, 5%], airborne 0, peak {:.2}%, max deviation {:.3} pp",
        100.0 * peak,
        100.0 * worst_dev
    ))
}

fn pose_round_trip() -> Check {
    let model = fixture_model();
    let cam = fixture_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_t, mut worst_r) = (0.0f64, 0.0f64);
    for k in 0..100 {
        let truth = WheelPose::new(
            Rotation3::from_euler_angles(rng.gen_range(-0.25..0.25), rng.gen_range(-0.7..0.7), rng.gen_range(-3.0..3.0)),
            Vector3::new(rng.gen_range(-0.15..0.15), rng.gen_range(-0.1..0.1), rng.gen_range(0.6..1.1)),
        );
        let axis = Unit::new_normalize(Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let angle = rng.gen_range(-20f64..20.0).to_radians();
        let scale = Vector3::new(rng.gen_range(0.8..1.2), rng.gen_range(0.8..1.2), rng.gen_range(0.8..1.2));
        let guess = WheelPose::new(
            truth.rotation * Rotation3::from_axis_angle(&axis, angle),
            truth.translation.component_mul(&scale),
        );
        let loops = project_wheel(&model, &truth, &cam, 36).map_err(|e| e.to_string())?;
        let fit = fit_wheel_pose(&loops, &model, &cam, &guess).map_err(|e| format!("pose {k}: {e}"))?;
        let dt = (fit.pose.translation - truth.translation).norm();
        let dr = fit.pose.axle_angle_to(&truth).to_degrees();
        worst_t = worst_t.max(dt);
        worst_r = worst_r.max(dr);
        ensure(dt < 1e-4 && dr < 0.01, || format!("pose {k}: {dt:e} m, {dr:e} deg"))?;
    }
    Ok(format!("100 poses, worst {worst_t:.1e} m, {worst_r:.1e} deg"))
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Check {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let noisy = work.path().join("noisy.scn");
    std::fs::write(
        &noisy,
        "name = noisy\nterrain.noise_std = 0.05\nterrain.rng_seed = 11\nmarker_x = 0.2\n[profile]\n\
         duration_s,vx,vy,wz,mode\n5,0.05,0,0.02,ackermann\n20,0,0,0.1,skid_steer\n10,0.02,0.03,0,crab\n",
    )
    .map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_rover");
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data");
    let run = |out: &Path| -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
        let o = out.to_str().unwrap();
        let pipelines: Vec<Vec<String>> = vec![
            vec!["simulate".into(), "--raw".into(), "--scenario".into(), noisy.display().to_string(), "--out".into(), format!("{o}/sim")],
            vec![
                "analyze".into(),
                "efficiency".into(),
                "--telemetry".into(),
                format!("{o}/sim/noisy_telemetry.csv"),
                "--out".into(),
                format!("{o}/eff"),
            ],
            vec!["calibrate".into(), "--table".into(), data.join("table2.csv").display().to_string(), "--out".into(), format!("{o}/cal")],
            vec!["report".into(), "--jobs".into(), "3".into(), "--out".into(), format!("{o}/report")],
        ];
        for args in pipelines {
            let status = Command::new(bin).args(&args).output().map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr)));
            }
        }
        Ok(tree(out))
    };
    let a = run(&work.path().join("a"))?;
    let b = run(&work.path().join("b"))?;
    ensure(a.len() == b.len() && !a.is_empty(), || "different file sets".into())?;
    for (x, y) in a.iter().zip(&b) {
        ensure(x == y, || format!("{} differs", x.0.display()))?;
    }
    let bytes: usize = a.iter().map(|f| f.1.len()).sum();
    Ok(format!("{} files, {bytes} bytes identical across two runs", a.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("cost-of-transport identity", cot_identity),
        ("calibration fit", calibration_fit),
        ("steering-mode efficiency", mode_efficiency),
        ("yaw-energy crossover", crossover),
        ("kinematics invariants", kinematics_suite),
        ("deflection oracle equivalence", hull_oracle),
        ("obstacle fixture reproduction", fixture_reproduction),
        ("pose-fit round trip", pose_round_trip),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
