//! Metric pipelines shared by `analyze` and `report`. Each returns file contents and
//! summary lines; the caller decides where they go.

use std::fmt::Write as _;

use rover_core::deflection::{
    estimate_series, format_deflection_csv, smooth_deflection_series, AnnotatedFrame, CameraIntrinsics,
    ModelFile,
};
use rover_core::metrics::{
    curve_crossings, energy_vs_yaw, fig3_csv, fig4_csv, longitudinal_slip, mean_cot, median_ratio, slip_csv,
    table2_csv, telemetry_efficiency, telemetry_speeds, CotReport, EfficiencyOptions, RatioSample,
};
use rover_core::rover::RoverConfig;
use rover_core::telemetry::{actuator_records, format_actuator_csv, format_mocap_csv, format_telemetry_csv, mocap_records};
use rover_core::terrain::{
    calibrate_power, predict_cot, simulate_traverse, CotRow, PowerModelParams, Scenario, TelemetryRecord, TerrainParams,
};

#[derive(Debug, Default)]
pub struct Output {
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
}

impl Output {
    pub fn extend(&mut self, other: Output) {
        self.files.extend(other.files);
        self.summary.extend(other.summary);
    }
}

/// A telemetry series with what the metrics need to know about it.
#[derive(Debug, Clone)]
pub struct Run {
    pub name: String,
    pub label: String,
    pub slope_deg: f64,
    pub reference_cot: Option<f64>,
    pub config: RoverConfig,
    pub telemetry: Vec<TelemetryRecord>,
}

impl Run {
    pub fn from_scenario(sc: &Scenario, telemetry: Vec<TelemetryRecord>) -> Self {
        Run {
            name: sc.name.clone(),
            label: sc.label.clone(),
            slope_deg: sc.terrain.slope_deg,
            reference_cot: sc.reference_cot,
            config: sc.config,
            telemetry,
        }
    }
}

pub fn simulate(sc: &Scenario, raw: bool) -> rover_core::Result<(Run, Output)> {
    let recs = simulate_traverse(sc)?;
    let mut out = Output::default();
    out.files.push((format!("{}_telemetry.csv", sc.name), format_telemetry_csv(&recs)));
    if raw {
        out.files.push((format!("{}_mocap.csv", sc.name), format_mocap_csv(&mocap_records(&recs, 0.0, "rover"))));
        out.files.push((format!("{}_actuators.csv", sc.name), format_actuator_csv(&actuator_records(&recs))));
    }
    let summary = simulation_summary(sc, &recs);
    out.files.push((format!("{}_summary.txt", sc.name), summary.join("\n") + "\n"));
    out.summary.extend(summary);
    Ok((Run::from_scenario(sc, recs), out))
}

fn simulation_summary(sc: &Scenario, recs: &[TelemetryRecord]) -> Vec<String> {
    let mut lines = vec![format!("scenario={} label={} records={}", sc.name, sc.label, recs.len())];
    if let (Some(first), Some(last)) = (recs.first(), recs.last()) {
        let energy: f64 = recs.windows(2).map(|w| w[0].power() * (w[1].t - w[0].t)).sum();
        lines.push(format!(
            "duration_s={:.3} energy_j={:.3} final_x={:.6} final_y={:.6} final_heading_deg={:.3}",
            last.t - first.t,
            energy,
            last.pose.x,
            last.pose.y,
            last.pose.heading.to_degrees()
        ));
        if let Ok(rep) = mean_cot(recs, &sc.config) {
            lines.push(format!("mean_power_w={:.3} mean_velocity_mps={:.4} cot={:.3}", rep.mean_power, rep.mean_velocity, rep.cost_of_transport));
        }
    }
    lines
}

pub fn cot(runs: &[Run]) -> rover_core::Result<Output> {
    let mut reports: Vec<CotReport> = Vec::new();
    let mut out = Output::default();
    for run in runs {
        let rep = mean_cot(&run.telemetry, &run.config)?.labelled(&run.label, run.slope_deg);
        let mut line = format!(
            "{}: slope_deg={:.0} mean_velocity={:.4} mean_power={:.3} cot={:.3}",
            run.name, rep.slope_deg, rep.mean_velocity, rep.mean_power, rep.cost_of_transport
        );
        if let Some(r) = run.reference_cot {
            let _ = write!(line, " reference={r:.3} delta={:+.3}", rep.cost_of_transport - r);
        }
        out.summary.push(line);
        reports.push(rep);
    }
    let refs: Vec<Option<f64>> = runs.iter().map(|r| r.reference_cot).collect();
    out.files.push(("table2.csv".into(), table2_csv(&reports, &refs)));
    Ok(out)
}

pub fn yaw_energy(runs: &[Run]) -> Output {
    let curves: Vec<_> = runs.iter().map(|r| energy_vs_yaw(&r.telemetry, &r.label)).collect();
    let mut out = Output::default();
    for c in &curves {
        out.summary.push(format!(
            "{}: energy_at_0_j={:.3} max_yaw_deg={:.3} energy_at_max_j={:.3}",
            c.label,
            c.energy_at(0.0).unwrap_or(0.0),
            c.max_yaw(),
            c.points.last().map_or(0.0, |p| p.1)
        ));
    }
    if let [a, b] = curves.as_slice() {
        let limit = (a.max_yaw().min(b.max_yaw()) + 1e-6).floor();
        let xs = curve_crossings(a, b, limit, 0.5);
        let list: Vec<String> = xs.iter().map(|x| format!("{x:.2}")).collect();
        out.summary.push(format!("crossings_deg=[{}] over (0, {limit:.0}]", list.join(", ")));
    }
    out.files.push(("fig3.csv".into(), fig3_csv(&curves)));
    out
}

pub fn efficiency(runs: &[Run], window: f64) -> rover_core::Result<Output> {
    let opts = EfficiencyOptions {
        window,
        ..Default::default()
    };
    let mut out = Output::default();
    for run in runs {
        let samples: Vec<RatioSample> = telemetry_efficiency(&run.telemetry, &opts)?;
        let gaps = samples.iter().filter(|s| s.ratio.is_none()).count();
        let median = median_ratio(&samples).map_or("none".to_string(), |m| format!("{m:.4}"));
        out.summary.push(format!("{}: efficiency_median={median} samples={} gaps={gaps}", run.name, samples.len()));
        out.files.push((format!("{}_fig4.csv", run.name), fig4_csv(&samples, opts.clamp)));
    }
    Ok(out)
}

pub fn slip(runs: &[Run], window: f64) -> rover_core::Result<Output> {
    let mut out = Output::default();
    for run in runs {
        let (enc, moc) = telemetry_speeds(&run.telemetry, &run.config, window);
        let slip = longitudinal_slip(&enc, &moc)?;
        let mut valid: Vec<f64> = slip.iter().flatten().copied().collect();
        valid.sort_by(f64::total_cmp);
        let median = valid.get(valid.len() / 2).map_or("none".to_string(), |m| format!("{m:.4}"));
        out.summary.push(format!("{}: slip_median={median} samples={} gaps={}", run.name, slip.len(), slip.len() - valid.len()));
        let t: Vec<f64> = run.telemetry.iter().map(|r| r.t).collect();
        out.files.push((format!("{}_slip.csv", run.name), slip_csv(&t, &enc, &moc, &slip)));
    }
    Ok(out)
}

pub fn deflect(frames: &[AnnotatedFrame], settings: &ModelFile, cam: &CameraIntrinsics) -> rover_core::Result<Output> {
    let series = estimate_series(frames, settings, cam, &settings.fit_options())?;
    let mut out = Output::default();
    for s in series {
        let smooth = smooth_deflection_series(&s.estimates, settings.smoothing_window)?;
        let peak = s.estimates.iter().map(|e| e.fraction).fold(0.0, f64::max);
        let flagged = s.estimates.iter().filter(|e| e.implausible).count();
        let rms: Vec<f64> = s.fit_rms_px.iter().copied().filter(|r| r.is_finite()).collect();
        let mean_rms = rms.iter().sum::<f64>() / rms.len().max(1) as f64;
        out.summary.push(format!(
            "cam {}: frames={} max_fraction={:.4} implausible={flagged} mean_fit_rms_px={:.3}",
            s.cam_id,
            s.estimates.len(),
            peak,
            mean_rms
        ));
        out.files.push((format!("fig6_cam{}.csv", s.cam_id), format_deflection_csv(&s.estimates)));
        out.files.push((format!("fig6_cam{}_smoothed.csv", s.cam_id), format_deflection_csv(&smooth)));
    }
    Ok(out)
}

pub fn calibration(
    rows: &[CotRow],
    fit: &[bool],
    config: &RoverConfig,
    base: &PowerModelParams,
) -> rover_core::Result<Output> {
    let chosen: Vec<CotRow> = rows.iter().zip(fit).filter(|(_, f)| **f).map(|(r, _)| r.clone()).collect();
    let cal = calibrate_power(&chosen, config, base)?;
    let mut csv = String::from("mode,slope_deg,velocity_mps,measured_cot,predicted_cot,residual,fitted\n");
    let mut max_fit: f64 = 0.0;
    for (row, fitted) in rows.iter().zip(fit) {
        let pred = predict_cot(row.slope_deg, row.velocity, config, &cal.params, &TerrainParams::default())?;
        let res = row.cot - pred;
        if *fitted {
            max_fit = max_fit.max(res.abs());
        }
        let _ = writeln!(
            csv,
            "{},{},{},{:.6},{:.6},{:.6},{}",
            row.label, row.slope_deg, row.velocity, row.cot, pred, res, fitted
        );
    }
    let p = &cal.params;
    Ok(Output {
        files: vec![
            ("power_params.kv".into(), p.to_kv_string()),
            ("calibration_residuals.csv".into(), csv),
        ],
        summary: vec![
            format!(
                "idle_power_per_drive={:.6} rolling_resistance_coeff={:.6} speed_quadratic_coeff={:.3} drivetrain_efficiency={}",
                p.idle_power_per_drive, p.rolling_resistance_coeff, p.speed_quadratic_coeff, p.drivetrain_efficiency
            ),
            format!("fitted_rows={} max_abs_residual={:.4}", chosen.len(), max_fit),
        ],
    })
}
