use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rover_core::deflection::{parse_annotations, CameraIntrinsics, ModelFile};
use rover_core::presets;
use rover_core::rover::{LocomotionMode, RoverConfig};
use rover_core::telemetry::{
    align_series, aligned_to_telemetry, parse_actuator_str, parse_cot_table, parse_mocap_str, parse_telemetry_str,
};
use rover_core::terrain::{PowerModelParams, Scenario};

use crate::analysis::{self, Output, Run};
use crate::error::{create_dir, read, write, CliError, CliResult, WithPath};
use crate::{AnalyzeArgs, CalibrateArgs, DeflectArgs, Metric, ReportArgs, SimulateArgs};

fn emit(dir: &Path, out: &Output, summary_name: Option<&str>) -> CliResult<()> {
    create_dir(dir)?;
    for (name, text) in &out.files {
        write(&dir.join(name), text)?;
    }
    if let Some(name) = summary_name {
        write(&dir.join(name), &(out.summary.join("\n") + "\n"))?;
    }
    for line in &out.summary {
        println!("{line}");
    }
    Ok(())
}

fn load_scenario(path: &Path) -> CliResult<Scenario> {
    Scenario::parse(&read(path)?).at(path)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let scenarios = args
        .scenario
        .iter()
        .map(|p| load_scenario(p))
        .collect::<CliResult<Vec<_>>>()?;
    let outputs = scenarios
        .par_iter()
        .zip(&args.scenario)
        .map(|(sc, path)| analysis::simulate(sc, args.raw).map(|(_, o)| o).at(path))
        .collect::<CliResult<Vec<_>>>()?;
    let mut all = Output::default();
    outputs.into_iter().for_each(|o| all.extend(o));
    emit(&args.out, &all, None)
}

/// Rover settings and labels for a run, from a scenario file or a bare rover config.
fn run_meta(config: Option<&PathBuf>, fallback_name: &str) -> CliResult<Run> {
    let mut run = Run {
        name: fallback_name.to_string(),
        label: fallback_name.to_string(),
        slope_deg: 0.0,
        reference_cot: None,
        config: RoverConfig::default(),
        telemetry: Vec::new(),
    };
    if let Some(path) = config {
        let text = read(path)?;
        if text.lines().any(|l| l.trim() == "[profile]") {
            let sc = Scenario::parse(&text).at(path)?;
            run = Run::from_scenario(&sc, Vec::new());
            run.name = fallback_name.to_string();
        } else {
            run.config = RoverConfig::from_kv_str(&text).at(path)?;
        }
    }
    Ok(run)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().trim_end_matches("_telemetry").to_string())
        .unwrap_or_else(|| "run".into())
}

fn load_runs(args: &AnalyzeArgs) -> CliResult<Vec<Run>> {
    let sources = if args.telemetry.is_empty() { 1 } else { args.telemetry.len() };
    if args.telemetry.is_empty() && args.mocap.is_none() {
        return Err(CliError::Usage("give --telemetry, or --mocap with --actuators".into()));
    }
    if args.config.len() > 1 && args.config.len() != sources {
        return Err(CliError::Usage(format!(
            "{} --config files for {sources} telemetry inputs",
            args.config.len()
        )));
    }
    let config_for = |i: usize| args.config.get(if args.config.len() == 1 { 0 } else { i });
    if let (Some(mocap), Some(actuators)) = (&args.mocap, &args.actuators) {
        let mode: LocomotionMode = args.mode.parse().map_err(CliError::Usage)?;
        let mut run = run_meta(config_for(0), &stem(mocap))?;
        let m = parse_mocap_str(&read(mocap)?).at(mocap)?;
        let a = parse_actuator_str(&read(actuators)?).at(actuators)?;
        let aligned = align_series(&m, &a, args.max_gap).at(mocap)?;
        run.telemetry = aligned_to_telemetry(&aligned, mode, &run.config);
        return Ok(vec![run]);
    }
    args.telemetry
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let mut run = run_meta(config_for(i), &stem(path))?;
            run.telemetry = parse_telemetry_str(&read(path)?).at(path)?;
            Ok(run)
        })
        .collect()
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<()> {
    if args.window.is_nan() || args.window <= 0.0 {
        return Err(CliError::Usage("--window must be positive".into()));
    }
    let runs = load_runs(args)?;
    let (out, name) = match args.metric {
        Metric::Cot => (analysis::cot(&runs)?, "cot_summary.txt"),
        Metric::YawEnergy => (analysis::yaw_energy(&runs), "yaw_energy_summary.txt"),
        Metric::Efficiency => (analysis::efficiency(&runs, args.window)?, "efficiency_summary.txt"),
        Metric::Slip => (analysis::slip(&runs, args.window)?, "slip_summary.txt"),
    };
    emit(&args.out, &out, Some(name))
}

pub fn deflect(args: &DeflectArgs) -> CliResult<()> {
    let frames = parse_annotations(&read(&args.annotations)?).at(&args.annotations)?;
    let settings = ModelFile::parse(&read(&args.model)?).at(&args.model)?;
    let cam = CameraIntrinsics::from_kv_str(&read(&args.camera)?).at(&args.camera)?;
    let out = analysis::deflect(&frames, &settings, &cam).at(&args.annotations)?;
    emit(&args.out, &out, Some("deflection_summary.txt"))
}

fn fit_mask(rows: &[rover_core::terrain::CotRow], label: Option<&str>) -> Vec<bool> {
    rows.iter()
        .map(|r| label.is_none_or(|l| r.label.eq_ignore_ascii_case(l) && r.slope_deg == 0.0))
        .collect()
}

pub fn calibrate(args: &CalibrateArgs) -> CliResult<()> {
    let rows = parse_cot_table(&read(&args.table)?).at(&args.table)?;
    let base = match &args.power {
        Some(p) => PowerModelParams::from_kv_str(&read(p)?).at(p)?,
        None => PowerModelParams::default(),
    };
    let mask = fit_mask(&rows, (!args.all).then_some(args.fit_label.as_str()));
    let out = analysis::calibration(&rows, &mask, &RoverConfig::default(), &base).at(&args.table)?;
    emit(&args.out, &out, Some("calibration_summary.txt"))
}

fn report_scenarios(dir: Option<&PathBuf>) -> CliResult<Vec<Scenario>> {
    match dir {
        None => presets::SCENARIOS
            .iter()
            .map(|(name, text)| Scenario::parse(text).at(Path::new(name)))
            .collect(),
        Some(dir) => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|source| CliError::Io {
                    path: dir.clone(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "scn"))
                .collect();
            paths.sort();
            paths.iter().map(|p| load_scenario(p)).collect()
        }
    }
}

pub fn report(args: &ReportArgs) -> CliResult<()> {
    let scenarios = report_scenarios(args.scenarios.as_ref())?;
    let results = scenarios
        .par_iter()
        .map(|sc| analysis::simulate(sc, false).at(Path::new(&sc.name)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut sims = Output::default();
    let mut runs = Vec::new();
    for (run, out) in results {
        sims.extend(out);
        runs.push(run);
    }
    let here = Path::new("report");
    let is_rotation = |r: &&Run| r.telemetry.iter().any(|t| t.commanded_twist.wz != 0.0);
    let straight: Vec<Run> = runs.iter().filter(|r| !is_rotation(r)).cloned().collect();
    let rotations: Vec<Run> = runs.iter().filter(is_rotation).cloned().collect();

    let mut out = Output::default();
    out.summary.push("# simulated cost of transport".into());
    out.extend(analysis::cot(&straight).at(here)?);
    out.summary.push("# yaw energy".into());
    out.extend(analysis::yaw_energy(&rotations));
    out.summary.push("# angular speed efficiency".into());
    out.extend(analysis::efficiency(&rotations, 0.5).at(here)?);
    out.summary.push("# longitudinal slip".into());
    out.extend(analysis::slip(&straight, 0.5).at(here)?);

    let rows = parse_cot_table(presets::TABLE2).at(Path::new("table2.csv"))?;
    let mask = fit_mask(&rows, Some("Nominal"));
    out.summary.push("# calibration against the measured table".into());
    out.extend(analysis::calibration(&rows, &mask, &RoverConfig::default(), &PowerModelParams::default()).at(here)?);

    let frames = parse_annotations(presets::FIXTURE_ANNOTATIONS).at(Path::new("obstacle_annotations.csv"))?;
    let settings = ModelFile::parse(presets::FIXTURE_MODEL).at(Path::new("wheel_model.kv"))?;
    let cam = CameraIntrinsics::from_kv_str(presets::FIXTURE_CAMERA).at(Path::new("camera.kv"))?;
    out.summary.push("# wheel deflection".into());
    out.extend(analysis::deflect(&frames, &settings, &cam).at(here)?);

    let tel_dir = args.out.join("telemetry");
    create_dir(&tel_dir)?;
    for (name, text) in &sims.files {
        write(&tel_dir.join(name), text)?;
    }
    emit(&args.out, &out, Some("summary.txt"))
}
