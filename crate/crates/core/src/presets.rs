//! Data files shipped with the crate.

macro_rules! data {
    ($path:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/", $path))
    };
}

/// `(file stem, contents)` for the eight cost-of-transport runs and the two rotation tests.
pub const SCENARIOS: [(&str, &str); 10] = [
    ("table2_excavator_flat_3cms", data!("scenarios/table2_excavator_flat_3cms.scn")),
    ("table2_nominal_flat_3cms", data!("scenarios/table2_nominal_flat_3cms.scn")),
    ("table2_nominal_flat_6cms", data!("scenarios/table2_nominal_flat_6cms.scn")),
    ("table2_nominal_flat_8cms", data!("scenarios/table2_nominal_flat_8cms.scn")),
    ("table2_slope_10deg_6cms", data!("scenarios/table2_slope_10deg_6cms.scn")),
    ("table2_slope_15deg_6cms", data!("scenarios/table2_slope_15deg_6cms.scn")),
    ("table2_slope_20deg_6cms", data!("scenarios/table2_slope_20deg_6cms.scn")),
    ("table2_slope_25deg_6cms", data!("scenarios/table2_slope_25deg_6cms.scn")),
    ("fig3_point_turn_360", data!("scenarios/fig3_point_turn_360.scn")),
    ("fig3_skid_steer_360", data!("scenarios/fig3_skid_steer_360.scn")),
];

pub const TABLE2: &str = data!("table2.csv");
pub const FIXTURE_ANNOTATIONS: &str = data!("deflection/obstacle_annotations.csv");
pub const FIXTURE_TARGETS: &str = data!("deflection/obstacle_targets.csv");
pub const FIXTURE_MODEL: &str = data!("deflection/wheel_model.kv");
pub const FIXTURE_CAMERA: &str = data!("deflection/camera.kv");

pub fn scenario(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn table2_scenarios() -> impl Iterator<Item = (&'static str, &'static str)> {
    SCENARIOS.iter().copied().filter(|(n, _)| n.starts_with("table2_"))
}
