use std::path::{Path, PathBuf};

use apsc_core::control::ControllerKind;
use apsc_core::experiment::ExperimentGrid;
use apsc_core::scenario::Scenario;

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn default_file_spells_out_the_built_in_scenario() {
    let s = Scenario::load(&scenario_dir().join("default.toml")).unwrap();
    assert_eq!(s, Scenario::default());
    assert_eq!(s.hash(), Scenario::default().hash());
}

#[test]
fn every_shipped_file_loads() {
    let mut scenarios = 0;
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let name = path.file_name().unwrap().to_string_lossy();
            if name.starts_with("grid") {
                ExperimentGrid::load(&path).unwrap();
            } else {
                Scenario::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
                scenarios += 1;
            }
        }
    }
    assert!(scenarios >= 4);
    let frozen = Scenario::load(&scenario_dir().join("dry-frozen.toml")).unwrap();
    assert!(!frozen.adaptive);
    assert_eq!(Scenario::load(&scenario_dir().join("icy-mpc.toml")).unwrap().controller, ControllerKind::ApscMpc);
}
