//! Named topology fixtures shipped with the crate. The numbers in them are
//! illustrative calibration values; see each fixture's description field.

use crate::topology::{load_topology, Topology, TopologyError};

pub const START_STATE: &str = include_str!("../fixtures/start-state.json");
pub const END_STATE: &str = include_str!("../fixtures/end-state.json");
pub const INTEGRATION_TRAP: &str = include_str!("../fixtures/integration-trap.json");

pub const NAMES: [&str; 3] = ["start-state", "end-state", "integration-trap"];

pub fn config_text(name: &str) -> Option<&'static str> {
    match name {
        "start-state" => Some(START_STATE),
        "end-state" => Some(END_STATE),
        "integration-trap" => Some(INTEGRATION_TRAP),
        _ => None,
    }
}

pub fn load(name: &str) -> Option<Result<Topology, TopologyError>> {
    config_text(name).map(load_topology)
}
