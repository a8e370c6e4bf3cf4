//! Feeder data model: buses, lines, fault scenarios and switch assignments.
//!
//! All electrical quantities are stored in per-unit. A [`Network`] is
//! canonicalized on construction (buses and lines sorted by id), so every
//! downstream consumer sees the same ordering regardless of how the source
//! document listed its elements.

mod io;
mod radial;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{FeederDocument, ScenarioDocument};
pub use radial::{
    effective_status, enumerate_radial_configs, is_spanning_tree, MAX_ENUMERATED_SWITCHES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    /// Real power demand (pu).
    pub p_demand: f64,
    /// Reactive power demand (pu).
    pub q_demand: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub is_substation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: LineId,
    pub from: BusId,
    pub to: BusId,
    /// Series resistance (pu).
    pub r: f64,
    /// Series reactance (pu).
    pub x: f64,
    /// Line carries a tie switch.
    pub switchable: bool,
    pub normally_open: bool,
}

impl Line {
    /// `r² + x²`
    pub fn z_squared(&self) -> f64 {
        self.r * self.r + self.x * self.x
    }

    pub fn other_end(&self, bus: BusId) -> BusId {
        if bus == self.from {
            self.to
        } else {
            self.from
        }
    }
}

/// Validated feeder graph.
#[derive(Debug, Clone)]
pub struct Network {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    base_mva: f64,
    base_kv: f64,
    bus_index: BTreeMap<BusId, usize>,
    line_index: BTreeMap<LineId, usize>,
    substation: usize,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.buses == other.buses
            && self.lines == other.lines
            && self.base_mva == other.base_mva
            && self.base_kv == other.base_kv
    }
}

impl Network {
    /// Validates and canonicalizes a feeder. Errors name the first violated invariant.
    pub fn new(
        mut buses: Vec<Bus>,
        mut lines: Vec<Line>,
        base_mva: f64,
        base_kv: f64,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidNetwork(msg));
        if !(base_mva > 0.0 && base_kv > 0.0) {
            return invalid(format!(
                "bases must be positive (base_mva = {base_mva}, base_kv = {base_kv})"
            ));
        }
        buses.sort_by_key(|b| b.id);
        lines.sort_by_key(|l| l.id);

        let mut bus_index = BTreeMap::new();
        for (k, bus) in buses.iter().enumerate() {
            if bus_index.insert(bus.id, k).is_some() {
                return invalid(format!("duplicate bus id {}", bus.id));
            }
            if !(bus.v_min > 0.0 && bus.v_min <= bus.v_max && bus.v_max.is_finite()) {
                return invalid(format!(
                    "bus {}: voltage bounds must satisfy 0 < v_min <= v_max (got {} .. {})",
                    bus.id, bus.v_min, bus.v_max
                ));
            }
            if !(bus.p_demand >= 0.0 && bus.q_demand >= 0.0) {
                return invalid(format!("bus {}: demands must be nonnegative", bus.id));
            }
            if bus.is_substation && (bus.p_demand != 0.0 || bus.q_demand != 0.0) {
                return invalid(format!("bus {}: substation demand must be zero", bus.id));
            }
        }
        let substations: Vec<usize> = (0..buses.len())
            .filter(|&k| buses[k].is_substation)
            .collect();
        if substations.len() != 1 {
            return invalid(format!(
                "exactly one substation bus required, found {}",
                substations.len()
            ));
        }

        let mut line_index = BTreeMap::new();
        for (k, line) in lines.iter().enumerate() {
            if line_index.insert(line.id, k).is_some() {
                return invalid(format!("duplicate line id {}", line.id));
            }
            for end in [line.from, line.to] {
                if !bus_index.contains_key(&end) {
                    return invalid(format!("line {} references missing bus {}", line.id, end));
                }
            }
            if line.from == line.to {
                return invalid(format!(
                    "line {} is a self-loop on bus {}",
                    line.id, line.from
                ));
            }
            if !(line.r >= 0.0 && line.x >= 0.0 && line.r + line.x > 0.0) {
                return invalid(format!(
                    "line {}: impedance must satisfy r >= 0, x >= 0, r + x > 0 (got r = {}, x = {})",
                    line.id, line.r, line.x
                ));
            }
            if line.normally_open && !line.switchable {
                return invalid(format!(
                    "line {} is normally open but not switchable",
                    line.id
                ));
            }
        }

        let network = Network {
            buses,
            lines,
            base_mva,
            base_kv,
            bus_index,
            line_index,
            substation: substations[0],
        };
        let all: BTreeSet<LineId> = network.lines.iter().map(|l| l.id).collect();
        if !radial::is_connected(&network, &all) {
            return invalid("graph is not connected with every line closed".to_string());
        }
        Ok(network)
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn base_kv(&self) -> f64 {
        self.base_kv
    }

    pub fn substation(&self) -> &Bus {
        &self.buses[self.substation]
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.bus_index.get(&id).map(|&k| &self.buses[k])
    }

    pub fn line(&self, id: LineId) -> Option<&Line> {
        self.line_index.get(&id).map(|&k| &self.lines[k])
    }

    /// Position of a bus in [`Network::buses`].
    pub fn bus_position(&self, id: BusId) -> Option<usize> {
        self.bus_index.get(&id).copied()
    }

    pub fn line_position(&self, id: LineId) -> Option<usize> {
        self.line_index.get(&id).copied()
    }

    /// Switchable lines in ascending id order.
    pub fn switchable_lines(&self) -> impl Iterator<Item = &Line> {
        self.lines.iter().filter(|l| l.switchable)
    }

    pub fn switch_ids(&self) -> Vec<LineId> {
        self.switchable_lines().map(|l| l.id).collect()
    }

    /// Lines touching `bus`, ascending by id.
    pub fn incident_lines(&self, bus: BusId) -> impl Iterator<Item = &Line> {
        self.lines
            .iter()
            .filter(move |l| l.from == bus || l.to == bus)
    }
}

/// A set of outaged (faulted) lines. Only non-switchable lines may fault.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub name: String,
    pub faulted_lines: BTreeSet<LineId>,
}

impl FaultScenario {
    pub fn new(name: impl Into<String>, faulted: impl IntoIterator<Item = LineId>) -> Self {
        FaultScenario {
            name: name.into(),
            faulted_lines: faulted.into_iter().collect(),
        }
    }

    pub fn no_fault() -> Self {
        FaultScenario::new("no-fault", [])
    }

    pub fn validate(&self, network: &Network) -> Result<()> {
        for &id in &self.faulted_lines {
            match network.line(id) {
                None => {
                    return Err(Error::InvalidScenario(format!(
                        "scenario '{}': faulted line {} does not exist",
                        self.name, id
                    )))
                }
                Some(line) if line.switchable => {
                    return Err(Error::InvalidScenario(format!(
                        "scenario '{}': line {} carries a tie switch and cannot be faulted",
                        self.name, id
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// δ for a non-switchable line: 0 if faulted, 1 otherwise.
    pub fn in_service(&self, line: LineId) -> bool {
        !self.faulted_lines.contains(&line)
    }
}

/// Closed/open decision for every switchable line.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SwitchAssignment(pub BTreeMap<LineId, bool>);

impl SwitchAssignment {
    /// Every tie switch at its normal (open/closed) position.
    pub fn normal(network: &Network) -> Self {
        SwitchAssignment(
            network
                .switchable_lines()
                .map(|l| (l.id, !l.normally_open))
                .collect(),
        )
    }

    pub fn from_closed(network: &Network, closed: &[LineId]) -> Self {
        SwitchAssignment(
            network
                .switch_ids()
                .into_iter()
                .map(|id| (id, closed.contains(&id)))
                .collect(),
        )
    }

    pub fn is_closed(&self, line: LineId) -> Option<bool> {
        self.0.get(&line).copied()
    }

    pub fn closed(&self) -> impl Iterator<Item = LineId> + '_ {
        self.0.iter().filter(|(_, &c)| c).map(|(&id, _)| id)
    }

    pub fn validate(&self, network: &Network) -> Result<()> {
        let expected = network.switch_ids();
        for id in &expected {
            if !self.0.contains_key(id) {
                return Err(Error::InvalidAssignment(format!("missing switch {id}")));
            }
        }
        if let Some(extra) = self.0.keys().find(|id| !expected.contains(id)) {
            return Err(Error::InvalidAssignment(format!(
                "line {extra} is not switchable"
            )));
        }
        Ok(())
    }

    pub fn hamming(&self, other: &SwitchAssignment) -> usize {
        self.0
            .iter()
            .filter(|(id, c)| other.0.get(id).is_none_or(|o| o != *c))
            .count()
            + other.0.keys().filter(|id| !self.0.contains_key(id)).count()
    }

    /// Compact label such as `35` or `34+37`; `none` when every switch is open.
    pub fn label(&self) -> String {
        let closed: Vec<String> = self.closed().map(|id| id.to_string()).collect();
        if closed.is_empty() {
            "none".to_string()
        } else {
            closed.join("+")
        }
    }
}

impl fmt::Display for SwitchAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Shipped fixtures.
pub mod fixtures {
    use super::*;

    pub const IEEE33_JSON: &str = include_str!("../../data/ieee33.json");
    pub const TWO_BUS_JSON: &str = include_str!("../../data/two_bus.json");

    pub const SCENARIO_JSON: [&str; 3] = [
        include_str!("../../data/scenarios/fault-line-7.json"),
        include_str!("../../data/scenarios/fault-lines-13-28.json"),
        include_str!("../../data/scenarios/fault-line-18.json"),
    ];

    /// The 33-bus radial test feeder (12.66 kV, 10 MVA base) with its five tie switches.
    pub fn ieee33() -> Network {
        io::load_network(IEEE33_JSON).expect("shipped fixture is valid")
    }

    pub fn two_bus() -> Network {
        io::load_network(TWO_BUS_JSON).expect("shipped fixture is valid")
    }

    /// Illustrative fault scenarios for the 33-bus feeder. They are examples,
    /// chosen so that each one has several restoration options.
    pub fn ieee33_scenarios() -> Vec<FaultScenario> {
        SCENARIO_JSON
            .iter()
            .map(|s| io::load_scenario(s).expect("shipped scenario is valid"))
            .collect()
    }
}

pub use io::{load_network, load_scenario, network_to_json};
