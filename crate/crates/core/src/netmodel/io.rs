use serde::{Deserialize, Serialize};

use super::{Bus, BusId, FaultScenario, Line, LineId, Network};
use crate::error::Result;

/// Feeder document in physical units, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederDocument {
    pub base_mva: f64,
    pub base_kv: f64,
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: u32,
    pub pd_kw: f64,
    pub qd_kvar: f64,
    pub vmin_pu: f64,
    pub vmax_pu: f64,
    pub substation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    pub r_ohm: f64,
    pub x_ohm: f64,
    pub switchable: bool,
    pub normally_open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub name: String,
    pub faulted_lines: Vec<u32>,
}

impl FeederDocument {
    /// Converts to per-unit and validates.
    pub fn into_network(self) -> Result<Network> {
        let z_base = self.base_kv * self.base_kv / self.base_mva;
        let s_base_kw = 1000.0 * self.base_mva;
        let buses = self
            .buses
            .into_iter()
            .map(|b| Bus {
                id: BusId(b.id),
                p_demand: b.pd_kw / s_base_kw,
                q_demand: b.qd_kvar / s_base_kw,
                v_min: b.vmin_pu,
                v_max: b.vmax_pu,
                is_substation: b.substation,
            })
            .collect();
        let lines = self
            .lines
            .into_iter()
            .map(|l| Line {
                id: LineId(l.id),
                from: BusId(l.from),
                to: BusId(l.to),
                r: l.r_ohm / z_base,
                x: l.x_ohm / z_base,
                switchable: l.switchable,
                normally_open: l.normally_open,
            })
            .collect();
        Network::new(buses, lines, self.base_mva, self.base_kv)
    }

    pub fn from_network(network: &Network) -> Self {
        let z_base = network.base_kv * network.base_kv / network.base_mva;
        let s_base_kw = 1000.0 * network.base_mva;
        FeederDocument {
            base_mva: network.base_mva,
            base_kv: network.base_kv,
            buses: network
                .buses
                .iter()
                .map(|b| BusRecord {
                    id: b.id.0,
                    pd_kw: b.p_demand * s_base_kw,
                    qd_kvar: b.q_demand * s_base_kw,
                    vmin_pu: b.v_min,
                    vmax_pu: b.v_max,
                    substation: b.is_substation,
                })
                .collect(),
            lines: network
                .lines
                .iter()
                .map(|l| LineRecord {
                    id: l.id.0,
                    from: l.from.0,
                    to: l.to.0,
                    r_ohm: l.r * z_base,
                    x_ohm: l.x * z_base,
                    switchable: l.switchable,
                    normally_open: l.normally_open,
                })
                .collect(),
        }
    }
}

pub fn load_network(text: &str) -> Result<Network> {
    let doc: FeederDocument = serde_json::from_str(text)?;
    doc.into_network()
}

pub fn network_to_json(network: &Network) -> String {
    serde_json::to_string_pretty(&FeederDocument::from_network(network))
        .expect("feeder document serializes")
}

/// Parses a scenario document. Validation against a network is separate
/// ([`FaultScenario::validate`]).
pub fn load_scenario(text: &str) -> Result<FaultScenario> {
    let doc: ScenarioDocument = serde_json::from_str(text)?;
    Ok(FaultScenario::new(
        doc.name,
        doc.faulted_lines.into_iter().map(LineId),
    ))
}
