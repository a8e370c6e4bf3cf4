use std::collections::{BTreeMap, BTreeSet};

use super::{FaultScenario, LineId, Network, SwitchAssignment};
use crate::error::{Error, Result};

/// Largest tie-switch count [`enumerate_radial_configs`] will expand (2^20 candidates).
pub const MAX_ENUMERATED_SWITCHES: usize = 20;

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Returns false when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Number of connected components and whether any closed line closed a cycle.
fn components(network: &Network, closed: &BTreeSet<LineId>) -> (usize, bool) {
    let n = network.buses().len();
    let mut sets = DisjointSets::new(n);
    let mut count = n;
    let mut cycle = false;
    for id in closed {
        let Some(line) = network.line(*id) else {
            continue;
        };
        let a = network.bus_position(line.from).expect("validated endpoint");
        let b = network.bus_position(line.to).expect("validated endpoint");
        if sets.union(a, b) {
            count -= 1;
        } else {
            cycle = true;
        }
    }
    (count, cycle)
}

pub(crate) fn is_connected(network: &Network, closed: &BTreeSet<LineId>) -> bool {
    components(network, closed).0 == 1
}

/// True iff the closed lines form a spanning tree over every bus.
pub fn is_spanning_tree(network: &Network, closed: &BTreeSet<LineId>) -> bool {
    if closed.iter().any(|id| network.line(*id).is_none()) {
        return false;
    }
    if closed.len() + 1 != network.buses().len() {
        return false;
    }
    let (count, cycle) = components(network, closed);
    count == 1 && !cycle
}

/// Closed/open status of every line: non-switchable lines follow the fault
/// scenario, switchable lines follow the assignment.
pub fn effective_status(
    network: &Network,
    scenario: &FaultScenario,
    assignment: &SwitchAssignment,
) -> Result<BTreeMap<LineId, bool>> {
    scenario.validate(network)?;
    assignment.validate(network)?;
    Ok(network
        .lines()
        .iter()
        .map(|line| {
            let closed = if line.switchable {
                assignment.0[&line.id]
            } else {
                scenario.in_service(line.id)
            };
            (line.id, closed)
        })
        .collect())
}

#[cfg(test)]
fn closed_set(status: &BTreeMap<LineId, bool>) -> BTreeSet<LineId> {
    status
        .iter()
        .filter(|(_, &c)| c)
        .map(|(&id, _)| id)
        .collect()
}

/// Every switch assignment whose effective topology is a spanning tree, in
/// lexicographic order of the closed-flag vector over ascending switch ids
/// (open sorts before closed).
pub fn enumerate_radial_configs(
    network: &Network,
    scenario: &FaultScenario,
) -> Result<Vec<SwitchAssignment>> {
    scenario.validate(network)?;
    let switches = network.switch_ids();
    let k = switches.len();
    if k > MAX_ENUMERATED_SWITCHES {
        return Err(Error::TooLarge {
            what: "switchable lines",
            size: k,
            limit: MAX_ENUMERATED_SWITCHES,
        });
    }
    let fixed: BTreeSet<LineId> = network
        .lines()
        .iter()
        .filter(|l| !l.switchable && scenario.in_service(l.id))
        .map(|l| l.id)
        .collect();
    let target = network.buses().len() - 1;

    let mut out = Vec::new();
    for mask in 0u64..(1u64 << k) {
        // switch i maps to bit (k - 1 - i) so that counting order is lexicographic
        let closed_count = mask.count_ones() as usize;
        if fixed.len() + closed_count != target {
            continue;
        }
        let mut closed = fixed.clone();
        let mut assignment = BTreeMap::new();
        for (i, id) in switches.iter().enumerate() {
            let on = mask >> (k - 1 - i) & 1 == 1;
            if on {
                closed.insert(*id);
            }
            assignment.insert(*id, on);
        }
        if is_spanning_tree(network, &closed) {
            out.push(SwitchAssignment(assignment));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures;

    fn normally_closed(network: &Network) -> BTreeSet<LineId> {
        network
            .lines()
            .iter()
            .filter(|l| !l.switchable)
            .map(|l| l.id)
            .collect()
    }

    #[test]
    fn base_feeder_is_radial() {
        let net = fixtures::ieee33();
        assert!(is_spanning_tree(&net, &normally_closed(&net)));
    }

    #[test]
    fn closing_one_tie_breaks_radiality() {
        let net = fixtures::ieee33();
        let mut closed = normally_closed(&net);
        closed.insert(LineId(35));
        assert_eq!(closed.len(), 33);
        assert!(!is_spanning_tree(&net, &closed));
    }

    #[test]
    fn open_two_bus_line_is_disconnected() {
        let net = fixtures::two_bus();
        assert!(!is_spanning_tree(&net, &BTreeSet::new()));
        assert!(is_spanning_tree(&net, &[LineId(1)].into()));
    }

    #[test]
    fn unknown_line_is_not_a_tree() {
        let net = fixtures::two_bus();
        assert!(!is_spanning_tree(&net, &[LineId(9)].into()));
    }

    #[test]
    fn status_without_faults() {
        let net = fixtures::ieee33();
        let status = effective_status(
            &net,
            &FaultScenario::no_fault(),
            &SwitchAssignment::normal(&net),
        )
        .unwrap();
        for line in net.lines() {
            assert_eq!(status[&line.id], !line.switchable, "line {}", line.id);
        }
    }

    #[test]
    fn status_with_fault_and_tie() {
        let net = fixtures::ieee33();
        let scenario = FaultScenario::new("f7", [LineId(7)]);
        let assignment = SwitchAssignment::from_closed(&net, &[LineId(35)]);
        let status = effective_status(&net, &scenario, &assignment).unwrap();
        assert!(!status[&LineId(7)]);
        assert!(status[&LineId(35)]);
        for line in net.lines() {
            if line.id != LineId(7) && !line.switchable {
                assert!(status[&line.id]);
            }
            if line.switchable && line.id != LineId(35) {
                assert!(!status[&line.id]);
            }
        }
    }

    #[test]
    fn faulting_a_tie_is_rejected() {
        let net = fixtures::ieee33();
        let scenario = FaultScenario::new("bad", [LineId(33)]);
        let err = effective_status(&net, &scenario, &SwitchAssignment::normal(&net)).unwrap_err();
        assert!(matches!(err, Error::InvalidScenario(_)), "{err}");
    }

    #[test]
    fn missing_switch_in_assignment_is_rejected() {
        let net = fixtures::ieee33();
        let mut a = SwitchAssignment::normal(&net);
        a.0.remove(&LineId(36));
        let err = effective_status(&net, &FaultScenario::no_fault(), &a).unwrap_err();
        assert!(err.to_string().contains("36"));
    }

    #[test]
    fn enumeration_no_fault() {
        let net = fixtures::ieee33();
        let configs = enumerate_radial_configs(&net, &FaultScenario::no_fault()).unwrap();
        assert_eq!(configs, vec![SwitchAssignment::from_closed(&net, &[])]);
    }

    #[test]
    fn enumeration_two_bus() {
        let net = fixtures::two_bus();
        let configs = enumerate_radial_configs(&net, &FaultScenario::no_fault()).unwrap();
        assert_eq!(configs, vec![SwitchAssignment::default()]);
        let faulted = FaultScenario::new("f", [LineId(1)]);
        assert!(enumerate_radial_configs(&net, &faulted).unwrap().is_empty());
    }

    #[test]
    fn enumeration_matches_brute_force_complement() {
        let net = fixtures::ieee33();
        let mut scenarios = fixtures::ieee33_scenarios();
        scenarios.push(FaultScenario::no_fault());
        scenarios.push(FaultScenario::new("f1", [LineId(1)]));
        for scenario in scenarios {
            let radial = enumerate_radial_configs(&net, &scenario).unwrap();
            let switches = net.switch_ids();
            for mask in 0u32..(1 << switches.len()) {
                let closed: Vec<LineId> = switches
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, id)| *id)
                    .collect();
                let a = SwitchAssignment::from_closed(&net, &closed);
                let tree = is_spanning_tree(
                    &net,
                    &closed_set(&effective_status(&net, &scenario, &a).unwrap()),
                );
                assert_eq!(radial.contains(&a), tree, "{} {:?}", scenario.name, closed);
            }
            let mut sorted = radial.clone();
            sorted.sort_by_key(|a| a.0.values().copied().collect::<Vec<_>>());
            assert_eq!(sorted, radial, "lexicographic order");
        }
    }

    #[test]
    fn shipped_scenarios_have_restoration_options() {
        let net = fixtures::ieee33();
        let counts: Vec<usize> = fixtures::ieee33_scenarios()
            .iter()
            .map(|s| enumerate_radial_configs(&net, s).unwrap().len())
            .collect();
        assert_eq!(counts, vec![3, 3, 2]);
    }
}
