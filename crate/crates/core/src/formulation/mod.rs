//! Mixed-integer conic models of post-fault reconfiguration.
//!
//! Two formulations share one variable vocabulary ([`Symbol`]) and one
//! intermediate representation ([`ConicProgram`]):
//!
//! - **branch-flow**: DistFlow over directed line flows `P_ij, Q_ij` measured
//!   at the `from` end, squared current `I^sq`, and the relaxed cone
//!   `P² + Q² ≤ ν_i^ℓ · I^sq`;
//! - **bus-injection**: per-line auxiliaries `R = V_i V_j cos θ` and
//!   `T = V_i V_j sin θ` with `R² + T² ≤ ν_i^ℓ ν_j^ℓ`, and both directed flows
//!   as linear functions of `(ν^ℓ, R, T)`.
//!
//! Both minimize `P^grid + voll · Σ P^c` and share the radiality (`β`) and
//! status-coupling (`ν^ℓ`) constraints. Line status is either the constant
//! fault flag of a non-switchable line or the binary `α` of a tie switch.
//!
//! `β_ij` (stored as [`Symbol::Beta`] with [`End`] of bus `i`) is 1 when `j`
//! is the parent of `i` in the spanning tree rooted at the substation.

mod solution;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::conic::ConicProgram;
use crate::error::{Error, Result};
use crate::netmodel::{BusId, FaultScenario, Line, LineId, Network, SwitchAssignment};

pub use solution::{cone_exactness, extract_solution, BusResult, FlowSolution, LineResult};

/// Default weight of curtailed real power in the objective.
pub const DEFAULT_VOLL: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    BranchFlow,
    BusInjection,
}

impl ModelKind {
    pub fn short(self) -> &'static str {
        match self {
            ModelKind::BranchFlow => "bf",
            ModelKind::BusInjection => "bi",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::BranchFlow => "branch-flow",
            ModelKind::BusInjection => "bus-injection",
        })
    }
}

/// Line end: `From` is bus `i`, `To` is bus `j` of line `ℓ = ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum End {
    From,
    To,
}

/// Named model quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// Squared voltage magnitude `ν_i`.
    Nu(BusId),
    /// Line-side copy of the end voltage, `ν_i^ℓ` or `ν_j^ℓ`.
    NuLine(LineId, End),
    /// Squared current `I^sq_ℓ`.
    Isq(LineId),
    /// Real flow leaving the given end (`P_ij` for `From`, `P_ji` for `To`).
    P(LineId, End),
    Q(LineId, End),
    R(LineId),
    T(LineId),
    /// `β` of the bus at the given end toward the other end.
    Beta(LineId, End),
    Pds(BusId),
    Pc(BusId),
    Qds(BusId),
    Qc(BusId),
    Pgrid,
    Qgrid,
    Alpha(LineId),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = |e: &End| if *e == End::From { "from" } else { "to" };
        match self {
            Symbol::Nu(b) => write!(f, "nu[{b}]"),
            Symbol::NuLine(l, e) => write!(f, "nu_line[{l},{}]", end(e)),
            Symbol::Isq(l) => write!(f, "isq[{l}]"),
            Symbol::P(l, e) => write!(f, "p[{l},{}]", end(e)),
            Symbol::Q(l, e) => write!(f, "q[{l},{}]", end(e)),
            Symbol::R(l) => write!(f, "r[{l}]"),
            Symbol::T(l) => write!(f, "t[{l}]"),
            Symbol::Beta(l, e) => write!(f, "beta[{l},{}]", end(e)),
            Symbol::Pds(b) => write!(f, "p_served[{b}]"),
            Symbol::Pc(b) => write!(f, "p_curtailed[{b}]"),
            Symbol::Qds(b) => write!(f, "q_served[{b}]"),
            Symbol::Qc(b) => write!(f, "q_curtailed[{b}]"),
            Symbol::Pgrid => f.write_str("p_grid"),
            Symbol::Qgrid => f.write_str("q_grid"),
            Symbol::Alpha(l) => write!(f, "alpha[{l}]"),
        }
    }
}

/// Symbol → variable index. Slack variables introduced by the status
/// coupling are not named.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarMap(BTreeMap<Symbol, usize>);

impl VarMap {
    pub fn get(&self, sym: Symbol) -> Option<usize> {
        self.0.get(&sym).copied()
    }

    /// Index of a symbol the model is known to contain.
    pub fn index(&self, sym: Symbol) -> usize {
        self.get(sym)
            .unwrap_or_else(|| panic!("symbol {sym} is not part of the model"))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Symbol, usize)> + '_ {
        self.0.iter().map(|(s, i)| (*s, *i))
    }

    fn insert(&mut self, sym: Symbol, index: usize) {
        let previous = self.0.insert(sym, index);
        debug_assert!(previous.is_none(), "{sym} defined twice");
    }
}

/// Conic program plus the binary metadata of its switch variables.
#[derive(Debug, Clone)]
pub struct MicpModel {
    pub program: ConicProgram<f64>,
    /// Variable indices of the `α` switch decisions, in ascending switch id.
    pub binary_vars: Vec<usize>,
    pub var_map: VarMap,
    pub kind: ModelKind,
    pub voll: f64,
    pub network: Network,
    pub scenario: FaultScenario,
}

impl MicpModel {
    pub fn switch_ids(&self) -> Vec<LineId> {
        self.network.switch_ids()
    }

    /// Continuous relaxation: every `α` in `[0, 1]`.
    pub fn relax_binaries(&self) -> ConicProgram<f64> {
        self.program.clone()
    }

    /// Fixes every `α` to its assigned value and folds it into the
    /// right-hand side, leaving a purely continuous program.
    pub fn fix_binaries(&self, assignment: &SwitchAssignment) -> Result<ConicProgram<f64>> {
        assignment.validate(&self.network)?;
        let mut values = BTreeMap::new();
        for id in self.switch_ids() {
            let var = self.var_map.index(Symbol::Alpha(id));
            values.insert(var, if assignment.0[&id] { 1.0 } else { 0.0 });
        }
        Ok(fix_variables(&self.program, &values))
    }
}

pub fn relax_binaries(model: &MicpModel) -> ConicProgram<f64> {
    model.relax_binaries()
}

pub fn fix_binaries(model: &MicpModel, assignment: &SwitchAssignment) -> Result<ConicProgram<f64>> {
    model.fix_binaries(assignment)
}

/// Substitutes constant values for the given variables. The variables stay
/// in the program (so indices are unchanged) with their box collapsed.
pub(crate) fn fix_variables(
    program: &ConicProgram<f64>,
    values: &BTreeMap<usize, f64>,
) -> ConicProgram<f64> {
    let mut out = program.clone();
    out.equalities.retain(|t| match values.get(&t.col) {
        Some(v) => {
            out.rhs[t.row] -= t.val * v;
            false
        }
        None => true,
    });
    for b in &mut out.box_vars {
        if let Some(&v) = values.get(&b.index) {
            b.lower = v;
            b.upper = v;
        }
    }
    out
}

pub fn build_branch_flow(
    network: &Network,
    scenario: &FaultScenario,
    voll: f64,
) -> Result<MicpModel> {
    Builder::new(network, scenario, voll, ModelKind::BranchFlow)?.build()
}

pub fn build_bus_injection(
    network: &Network,
    scenario: &FaultScenario,
    voll: f64,
) -> Result<MicpModel> {
    Builder::new(network, scenario, voll, ModelKind::BusInjection)?.build()
}

pub fn build_model(
    network: &Network,
    scenario: &FaultScenario,
    voll: f64,
    kind: ModelKind,
) -> Result<MicpModel> {
    Builder::new(network, scenario, voll, kind)?.build()
}

/// Status of a line inside the model.
#[derive(Clone, Copy)]
enum Status {
    Constant(bool),
    Switch(usize),
}

struct Builder<'a> {
    network: &'a Network,
    scenario: &'a FaultScenario,
    voll: f64,
    kind: ModelKind,
    prog: ConicProgram<f64>,
    vars: VarMap,
}

impl<'a> Builder<'a> {
    fn new(
        network: &'a Network,
        scenario: &'a FaultScenario,
        voll: f64,
        kind: ModelKind,
    ) -> Result<Self> {
        scenario.validate(network)?;
        if !(voll > 0.0 && voll.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "voll must be positive and finite, got {voll}"
            )));
        }
        Ok(Builder {
            network,
            scenario,
            voll,
            kind,
            prog: ConicProgram::new(),
            vars: VarMap::default(),
        })
    }

    fn named(&mut self, sym: Symbol, var: usize) -> usize {
        self.vars.insert(sym, var);
        var
    }

    fn free(&mut self, sym: Symbol) -> usize {
        let v = self.prog.add_var();
        self.named(sym, v)
    }

    fn nonneg(&mut self, sym: Symbol) -> usize {
        let v = self.prog.add_nonneg_var();
        self.named(sym, v)
    }

    fn boxed(&mut self, sym: Symbol, lo: f64, hi: f64) -> usize {
        let v = self.prog.add_box_var(lo, hi);
        self.named(sym, v)
    }

    fn v(&self, sym: Symbol) -> usize {
        self.vars.index(sym)
    }

    fn build(mut self) -> Result<MicpModel> {
        let net = self.network;
        let sub = net.substation().id;

        // buses
        for bus in net.buses() {
            let nu = self.boxed(
                Symbol::Nu(bus.id),
                bus.v_min * bus.v_min,
                bus.v_max * bus.v_max,
            );
            if bus.is_substation {
                self.prog.add_equality(&[(nu, 1.0)], 1.0);
            }
            let pds = self.nonneg(Symbol::Pds(bus.id));
            let pc = self.nonneg(Symbol::Pc(bus.id));
            let qds = self.nonneg(Symbol::Qds(bus.id));
            let qc = self.nonneg(Symbol::Qc(bus.id));
            self.prog
                .add_equality(&[(pds, 1.0), (pc, 1.0)], bus.p_demand);
            self.prog
                .add_equality(&[(qds, 1.0), (qc, 1.0)], bus.q_demand);
            if !bus.is_substation {
                self.prog.set_cost(pc, self.voll);
            }
        }
        let pgrid = self.free(Symbol::Pgrid);
        let qgrid = self.free(Symbol::Qgrid);
        self.prog.set_cost(pgrid, 1.0);

        // switch decisions, in ascending switch id
        let mut binary_vars = Vec::new();
        for id in net.switch_ids() {
            let a = self.boxed(Symbol::Alpha(id), 0.0, 1.0);
            binary_vars.push(a);
        }

        for line in net.lines() {
            let status = if line.switchable {
                Status::Switch(self.v(Symbol::Alpha(line.id)))
            } else {
                Status::Constant(self.scenario.in_service(line.id))
            };
            self.status_coupling(line, End::From, status);
            self.status_coupling(line, End::To, status);
            self.radiality(line, status, sub);
            match self.kind {
                ModelKind::BranchFlow => self.branch_flow_line(line),
                ModelKind::BusInjection => self.bus_injection_line(line),
            }
        }

        for bus in net.buses() {
            self.balance(bus.id, bus.is_substation, pgrid, qgrid);
            if !bus.is_substation {
                let terms: Vec<(usize, f64)> = net
                    .incident_lines(bus.id)
                    .map(|l| (self.v(Symbol::Beta(l.id, end_of(l, bus.id))), 1.0))
                    .collect();
                self.prog.add_equality(&terms, 1.0);
            }
        }

        Ok(MicpModel {
            program: self.prog,
            binary_vars,
            var_map: self.vars,
            kind: self.kind,
            voll: self.voll,
            network: net.clone(),
            scenario: self.scenario.clone(),
        })
    }

    /// `0 ≤ ν^ℓ ≤ v̄²·s` and `0 ≤ ν − ν^ℓ ≤ v̄²·(1 − s)` at one end.
    fn status_coupling(&mut self, line: &Line, end: End, status: Status) {
        let bus_id = bus_at(line, end);
        let bus = self.network.bus(bus_id).expect("line endpoint exists");
        let vmax2 = bus.v_max * bus.v_max;
        let nu = self.v(Symbol::Nu(bus_id));
        let sym = Symbol::NuLine(line.id, end);
        match status {
            Status::Constant(true) => {
                let nl = self.boxed(sym, 0.0, vmax2);
                self.prog.add_equality(&[(nu, 1.0), (nl, -1.0)], 0.0);
            }
            Status::Constant(false) => {
                // the companion bound 0 ≤ ν ≤ v̄² is already the voltage box
                self.boxed(sym, 0.0, 0.0);
            }
            Status::Switch(alpha) => {
                let nl = self.nonneg(sym);
                let s1 = self.prog.add_nonneg_var();
                let s2 = self.prog.add_nonneg_var();
                let s3 = self.prog.add_nonneg_var();
                self.prog
                    .add_equality(&[(nl, 1.0), (alpha, -vmax2), (s1, 1.0)], 0.0);
                self.prog
                    .add_equality(&[(nu, 1.0), (nl, -1.0), (s2, -1.0)], 0.0);
                self.prog
                    .add_equality(&[(nu, 1.0), (nl, -1.0), (alpha, vmax2), (s3, 1.0)], vmax2);
            }
        }
    }

    fn radiality(&mut self, line: &Line, status: Status, sub: BusId) {
        let mut betas = [0; 2];
        for (k, end) in [End::From, End::To].into_iter().enumerate() {
            let hi = if bus_at(line, end) == sub { 0.0 } else { 1.0 };
            betas[k] = self.boxed(Symbol::Beta(line.id, end), 0.0, hi);
        }
        match status {
            Status::Constant(s) => {
                self.prog.add_equality(
                    &[(betas[0], 1.0), (betas[1], 1.0)],
                    if s { 1.0 } else { 0.0 },
                );
            }
            Status::Switch(alpha) => {
                self.prog
                    .add_equality(&[(betas[0], 1.0), (betas[1], 1.0), (alpha, -1.0)], 0.0);
            }
        }
    }

    fn branch_flow_line(&mut self, line: &Line) {
        let id = line.id;
        let isq = self.free(Symbol::Isq(id));
        let p = self.free(Symbol::P(id, End::From));
        let q = self.free(Symbol::Q(id, End::From));
        let nu_i = self.v(Symbol::NuLine(id, End::From));
        let nu_j = self.v(Symbol::NuLine(id, End::To));
        self.prog
            .add_rotated(crate::conic::RotatedCone::product(nu_i, isq, vec![p, q]));
        self.prog.add_equality(
            &[
                (nu_j, 1.0),
                (nu_i, -1.0),
                (p, 2.0 * line.r),
                (q, 2.0 * line.x),
                (isq, -line.z_squared()),
            ],
            0.0,
        );
    }

    fn bus_injection_line(&mut self, line: &Line) {
        let id = line.id;
        let (r, x, z2) = (line.r, line.x, line.z_squared());
        let rr = self.nonneg(Symbol::R(id));
        let t = self.free(Symbol::T(id));
        let p_ij = self.free(Symbol::P(id, End::From));
        let q_ij = self.free(Symbol::Q(id, End::From));
        let p_ji = self.free(Symbol::P(id, End::To));
        let q_ji = self.free(Symbol::Q(id, End::To));
        let isq = self.nonneg(Symbol::Isq(id));
        let nu_i = self.v(Symbol::NuLine(id, End::From));
        let nu_j = self.v(Symbol::NuLine(id, End::To));
        self.prog
            .add_rotated(crate::conic::RotatedCone::product(nu_i, nu_j, vec![rr, t]));
        let (a, b) = (r / z2, x / z2);
        self.prog
            .add_equality(&[(p_ij, 1.0), (nu_i, -a), (rr, a), (t, -b)], 0.0);
        self.prog
            .add_equality(&[(q_ij, 1.0), (nu_i, -b), (rr, b), (t, a)], 0.0);
        self.prog
            .add_equality(&[(p_ji, 1.0), (nu_j, -a), (rr, a), (t, b)], 0.0);
        self.prog
            .add_equality(&[(q_ji, 1.0), (nu_j, -b), (rr, b), (t, -a)], 0.0);
        let c = 1.0 / z2;
        self.prog
            .add_equality(&[(isq, 1.0), (nu_i, -c), (nu_j, -c), (rr, 2.0 * c)], 0.0);
    }

    /// Nodal balance at a load bus, or the grid supply at the substation.
    fn balance(&mut self, bus: BusId, is_substation: bool, pgrid: usize, qgrid: usize) {
        // net real/reactive power leaving the bus over its lines
        let mut p_out: Vec<(usize, f64)> = Vec::new();
        let mut q_out: Vec<(usize, f64)> = Vec::new();
        let lines: Vec<Line> = self.network.incident_lines(bus).cloned().collect();
        for line in &lines {
            let end = end_of(line, bus);
            match self.kind {
                ModelKind::BusInjection => {
                    p_out.push((self.v(Symbol::P(line.id, end)), 1.0));
                    q_out.push((self.v(Symbol::Q(line.id, end)), 1.0));
                }
                ModelKind::BranchFlow => {
                    let p = self.v(Symbol::P(line.id, End::From));
                    let q = self.v(Symbol::Q(line.id, End::From));
                    match end {
                        End::From => {
                            p_out.push((p, 1.0));
                            q_out.push((q, 1.0));
                        }
                        End::To => {
                            // arrives as P_ij - r I^sq
                            let isq = self.v(Symbol::Isq(line.id));
                            p_out.extend([(p, -1.0), (isq, line.r)]);
                            q_out.extend([(q, -1.0), (isq, line.x)]);
                        }
                    }
                }
            }
        }
        if is_substation {
            p_out.push((pgrid, -1.0));
            q_out.push((qgrid, -1.0));
        } else {
            p_out.push((self.v(Symbol::Pds(bus)), 1.0));
            q_out.push((self.v(Symbol::Qds(bus)), 1.0));
        }
        self.prog.add_equality(&p_out, 0.0);
        self.prog.add_equality(&q_out, 0.0);
    }
}

pub(crate) fn bus_at(line: &Line, end: End) -> BusId {
    match end {
        End::From => line.from,
        End::To => line.to,
    }
}

pub(crate) fn end_of(line: &Line, bus: BusId) -> End {
    if line.from == bus {
        End::From
    } else {
        End::To
    }
}

#[cfg(test)]
mod tests;
