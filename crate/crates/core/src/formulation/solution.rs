use serde::Serialize;

use super::{End, MicpModel, ModelKind, Symbol};
use crate::netmodel::{effective_status, BusId, LineId, SwitchAssignment};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusResult {
    pub id: BusId,
    /// Squared voltage magnitude (pu²).
    pub nu: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub p_demand: f64,
    pub q_demand: f64,
    pub p_served: f64,
    pub p_curtailed: f64,
    pub q_served: f64,
    pub q_curtailed: f64,
}

impl BusResult {
    /// `√ν`, with negative round-off clamped to zero.
    pub fn v_mag(&self) -> f64 {
        self.nu.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineResult {
    pub id: LineId,
    pub from: BusId,
    pub to: BusId,
    pub closed: bool,
    /// Real power leaving the `from` bus into the line (pu).
    pub p_from: f64,
    pub q_from: f64,
    /// Real power leaving the `to` bus into the line (pu).
    pub p_to: f64,
    pub q_to: f64,
    /// Squared current (pu²).
    pub i_sq: f64,
    pub nu_from: f64,
    pub nu_to: f64,
    /// `V_i V_j cos θ` and `V_i V_j sin θ` (bus-injection model only).
    pub r_aux: Option<f64>,
    pub t_aux: Option<f64>,
    pub beta_from: f64,
    pub beta_to: f64,
}

impl LineResult {
    pub fn i_mag(&self) -> f64 {
        self.i_sq.max(0.0).sqrt()
    }
}

/// Physical quantities decoded from a solver vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSolution {
    pub kind: ModelKind,
    pub assignment: SwitchAssignment,
    pub buses: Vec<BusResult>,
    pub lines: Vec<LineResult>,
    pub p_grid: f64,
    pub q_grid: f64,
    /// `c·x` of the model objective.
    pub objective: f64,
}

impl FlowSolution {
    pub fn total_p_curtailed(&self) -> f64 {
        self.buses.iter().map(|b| b.p_curtailed).sum()
    }

    pub fn total_q_curtailed(&self) -> f64 {
        self.buses.iter().map(|b| b.q_curtailed).sum()
    }

    /// `P^grid + voll · Σ P^c`, recomputed from the decoded quantities.
    pub fn physical_objective(&self, voll: f64) -> f64 {
        // the substation has no demand, so its curtailment is zero
        self.p_grid + voll * self.total_p_curtailed()
    }

    pub fn line(&self, id: LineId) -> Option<&LineResult> {
        self.lines.iter().find(|l| l.id == id)
    }

    pub fn bus(&self, id: BusId) -> Option<&BusResult> {
        self.buses.iter().find(|b| b.id == id)
    }

    /// Violated physical invariants at tolerance `tol`: voltage window,
    /// served + curtailed = demand, nonnegative served/curtailed load, and
    /// zero flow on open lines. Empty when the solution is consistent.
    pub fn validity_report(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for b in &self.buses {
            let (lo, hi) = (b.v_min * b.v_min, b.v_max * b.v_max);
            if b.nu < lo - tol || b.nu > hi + tol {
                out.push(format!(
                    "bus {}: squared voltage {:.9} outside [{lo:.6}, {hi:.6}]",
                    b.id, b.nu
                ));
            }
            if (b.p_served + b.p_curtailed - b.p_demand).abs() > tol {
                out.push(format!(
                    "bus {}: served + curtailed real power differs from demand",
                    b.id
                ));
            }
            if (b.q_served + b.q_curtailed - b.q_demand).abs() > tol {
                out.push(format!(
                    "bus {}: served + curtailed reactive power differs from demand",
                    b.id
                ));
            }
            if b.p_served
                .min(b.p_curtailed)
                .min(b.q_served)
                .min(b.q_curtailed)
                < -tol
            {
                out.push(format!("bus {}: negative served or curtailed load", b.id));
            }
        }
        for l in &self.lines {
            if !l.closed {
                let worst = [l.p_from, l.q_from, l.p_to, l.q_to, l.i_sq]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                if worst > tol {
                    out.push(format!("line {}: open but carries flow {worst:e}", l.id));
                }
            }
        }
        out
    }
}

/// Decodes `x` (a solution of the model, or of a fixed-binary copy of it).
pub fn extract_solution(
    model: &MicpModel,
    x: &[f64],
    assignment: &SwitchAssignment,
) -> Result<FlowSolution> {
    if x.len() != model.program.n_vars {
        return Err(crate::Error::Dimension {
            expected: model.program.n_vars,
            got: x.len(),
        });
    }
    let status = effective_status(&model.network, &model.scenario, assignment)?;
    let val = |sym: Symbol| x[model.var_map.index(sym)];
    let opt = |sym: Symbol| model.var_map.get(sym).map(|i| x[i]);

    let buses = model
        .network
        .buses()
        .iter()
        .map(|b| BusResult {
            id: b.id,
            nu: val(Symbol::Nu(b.id)),
            v_min: b.v_min,
            v_max: b.v_max,
            p_demand: b.p_demand,
            q_demand: b.q_demand,
            p_served: val(Symbol::Pds(b.id)),
            p_curtailed: val(Symbol::Pc(b.id)),
            q_served: val(Symbol::Qds(b.id)),
            q_curtailed: val(Symbol::Qc(b.id)),
        })
        .collect();

    let lines = model
        .network
        .lines()
        .iter()
        .map(|l| {
            let i_sq = val(Symbol::Isq(l.id));
            let p_from = val(Symbol::P(l.id, End::From));
            let q_from = val(Symbol::Q(l.id, End::From));
            let (p_to, q_to) = match model.kind {
                ModelKind::BusInjection => {
                    (val(Symbol::P(l.id, End::To)), val(Symbol::Q(l.id, End::To)))
                }
                ModelKind::BranchFlow => (l.r * i_sq - p_from, l.x * i_sq - q_from),
            };
            LineResult {
                id: l.id,
                from: l.from,
                to: l.to,
                closed: status[&l.id],
                p_from,
                q_from,
                p_to,
                q_to,
                i_sq,
                nu_from: val(Symbol::NuLine(l.id, End::From)),
                nu_to: val(Symbol::NuLine(l.id, End::To)),
                r_aux: opt(Symbol::R(l.id)),
                t_aux: opt(Symbol::T(l.id)),
                beta_from: val(Symbol::Beta(l.id, End::From)),
                beta_to: val(Symbol::Beta(l.id, End::To)),
            }
        })
        .collect();

    Ok(FlowSolution {
        kind: model.kind,
        assignment: assignment.clone(),
        buses,
        lines,
        p_grid: val(Symbol::Pgrid),
        q_grid: val(Symbol::Qgrid),
        objective: model.program.objective_value(x),
    })
}

/// Largest gap between the two sides of the relaxed cone over closed lines
/// (pu²): `|P² + Q² − ν_i^ℓ I^sq|` (branch-flow) or `|R² + T² − ν_i^ℓ ν_j^ℓ|`
/// (bus-injection). Zero when every line is open.
pub fn cone_exactness(model: &MicpModel, solution: &FlowSolution) -> f64 {
    solution
        .lines
        .iter()
        .filter(|l| l.closed)
        .map(|l| match model.kind {
            ModelKind::BranchFlow => {
                (l.p_from * l.p_from + l.q_from * l.q_from - l.nu_from * l.i_sq).abs()
            }
            ModelKind::BusInjection => {
                let (r, t) = (l.r_aux.unwrap_or(0.0), l.t_aux.unwrap_or(0.0));
                (r * r + t * t - l.nu_from * l.nu_to).abs()
            }
        })
        .fold(0.0, f64::max)
}
