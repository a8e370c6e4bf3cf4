//! Reference answers by enumeration: every radial switch assignment is fixed
//! into the model and solved as a continuous conic program.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulation::{
    build_model, cone_exactness, extract_solution, FlowSolution, MicpModel, ModelKind,
};
use crate::netmodel::{enumerate_radial_configs, FaultScenario, Network, SwitchAssignment};
use crate::socp::{self, SocpStatus, SolverSettings};

/// Switch count above which enumeration is refused.
pub const MAX_SWITCHES: usize = 12;
/// Rows whose cone-exactness residual exceeds this (pu²) are flagged.
pub const EXACTNESS_FLAG: f64 = 1e-4;

/// One fixed-assignment solve.
#[derive(Debug, Clone)]
pub struct FixedSolve {
    pub status: SocpStatus,
    pub iterations: usize,
    /// Decoded when the solver reached optimality.
    pub solution: Option<FlowSolution>,
    pub exactness: f64,
}

impl FixedSolve {
    pub fn objective(&self) -> f64 {
        self.solution.as_ref().map_or(f64::NAN, |s| s.objective)
    }
}

/// Solves the model with every switch fixed by `assignment`.
pub fn solve_assignment(
    model: &MicpModel,
    assignment: &SwitchAssignment,
    settings: &SolverSettings<f64>,
) -> Result<FixedSolve> {
    let program = model.fix_binaries(assignment)?;
    let out = socp::solve(&program, settings)?;
    let (solution, exactness) = if out.is_optimal() {
        let s = extract_solution(model, &out.x, assignment)?;
        let e = cone_exactness(model, &s);
        (Some(s), e)
    } else {
        (None, f64::NAN)
    };
    Ok(FixedSolve {
        status: out.status,
        iterations: out.iters,
        solution,
        exactness,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnumerationRow {
    pub assignment: SwitchAssignment,
    pub label: String,
    pub status: SocpStatus,
    /// NaN unless optimal.
    pub objective: f64,
    pub p_curtailed: f64,
    pub q_curtailed: f64,
    pub exactness: f64,
    /// Cone-exactness residual above [`EXACTNESS_FLAG`].
    pub inexact: bool,
    pub iterations: usize,
    #[serde(skip)]
    pub solution: Option<FlowSolution>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnumerationReport {
    pub scenario: String,
    pub model: ModelKind,
    /// Optimal rows by ascending objective, then the rest in enumeration order.
    pub rows: Vec<EnumerationRow>,
    pub best: Option<usize>,
    /// Set when no switch assignment yields a spanning tree.
    pub no_radial_assignment: bool,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl EnumerationReport {
    pub fn best_row(&self) -> Option<&EnumerationRow> {
        self.best.map(|i| &self.rows[i])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,assignment,status,objective,p_curtailed,q_curtailed,exactness,inexact,iterations\n");
        for (k, r) in self.rows.iter().enumerate() {
            writeln!(
                s,
                "{},{},{},{:.10e},{:.10e},{:.10e},{:.3e},{},{}",
                k + 1,
                r.label,
                r.status,
                r.objective,
                r.p_curtailed,
                r.q_curtailed,
                r.exactness,
                r.inexact,
                r.iterations
            )
            .unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Solves every radial assignment of the scenario. Rows are solved in
/// parallel; the report does not depend on completion order.
pub fn solve_enumeration(
    network: &Network,
    scenario: &FaultScenario,
    model_kind: ModelKind,
    voll: f64,
    settings: &SolverSettings<f64>,
) -> Result<EnumerationReport> {
    let start = Instant::now();
    let k = network.switch_ids().len();
    if k > MAX_SWITCHES {
        return Err(Error::TooLarge {
            what: "switchable lines",
            size: k,
            limit: MAX_SWITCHES,
        });
    }
    let configs = enumerate_radial_configs(network, scenario)?;
    if configs.is_empty() {
        return Ok(EnumerationReport {
            scenario: scenario.name.clone(),
            model: model_kind,
            rows: Vec::new(),
            best: None,
            no_radial_assignment: true,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    let model = build_model(network, scenario, voll, model_kind)?;
    report_for(&model, configs, settings, start)
}

/// Enumeration over an already built model.
pub fn enumerate_model(
    model: &MicpModel,
    settings: &SolverSettings<f64>,
) -> Result<EnumerationReport> {
    let start = Instant::now();
    let k = model.switch_ids().len();
    if k > MAX_SWITCHES {
        return Err(Error::TooLarge {
            what: "switchable lines",
            size: k,
            limit: MAX_SWITCHES,
        });
    }
    let configs = enumerate_radial_configs(&model.network, &model.scenario)?;
    report_for(model, configs, settings, start)
}

fn report_for(
    model: &MicpModel,
    configs: Vec<SwitchAssignment>,
    settings: &SolverSettings<f64>,
    start: Instant,
) -> Result<EnumerationReport> {
    let solved: Vec<FixedSolve> = configs
        .par_iter()
        .map(|a| solve_assignment(model, a, settings))
        .collect::<Result<_>>()?;

    let mut rows: Vec<EnumerationRow> = configs
        .into_iter()
        .zip(solved)
        .map(|(assignment, fx)| {
            let (pc, qc) = fx.solution.as_ref().map_or((f64::NAN, f64::NAN), |s| {
                (s.total_p_curtailed(), s.total_q_curtailed())
            });
            EnumerationRow {
                label: assignment.label(),
                assignment,
                status: fx.status,
                objective: fx.objective(),
                p_curtailed: pc,
                q_curtailed: qc,
                exactness: fx.exactness,
                inexact: fx.exactness > EXACTNESS_FLAG,
                iterations: fx.iterations,
                solution: fx.solution,
            }
        })
        .collect();
    // stable: non-optimal rows keep enumeration order
    rows.sort_by(|a, b| {
        let ka = (
            a.status != SocpStatus::Optimal,
            if a.status == SocpStatus::Optimal {
                a.objective
            } else {
                0.0
            },
        );
        let kb = (
            b.status != SocpStatus::Optimal,
            if b.status == SocpStatus::Optimal {
                b.objective
            } else {
                0.0
            },
        );
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    let best = rows
        .first()
        .filter(|r| r.status == SocpStatus::Optimal)
        .map(|_| 0);
    Ok(EnumerationReport {
        scenario: model.scenario.name.clone(),
        model: model.kind,
        rows,
        best,
        no_radial_assignment: false,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
