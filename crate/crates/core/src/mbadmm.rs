//! Mixed-binary ADMM for the reconfiguration model.
//!
//! The switch decisions get a binary copy `u ∈ {0,1}^m`; the `α` columns of
//! the relaxed conic program play the continuous copy `y ∈ [0,1]^m`. Each
//! iteration solves
//!
//! 1. `u ← argmin (ρ/2)‖u − y + λ/ρ‖²` as a QUBO with the chosen backend,
//! 2. `y ← argmin cᵀx + (ρ/2)‖y − u − λ/ρ‖²` over the relaxed program, with
//!    the penalty as a rotated-cone epigraph,
//! 3. `λ ← λ + ρ(u − y)`,
//!
//! and stops when `‖u − y‖∞ ≤ eps_residual`. The final `y` is rounded at the
//! threshold, repaired to the Hamming-nearest radial assignment when it is
//! not a spanning tree, and polished by one fixed-binary solve. Convergence
//! is not guaranteed; the flag and the full trace report what happened.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::conic::{ConicProgram, RotatedCone};
use crate::error::{Error, Result};
use crate::exact::solve_assignment;
use crate::formulation::{FlowSolution, MicpModel};
use crate::netmodel::{
    effective_status, enumerate_radial_configs, is_spanning_tree, SwitchAssignment,
};
use crate::qubo::{
    solve_exhaustive, solve_qaoa, solve_sa, AnnealSchedule, QaoaParams, Qubo, QuboMethod,
};
use crate::socp::{self, SocpStatus, SolverSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmParams {
    pub rho: f64,
    pub max_outer_iters: usize,
    pub eps_residual: f64,
    pub threshold: f64,
    pub qubo_backend: QuboMethod,
    pub seed: u64,
    pub anneal: AnnealSchedule,
    pub anneal_restarts: usize,
    /// Angles, shots and budget of the QAOA backend; its seed is derived from `seed`.
    pub qaoa: QaoaParams,
}

impl Default for AdmmParams {
    fn default() -> Self {
        AdmmParams {
            rho: 10.0,
            max_outer_iters: 100,
            eps_residual: 1e-4,
            threshold: 0.5,
            qubo_backend: QuboMethod::Exhaustive,
            seed: 0,
            anneal: AnnealSchedule::default(),
            anneal_restarts: 10,
            qaoa: QaoaParams::default(),
        }
    }
}

impl AdmmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter("rho must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidParameter(
                "rounding threshold must lie in (0, 1)".into(),
            ));
        }
        if !(self.eps_residual > 0.0) || self.max_outer_iters == 0 {
            return Err(Error::InvalidParameter(
                "eps_residual and max_outer_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmmTraceRow {
    pub iteration: usize,
    /// `‖u − y‖∞`
    pub primal_residual: f64,
    /// `ρ‖y − y_prev‖∞`
    pub dual_residual: f64,
    /// Model objective at the continuous iterate, penalty excluded.
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmmResult {
    pub assignment: SwitchAssignment,
    /// Polished solution for `assignment`; absent when the polish failed.
    pub flow: Option<FlowSolution>,
    pub status: SocpStatus,
    pub trace: Vec<AdmmTraceRow>,
    pub converged: bool,
    pub iterations: usize,
    /// The rounded assignment was not radial and was replaced.
    pub repaired: bool,
    /// Objective of the continuous relaxation (a lower bound).
    pub relaxation_objective: f64,
}

impl AdmmResult {
    pub fn objective(&self) -> f64 {
        self.flow.as_ref().map_or(f64::NAN, |f| f.objective)
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,primal_residual,dual_residual,objective\n");
        for r in &self.trace {
            writeln!(
                s,
                "{},{:.10e},{:.10e},{:.10e}",
                r.iteration, r.primal_residual, r.dual_residual, r.objective
            )
            .unwrap();
        }
        s
    }
}

/// Binary block of the split: `(ρ/2)‖u − t‖²` with `t = y − λ/ρ`, expanded
/// over `u ∈ {0,1}` as `Σ (ρ/2)(1 − 2t_i) u_i + (ρ/2)‖t‖²`.
pub fn build_step_qubo(y: &[f64], lambda: &[f64], rho: f64) -> Result<Qubo> {
    if y.len() != lambda.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: lambda.len(),
        });
    }
    let t: Vec<f64> = y.iter().zip(lambda).map(|(y, l)| y - l / rho).collect();
    let linear = t.iter().map(|t| 0.5 * rho * (1.0 - 2.0 * t)).collect();
    let offset = 0.5 * rho * t.iter().map(|t| t * t).sum::<f64>();
    Qubo::separable(linear, offset)
}

/// Relaxed program plus `(ρ/2)‖y − w‖² ≤ τ` with `τ` in the objective.
/// `w` enters only through the right-hand side, so one skeleton serves all
/// iterations.
struct PenaltyProgram {
    program: ConicProgram<f64>,
    /// Equality rows `d_i − y_i = −w_i`.
    rows: Vec<usize>,
    n_model: usize,
}

impl PenaltyProgram {
    fn new(model: &MicpModel, rho: f64) -> Self {
        let mut program = model.relax_binaries();
        let n_model = program.n_vars;
        let tau = program.add_nonneg_var();
        program.set_cost(tau, 1.0);
        let one = program.add_box_var(1.0, 1.0);
        let mut body = Vec::with_capacity(model.binary_vars.len());
        let mut rows = Vec::with_capacity(model.binary_vars.len());
        for &y in &model.binary_vars {
            let d = program.add_var();
            rows.push(program.add_equality(&[(d, 1.0), (y, -1.0)], 0.0));
            body.push(d);
        }
        // 2·τ·1 ≥ ρ‖d‖²
        program.add_rotated(RotatedCone {
            p: tau,
            q: one,
            body,
            weight: rho,
        });
        PenaltyProgram {
            program,
            rows,
            n_model,
        }
    }

    fn set_target(&mut self, w: &[f64]) {
        for (&r, &w) in self.rows.iter().zip(w) {
            self.program.rhs[r] = -w;
        }
    }
}

fn round(y: &[f64], threshold: f64, model: &MicpModel) -> SwitchAssignment {
    SwitchAssignment(
        model
            .switch_ids()
            .into_iter()
            .zip(y)
            .map(|(id, &v)| (id, v > threshold))
            .collect(),
    )
}

fn is_radial(model: &MicpModel, a: &SwitchAssignment) -> Result<bool> {
    let status = effective_status(&model.network, &model.scenario, a)?;
    let closed: BTreeSet<_> = status
        .into_iter()
        .filter(|(_, c)| *c)
        .map(|(id, _)| id)
        .collect();
    Ok(is_spanning_tree(&model.network, &closed))
}

/// Runs the split on `model`. Deterministic for fixed parameters.
pub fn solve_admm(
    model: &MicpModel,
    params: &AdmmParams,
    settings: &SolverSettings<f64>,
) -> Result<AdmmResult> {
    params.validate()?;
    let m = model.binary_vars.len();
    let rho = params.rho;

    let relaxed = socp::solve(&model.relax_binaries(), settings)?;
    if matches!(
        relaxed.status,
        SocpStatus::Infeasible | SocpStatus::Unbounded
    ) {
        return Err(Error::Infeasible(format!(
            "continuous relaxation is {}",
            relaxed.status
        )));
    }
    let relaxation_objective = relaxed.objective;
    let mut y: Vec<f64> = model.binary_vars.iter().map(|&i| relaxed.x[i]).collect();
    let mut lambda = vec![0.0; m];
    let mut trace = Vec::new();
    let mut converged = m == 0;
    if m == 0 {
        trace.push(AdmmTraceRow {
            iteration: 1,
            primal_residual: 0.0,
            dual_residual: 0.0,
            objective: relaxed.objective,
        });
    }

    let mut penalty = PenaltyProgram::new(model, rho);
    let mut any_solved = m == 0;
    for k in 1..=if m == 0 { 0 } else { params.max_outer_iters } {
        let step = build_step_qubo(&y, &lambda, rho)?;
        let u: Vec<f64> = qubo_step(&step, params, k)?
            .into_iter()
            .map(f64::from)
            .collect();

        let w: Vec<f64> = u.iter().zip(&lambda).map(|(u, l)| u + l / rho).collect();
        penalty.set_target(&w);
        let out = socp::solve(&penalty.program, settings)?;
        let objective = model.program.objective_value(&out.x[..penalty.n_model]);
        if matches!(out.status, SocpStatus::Infeasible | SocpStatus::Unbounded) {
            trace.push(AdmmTraceRow {
                iteration: k,
                primal_residual: f64::NAN,
                dual_residual: f64::NAN,
                objective,
            });
            continue;
        }
        any_solved = true;
        let y_new: Vec<f64> = model.binary_vars.iter().map(|&i| out.x[i]).collect();
        let dual = rho
            * y_new
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        y = y_new;
        for i in 0..m {
            lambda[i] += rho * (u[i] - y[i]);
        }
        let primal = u
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trace.push(AdmmTraceRow {
            iteration: k,
            primal_residual: primal,
            dual_residual: dual,
            objective,
        });
        if primal <= params.eps_residual {
            converged = true;
            break;
        }
    }
    if !any_solved {
        return Err(Error::Infeasible(
            "continuous step infeasible at every iterate".into(),
        ));
    }

    let mut assignment = round(&y, params.threshold, model);
    let mut repaired = false;
    if !is_radial(model, &assignment)? {
        let radial = enumerate_radial_configs(&model.network, &model.scenario)?;
        let nearest = radial
            .into_iter()
            .min_by_key(|a| a.hamming(&assignment))
            .ok_or_else(|| Error::Infeasible("no radial switch assignment exists".into()))?;
        assignment = nearest;
        repaired = true;
    }
    let polished = solve_assignment(model, &assignment, settings)?;
    Ok(AdmmResult {
        assignment,
        flow: polished.solution,
        status: polished.status,
        iterations: trace.len(),
        trace,
        converged,
        repaired,
        relaxation_objective,
    })
}

fn qubo_step(step: &Qubo, params: &AdmmParams, iteration: usize) -> Result<Vec<u8>> {
    // a distinct, reproducible stream per iteration
    let seed = params
        .seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(iteration as u64);
    let sol = match params.qubo_backend {
        QuboMethod::Exhaustive => solve_exhaustive(step)?,
        QuboMethod::Annealing => solve_sa(step, &params.anneal, params.anneal_restarts, seed)?,
        QuboMethod::Qaoa => solve_qaoa(
            step,
            &QaoaParams {
                seed,
                ..params.qaoa.clone()
            },
        )?,
    };
    Ok(sol.bits)
}
