//! Embedded solver for continuous conic programs.
//!
//! The program is presolved into `min cᵀx s.t. A x + s = b, s ∈ K` with `K`
//! a product of the zero cone, intervals and second-order cones (rotated
//! cones are mapped through [`rotated_to_soc`]) and equilibrated. Two
//! algorithms share that front end: a primal-dual interior-point method
//! (default, high accuracy) and an operator-splitting iteration (cheap
//! iterations, first-order accuracy). Both factor quasi-definite systems
//! with the sparse LDLᵀ in [`ldl`].

mod admm;
pub mod cones;
mod ipm;
pub mod ldl;
mod presolve;
mod residual;
mod scaling;
pub mod sparse;

use std::fmt::Write as _;

use serde::Serialize;

use crate::conic::ConicProgram;
use crate::error::Result;
use crate::scalar::Scalar;

pub use cones::{project_soc, rotated_point_to_soc, rotated_to_soc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    InteriorPoint,
    Admm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings<T> {
    pub algorithm: Algorithm,
    pub eps_primal: T,
    pub eps_dual: T,
    /// Iteration cap (interior-point iterations are also capped at 500).
    pub max_iters: usize,
    /// Relaxation factor in (1, 2).
    pub over_relaxation: T,
    /// Ruiz equilibration of the constraint matrix.
    pub scaling: bool,
    /// Initial ADMM step (penalty) parameter.
    pub step_rho: T,
    /// Rebalance the step parameter from the residual ratio.
    pub adaptive_rho: bool,
    /// Tolerance of the infeasibility certificates.
    pub eps_infeasible: T,
    /// Record per-iteration residuals in [`SocpSolution::trace`].
    pub record_trace: bool,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        SolverSettings {
            algorithm: Algorithm::InteriorPoint,
            eps_primal: T::lit(1e-7),
            eps_dual: T::lit(1e-7),
            max_iters: 100_000,
            over_relaxation: T::lit(1.6),
            scaling: true,
            step_rho: T::one(),
            adaptive_rho: true,
            eps_infeasible: T::lit(1e-6),
            record_trace: false,
        }
    }
}

impl<T: Scalar> SolverSettings<T> {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error::InvalidParameter as bad;
        if !(self.eps_primal > T::zero()
            && self.eps_dual > T::zero()
            && self.eps_infeasible > T::zero())
        {
            return Err(bad("solver tolerances must be positive".into()));
        }
        if self.max_iters < 1 {
            return Err(bad("max_iters must be at least 1".into()));
        }
        if !(self.over_relaxation > T::zero() && self.over_relaxation < T::lit(2.0)) {
            return Err(bad("over_relaxation must lie in (0, 2)".into()));
        }
        if !(self.step_rho > T::zero()) {
            return Err(bad("step_rho must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SocpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for SocpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SocpStatus::Optimal => "optimal",
            SocpStatus::Infeasible => "infeasible",
            SocpStatus::Unbounded => "unbounded",
            SocpStatus::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    pub duality_gap: T,
    pub rho: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocpSolution<T> {
    pub status: SocpStatus,
    /// Primal point over the original variables.
    pub x: Vec<T>,
    /// Multipliers of the original equality rows (zero for rows removed in presolve).
    pub y: Vec<T>,
    pub objective: T,
    /// Infinity norm of `A x + s - b` over the reduced constraints.
    pub primal_residual: T,
    pub dual_residual: T,
    pub duality_gap: T,
    pub iters: usize,
    /// Why the problem was declared infeasible or unbounded, when it was.
    pub certificate: Option<String>,
    pub trace: Vec<TraceRow<T>>,
}

impl<T: Scalar> SocpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == SocpStatus::Optimal
    }

    /// Per-iteration residual trace as CSV.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,primal_residual,dual_residual,duality_gap,rho\n");
        for r in &self.trace {
            writeln!(
                s,
                "{},{:e},{:e},{:e},{:e}",
                r.iteration,
                r.primal_residual.as_f64(),
                r.dual_residual.as_f64(),
                r.duality_gap.as_f64(),
                r.rho.as_f64()
            )
            .unwrap();
        }
        s
    }
}

/// Solves a continuous conic program. Deterministic for identical inputs.
pub fn solve<T: Scalar>(
    program: &ConicProgram<T>,
    settings: &SolverSettings<T>,
) -> Result<SocpSolution<T>> {
    program.validate()?;
    settings.validate()?;
    match presolve::presolve(program) {
        presolve::Presolved::Infeasible(why) => Ok(SocpSolution {
            status: SocpStatus::Infeasible,
            x: vec![T::zero(); program.n_vars],
            y: vec![T::zero(); program.n_equalities()],
            objective: T::nan(),
            primal_residual: T::infinity(),
            dual_residual: T::infinity(),
            duality_gap: T::infinity(),
            iters: 0,
            certificate: Some(format!("presolve: {why}")),
            trace: Vec::new(),
        }),
        presolve::Presolved::Reduced(form, reduction) => {
            let out = match settings.algorithm {
                Algorithm::InteriorPoint => ipm::run(form, settings)?,
                Algorithm::Admm => admm::run(form, settings)?,
            };
            let x = reduction.expand_x(&out.x);
            let y = reduction.expand_y(&out.y);
            let objective = program.objective_value(&x);
            Ok(SocpSolution {
                status: out.status,
                x,
                y,
                objective,
                primal_residual: out.primal_residual,
                dual_residual: out.dual_residual,
                duality_gap: out.duality_gap,
                iters: out.iters,
                certificate: out.certificate,
                trace: out.trace,
            })
        }
    }
}
