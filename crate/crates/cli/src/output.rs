//! Result documents, CSV profiles and atomic file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use distreconf::formulation::{FlowSolution, ModelKind};
use distreconf::netmodel::SwitchAssignment;
use distreconf::socp::SocpStatus;
use serde::Serialize;

use crate::jobs::Outcome;
use crate::Failure;

pub const RESULT_SCHEMA: &str = "distreconf.result/1";

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure(format!("cannot create '{}': {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .map_err(|e| Failure(format!("cannot write '{}': {}", path.display(), e.error)))?;
    Ok(())
}

/// Scenario name restricted to characters that are safe in a path component.
pub fn dir_name(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("_{s}")
    } else {
        s
    }
}

#[derive(Serialize)]
struct BusOut {
    id: u32,
    v_pu: f64,
    nu: f64,
    p_demand: f64,
    p_served: f64,
    p_curtailed: f64,
    q_demand: f64,
    q_served: f64,
    q_curtailed: f64,
}

#[derive(Serialize)]
struct LineOut {
    id: u32,
    from: u32,
    to: u32,
    closed: bool,
    i_pu: f64,
    i_sq: f64,
    p_from: f64,
    q_from: f64,
    beta_from: f64,
    beta_to: f64,
}

#[derive(Serialize)]
struct AdmmOut {
    qubo: String,
    seed: u64,
    converged: bool,
    iterations: usize,
    repaired: bool,
    relaxation_objective: f64,
}

#[derive(Serialize)]
struct EnumerationOut {
    assignments: usize,
    optimal: usize,
    inexact: usize,
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    schema: &'static str,
    scenario: &'a str,
    faulted_lines: Vec<u32>,
    model: ModelKind,
    solver: &'static str,
    voll: f64,
    status: SocpStatus,
    assignment: Option<&'a SwitchAssignment>,
    closed_switches: Option<String>,
    objective: Option<f64>,
    p_grid: Option<f64>,
    p_curtailed: Option<f64>,
    q_curtailed: Option<f64>,
    cone_exactness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    admm: Option<AdmmOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    enumeration: Option<EnumerationOut>,
    buses: Vec<BusOut>,
    lines: Vec<LineOut>,
}

pub fn result_document(o: &Outcome, voll: f64) -> String {
    let flow = o.flow.as_ref();
    let doc = ResultDoc {
        schema: RESULT_SCHEMA,
        scenario: &o.scenario.name,
        faulted_lines: o.scenario.faulted_lines.iter().map(|l| l.0).collect(),
        model: o.kind,
        solver: o.solver_name(),
        voll,
        status: o.status,
        assignment: o.assignment.as_ref(),
        closed_switches: o.assignment.as_ref().map(SwitchAssignment::label),
        objective: flow.map(|f| f.objective),
        p_grid: flow.map(|f| f.p_grid),
        p_curtailed: flow.map(FlowSolution::total_p_curtailed),
        q_curtailed: flow.map(FlowSolution::total_q_curtailed),
        cone_exactness: flow.map(|_| o.exactness),
        note: o.note.as_deref(),
        admm: o.admm.as_ref().map(|r| AdmmOut {
            qubo: o.qubo.to_string(),
            seed: o.seed,
            converged: r.converged,
            iterations: r.iterations,
            repaired: r.repaired,
            relaxation_objective: r.relaxation_objective,
        }),
        enumeration: o.report.as_ref().map(|r| EnumerationOut {
            assignments: r.rows.len(),
            optimal: r
                .rows
                .iter()
                .filter(|x| x.status == SocpStatus::Optimal)
                .count(),
            inexact: r.rows.iter().filter(|x| x.inexact).count(),
        }),
        buses: flow
            .map(|f| {
                f.buses
                    .iter()
                    .map(|b| BusOut {
                        id: b.id.0,
                        v_pu: b.v_mag(),
                        nu: b.nu,
                        p_demand: b.p_demand,
                        p_served: b.p_served,
                        p_curtailed: b.p_curtailed,
                        q_demand: b.q_demand,
                        q_served: b.q_served,
                        q_curtailed: b.q_curtailed,
                    })
                    .collect()
            })
            .unwrap_or_default(),
        lines: flow
            .map(|f| {
                f.lines
                    .iter()
                    .map(|l| LineOut {
                        id: l.id.0,
                        from: l.from.0,
                        to: l.to.0,
                        closed: l.closed,
                        i_pu: l.i_mag(),
                        i_sq: l.i_sq,
                        p_from: l.p_from,
                        q_from: l.q_from,
                        beta_from: l.beta_from,
                        beta_to: l.beta_to,
                    })
                    .collect()
            })
            .unwrap_or_default(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("result document serializes");
    s.push('\n');
    s
}

pub fn voltage_csv(f: &FlowSolution) -> String {
    let mut s = String::from("bus,v_pu\n");
    for b in &f.buses {
        writeln!(s, "{},{:.9}", b.id, b.v_mag()).unwrap();
    }
    s
}

pub fn current_csv(f: &FlowSolution) -> String {
    let mut s = String::from("line,from,to,closed,i_pu\n");
    for l in &f.lines {
        writeln!(
            s,
            "{},{},{},{},{:.9}",
            l.id,
            l.from,
            l.to,
            u8::from(l.closed),
            l.i_mag()
        )
        .unwrap();
    }
    s
}

pub fn load_csv(f: &FlowSolution) -> String {
    let mut s = String::from("bus,p_demand,p_served,p_curtailed,q_demand,q_served,q_curtailed\n");
    for b in &f.buses {
        writeln!(
            s,
            "{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            b.id, b.p_demand, b.p_served, b.p_curtailed, b.q_demand, b.q_served, b.q_curtailed
        )
        .unwrap();
    }
    s
}

/// Per-bus voltage magnitudes of two solutions and their difference; also
/// returns the largest difference.
pub fn diff_csv(a: &FlowSolution, b: &FlowSolution) -> (String, f64) {
    let mut s = String::from("bus,v_bf,v_bi,abs_diff\n");
    let mut worst = 0.0f64;
    for (x, y) in a.buses.iter().zip(&b.buses) {
        let d = (x.v_mag() - y.v_mag()).abs();
        worst = worst.max(d);
        writeln!(s, "{},{:.9},{:.9},{:.3e}", x.id, x.v_mag(), y.v_mag(), d).unwrap();
    }
    (s, worst)
}

/// Largest per-bus voltage magnitude difference.
pub fn max_voltage_diff(a: &FlowSolution, b: &FlowSolution) -> f64 {
    a.buses
        .iter()
        .zip(&b.buses)
        .map(|(x, y)| (x.v_mag() - y.v_mag()).abs())
        .fold(0.0, f64::max)
}
