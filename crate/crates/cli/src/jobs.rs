use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use distreconf::exact::{solve_enumeration, EnumerationReport};
use distreconf::formulation::{build_model, cone_exactness, FlowSolution, ModelKind};
use distreconf::mbadmm::{solve_admm, AdmmParams, AdmmResult};
use distreconf::netmodel::{load_network, load_scenario, FaultScenario, Network, SwitchAssignment};
use distreconf::qubo::QuboMethod;
use distreconf::socp::{SocpStatus, SolverSettings};
use distreconf::Error;
use rayon::prelude::*;

use crate::output::{self, write_atomic};
use crate::{Common, CompareSolver, Failure, SolverArg};

/// One scenario solved with one model and one solver.
pub struct Outcome {
    pub scenario: FaultScenario,
    pub kind: ModelKind,
    pub solver: SolverArg,
    pub qubo: QuboMethod,
    pub seed: u64,
    pub status: SocpStatus,
    pub assignment: Option<SwitchAssignment>,
    pub flow: Option<FlowSolution>,
    pub exactness: f64,
    pub admm: Option<AdmmResult>,
    pub report: Option<EnumerationReport>,
    pub note: Option<String>,
    pub seconds: f64,
}

impl Outcome {
    pub fn solver_name(&self) -> &'static str {
        match self.solver {
            SolverArg::Exact => "exact",
            SolverArg::Admm => "admm",
        }
    }
}

struct Inputs {
    network: Network,
    scenarios: Vec<FaultScenario>,
    settings: SolverSettings<f64>,
    admm: AdmmParams,
}

fn read(path: &Path, what: &str) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure(format!("cannot read {what} '{}': {e}", path.display())))
}

fn load_inputs(c: &Common) -> Result<Inputs, Failure> {
    let network = load_network(&read(&c.network, "network")?)
        .map_err(|e| Failure(format!("network '{}': {e}", c.network.display())))?;
    let mut scenarios = Vec::new();
    for path in &c.scenario {
        let s = load_scenario(&read(path, "scenario")?)
            .map_err(|e| Failure(format!("scenario '{}': {e}", path.display())))?;
        s.validate(&network)
            .map_err(|e| Failure(format!("scenario '{}': {e}", path.display())))?;
        if scenarios
            .iter()
            .any(|o: &FaultScenario| output::dir_name(&o.name) == output::dir_name(&s.name))
        {
            return Err(Failure(format!("duplicate scenario name '{}'", s.name)));
        }
        scenarios.push(s);
    }
    if scenarios.is_empty() {
        scenarios.push(FaultScenario::no_fault());
    }
    if !(c.voll > 0.0 && c.voll.is_finite()) {
        return Err(Failure("--voll must be positive".into()));
    }
    if c.jobs == Some(0) {
        return Err(Failure("--jobs must be at least 1".into()));
    }
    let settings = c.settings();
    settings.validate()?;
    let admm = AdmmParams {
        rho: c.rho,
        max_outer_iters: c.admm_iters,
        threshold: c.threshold,
        qubo_backend: c.qubo(),
        seed: c.seed,
        ..AdmmParams::default()
    };
    admm.validate()?;
    Ok(Inputs {
        network,
        scenarios,
        settings,
        admm,
    })
}

fn pool(c: &Common) -> Result<rayon::ThreadPool, Failure> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(c.jobs.unwrap_or(0))
        .build()?)
}

fn run(
    inputs: &Inputs,
    c: &Common,
    scenario: &FaultScenario,
    kind: ModelKind,
    solver: SolverArg,
) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let mut o = Outcome {
        scenario: scenario.clone(),
        kind,
        solver,
        qubo: inputs.admm.qubo_backend,
        seed: inputs.admm.seed,
        status: SocpStatus::Infeasible,
        assignment: None,
        flow: None,
        exactness: f64::NAN,
        admm: None,
        report: None,
        note: None,
        seconds: 0.0,
    };
    match solver {
        SolverArg::Exact => {
            let report =
                solve_enumeration(&inputs.network, scenario, kind, c.voll, &inputs.settings)?;
            if report.no_radial_assignment {
                o.note = Some("no switch assignment gives a radial network".into());
            } else if let Some(best) = report.best_row() {
                o.status = SocpStatus::Optimal;
                o.assignment = Some(best.assignment.clone());
                o.flow = best.solution.clone();
                o.exactness = best.exactness;
            } else {
                o.status = report.rows[0].status;
                o.note = Some("no assignment solved to optimality".into());
            }
            o.report = Some(report);
        }
        SolverArg::Admm => {
            let model = build_model(&inputs.network, scenario, c.voll, kind)?;
            match solve_admm(&model, &inputs.admm, &inputs.settings) {
                Ok(r) => {
                    o.status = r.status;
                    o.assignment = Some(r.assignment.clone());
                    if let Some(f) = &r.flow {
                        o.exactness = cone_exactness(&model, f);
                    }
                    o.flow = r.flow.clone();
                    o.admm = Some(r);
                }
                Err(Error::Infeasible(why)) => o.note = Some(why),
                Err(e) => return Err(e.into()),
            }
        }
    }
    o.seconds = start.elapsed().as_secs_f64();
    Ok(o)
}

fn exit_code(outcomes: &[&Outcome]) -> u8 {
    if outcomes
        .iter()
        .any(|o| matches!(o.status, SocpStatus::Infeasible | SocpStatus::Unbounded))
    {
        2
    } else if outcomes
        .iter()
        .any(|o| o.status == SocpStatus::IterationLimit)
    {
        3
    } else {
        0
    }
}

fn fmt_num(v: Option<f64>, prec: usize) -> String {
    match v {
        Some(v) if v.is_finite() => {
            let s = format!("{v:.prec$}");
            // a tiny negative round-off prints as "-0.000…"
            match s.strip_prefix('-') {
                Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
                _ => s,
            }
        }
        _ => "-".into(),
    }
}

pub fn solve(c: &Common, solver: SolverArg, stdout: &mut dyn Write) -> Result<u8, Failure> {
    let inputs = load_inputs(c)?;
    let kinds = c.model.kinds();
    let tasks: Vec<(usize, ModelKind)> = (0..inputs.scenarios.len())
        .flat_map(|s| kinds.iter().map(move |&k| (s, k)))
        .collect();
    let outcomes: Vec<Outcome> = pool(c)?.install(|| {
        tasks
            .par_iter()
            .map(|&(s, k)| run(&inputs, c, &inputs.scenarios[s], k, solver))
            .collect::<Result<_, Failure>>()
    })?;

    let mut summary = String::from(
        "scenario,model,solver,status,assignment,objective,p_curtailed,cone_exactness\n",
    );
    for o in &outcomes {
        let dir = c.out.join(output::dir_name(&o.scenario.name));
        let m = o.kind.short();
        write_atomic(
            &dir.join(format!("{m}-result.json")),
            &output::result_document(o, c.voll),
        )?;
        if let Some(f) = &o.flow {
            write_atomic(
                &dir.join(format!("{m}-voltage.csv")),
                &output::voltage_csv(f),
            )?;
            write_atomic(
                &dir.join(format!("{m}-current.csv")),
                &output::current_csv(f),
            )?;
            write_atomic(&dir.join(format!("{m}-load.csv")), &output::load_csv(f))?;
        }
        if let Some(r) = &o.admm {
            write_atomic(&dir.join(format!("{m}-trace.csv")), &r.trace_csv())?;
        }
        if let Some(r) = &o.report {
            write_atomic(&dir.join(format!("{m}-enumeration.csv")), &r.to_csv())?;
        }
        let label = o
            .assignment
            .as_ref()
            .map_or("-".into(), SwitchAssignment::label);
        let objective = o.flow.as_ref().map(|f| f.objective);
        let curtailed = o.flow.as_ref().map(FlowSolution::total_p_curtailed);
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            o.scenario.name,
            m,
            o.solver_name(),
            o.status,
            label,
            fmt_num(objective, 9),
            fmt_num(curtailed, 9),
            o.flow
                .as_ref()
                .map_or("-".into(), |_| format!("{:.3e}", o.exactness))
        )
        .unwrap();
        writeln!(
            stdout,
            "{} [{}/{}] {}: switches closed {}, objective {}, curtailed {} pu",
            o.scenario.name,
            m,
            o.solver_name(),
            o.status,
            label,
            fmt_num(objective, 6),
            fmt_num(curtailed, 6)
        )?;
        if let Some(note) = &o.note {
            writeln!(stdout, "  note: {note}")?;
        }
        if c.timing {
            eprintln!(
                "{} [{}/{}] {:.3} s",
                o.scenario.name,
                m,
                o.solver_name(),
                o.seconds
            );
        }
    }
    write_atomic(&c.out.join("summary.csv"), &summary)?;

    if kinds.len() == 2 {
        for pair in outcomes.chunks(2) {
            if let (Some(a), Some(b)) = (&pair[0].flow, &pair[1].flow) {
                let (csv, worst) = output::diff_csv(a, b);
                write_atomic(
                    &c.out
                        .join(output::dir_name(&pair[0].scenario.name))
                        .join("diff.csv"),
                    &csv,
                )?;
                writeln!(
                    stdout,
                    "{}: max |V| difference bf vs bi {:.3e} pu",
                    pair[0].scenario.name, worst
                )?;
            }
        }
    }
    Ok(exit_code(&outcomes.iter().collect::<Vec<_>>()))
}

pub fn compare(
    c: &Common,
    solvers: &[CompareSolver],
    stdout: &mut dyn Write,
) -> Result<u8, Failure> {
    let mut solvers = solvers.to_vec();
    solvers.dedup();
    let mut unique = Vec::new();
    for s in solvers {
        if !unique.contains(&s) {
            unique.push(s);
        }
    }
    if unique.len() < 2 {
        return Err(Failure(
            "compare needs at least two distinct solvers among exact-bf, exact-bi, admm".into(),
        ));
    }
    let inputs = load_inputs(c)?;
    let admm_kind = match c.model {
        crate::ModelArg::Bi => ModelKind::BusInjection,
        _ => ModelKind::BranchFlow,
    };
    // the branch-flow enumeration is always run: it is the reference
    let mut per_scenario = vec![CompareSolver::ExactBf];
    per_scenario.extend(
        unique
            .iter()
            .copied()
            .filter(|s| *s != CompareSolver::ExactBf),
    );
    let tasks: Vec<(usize, CompareSolver)> = (0..inputs.scenarios.len())
        .flat_map(|s| per_scenario.iter().map(move |&k| (s, k)))
        .collect();
    let outcomes: Vec<Outcome> = pool(c)?.install(|| {
        tasks
            .par_iter()
            .map(|&(s, k)| {
                let (kind, solver) = match k {
                    CompareSolver::ExactBf => (ModelKind::BranchFlow, SolverArg::Exact),
                    CompareSolver::ExactBi => (ModelKind::BusInjection, SolverArg::Exact),
                    CompareSolver::Admm => (admm_kind, SolverArg::Admm),
                };
                run(&inputs, c, &inputs.scenarios[s], kind, solver)
            })
            .collect::<Result<_, Failure>>()
    })?;

    let mut csv =
        String::from("scenario,solver,status,assignment,objective,max_v_dev,hamming,flag");
    csv.push_str(if c.timing { ",runtime_s\n" } else { "\n" });
    writeln!(
        stdout,
        "{:<20} {:<9} {:<16} {:<10} {:>12} {:>10} {}",
        "scenario", "solver", "status", "assignment", "objective", "max dV", "flag"
    )?;
    let mut reported = Vec::new();
    for (s, group) in outcomes.chunks(per_scenario.len()).enumerate() {
        let reference = &group[0];
        for solver in &unique {
            let idx = per_scenario.iter().position(|k| k == solver).unwrap();
            let o = &group[idx];
            reported.push(o);
            let name = match solver {
                CompareSolver::ExactBf => "exact-bf",
                CompareSolver::ExactBi => "exact-bi",
                CompareSolver::Admm => "admm",
            };
            let dv = match (&o.flow, &reference.flow) {
                (Some(a), Some(b)) => Some(output::max_voltage_diff(a, b)),
                _ => None,
            };
            let (hamming, flag) = match (&o.assignment, &reference.assignment) {
                (Some(a), Some(b)) => {
                    let h = a.hamming(b);
                    (h.to_string(), if h == 0 { "MATCH" } else { "MISMATCH" })
                }
                _ => ("-".into(), "-"),
            };
            let label = o
                .assignment
                .as_ref()
                .map_or("-".into(), SwitchAssignment::label);
            let objective = o.flow.as_ref().map(|f| f.objective);
            write!(
                csv,
                "{},{},{},{},{},{},{},{}",
                inputs.scenarios[s].name,
                name,
                o.status,
                label,
                fmt_num(objective, 9),
                dv.map_or("-".into(), |d| format!("{d:.3e}")),
                hamming,
                flag
            )
            .unwrap();
            if c.timing {
                write!(csv, ",{:.3}", o.seconds).unwrap();
            }
            csv.push('\n');
            let flag_text = if flag == "MISMATCH" {
                format!("MISMATCH (hamming {hamming})")
            } else {
                flag.to_string()
            };
            writeln!(
                stdout,
                "{:<20} {:<9} {:<16} {:<10} {:>12} {:>10} {}",
                inputs.scenarios[s].name,
                name,
                o.status.to_string(),
                label,
                fmt_num(objective, 6),
                dv.map_or("-".into(), |d| format!("{d:.2e}")),
                flag_text
            )?;
        }
    }
    write_atomic(&c.out.join("compare.csv"), &csv)?;
    Ok(exit_code(&reported))
}
