//! Acceptance run: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines are always printed; exits non-zero if any fails.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use common::{all_energies, analytic_cases, random_qubo, threshold_rule, Tiny};
use distreconf::exact::{solve_assignment, solve_enumeration, EnumerationReport};
use distreconf::formulation::{build_model, ModelKind, DEFAULT_VOLL};
use distreconf::mbadmm::{build_step_qubo, solve_admm, AdmmParams};
use distreconf::netmodel::{fixtures, FaultScenario, FeederDocument, SwitchAssignment};
use distreconf::qubo::{
    approximation_ratio, index_to_bits, qaoa_statevector, solve_exhaustive, solve_qaoa, solve_sa,
    AnnealSchedule, QaoaParams,
};
use distreconf::socp::{project_soc, solve, SocpStatus, SolverSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Tally {
    failed: Vec<u32>,
}

impl Tally {
    fn record(&mut self, id: u32, title: &str, pass: bool, detail: String) {
        println!(
            "{} criterion {id} ({title}): {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failed.push(id);
        }
    }
}

fn cases() -> Vec<FaultScenario> {
    let mut v = vec![FaultScenario::no_fault()];
    v.extend(fixtures::ieee33_scenarios());
    v
}

struct Enumerated {
    bf: Vec<EnumerationReport>,
    bi: Vec<EnumerationReport>,
    seconds: f64,
}

fn enumerate_all() -> Enumerated {
    let net = fixtures::ieee33();
    let settings = SolverSettings::default();
    let start = Instant::now();
    let run = |kind| {
        cases()
            .iter()
            .map(|sc| solve_enumeration(&net, sc, kind, DEFAULT_VOLL, &settings).unwrap())
            .collect()
    };
    let bf = run(ModelKind::BranchFlow);
    let bi = run(ModelKind::BusInjection);
    Enumerated {
        bf,
        bi,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn model_equivalence(t: &mut Tally, e: &Enumerated) {
    let mut worst_obj = 0.0f64;
    let mut worst_v = 0.0f64;
    let mut same = true;
    let mut all_solved = true;
    for (a, b) in e.bf.iter().zip(&e.bi) {
        let (Some(a), Some(b)) = (a.best_row(), b.best_row()) else {
            all_solved = false;
            continue;
        };
        same &= a.assignment == b.assignment;
        worst_obj = worst_obj.max((a.objective - b.objective).abs() / a.objective.abs().max(1e-12));
        let (fa, fb) = (a.solution.as_ref().unwrap(), b.solution.as_ref().unwrap());
        for (x, y) in fa.buses.iter().zip(&fb.buses) {
            worst_v = worst_v.max((x.v_mag() - y.v_mag()).abs());
        }
    }
    t.record(
        1,
        "branch-flow and bus-injection optima agree",
        all_solved && same && worst_obj <= 1e-4 && worst_v <= 1e-3 && e.seconds < 300.0,
        format!(
            "{} cases, same assignments: {same}, max rel objective diff {worst_obj:.2e}, \
             max |V| diff {worst_v:.2e} pu, enumeration time {:.1} s",
            e.bf.len(),
            e.seconds
        ),
    );
}

fn switching_agreement(t: &mut Tally, e: &Enumerated) {
    let net = fixtures::ieee33();
    let settings = SolverSettings::default();
    let mut notes = Vec::new();
    let mut intact_ok = false;
    let mut fault_hits = 0;
    for (k, (sc, report)) in cases().iter().zip(&e.bf).enumerate() {
        let model = build_model(&net, sc, DEFAULT_VOLL, ModelKind::BranchFlow).unwrap();
        let r = solve_admm(&model, &AdmmParams::default(), &settings).unwrap();
        let best = report.best_row().unwrap();
        let h = r.assignment.hamming(&best.assignment);
        if h == 0 {
            if k == 0 {
                intact_ok = true;
            } else {
                fault_hits += 1;
            }
            notes.push(format!("{} match", sc.name));
        } else {
            notes.push(format!("{} MISMATCH hamming {h}", sc.name));
        }
    }
    t.record(
        2,
        "ADMM with exhaustive QUBO returns the enumeration optimum",
        intact_ok && fault_hits >= 2,
        format!("{}; faults matched {fault_hits}/3", notes.join(", ")),
    );
}

fn relaxation_exactness(t: &mut Tally, e: &Enumerated) {
    let worst = e
        .bf
        .iter()
        .chain(&e.bi)
        .map(|r| r.best_row().map_or(f64::INFINITY, |b| b.exactness))
        .fold(0.0f64, f64::max);
    t.record(
        3,
        "cone exactness at every optimum",
        worst <= 1e-5,
        format!("max residual {worst:.2e} pu² over both models"),
    );
}

fn beta_integrality(t: &mut Tally, e: &Enumerated) {
    let mut worst = 0.0f64;
    let mut count = 0;
    for row in e.bf.iter().chain(&e.bi).filter_map(|r| r.best_row()) {
        for l in &row.solution.as_ref().unwrap().lines {
            for b in [l.beta_from, l.beta_to] {
                worst = worst.max(b.abs().min((b - 1.0).abs()));
                count += 1;
            }
        }
    }
    t.record(
        5,
        "β integral at every optimum",
        count > 0 && worst <= 1e-6,
        format!("{count} values, max distance to {{0,1}} {worst:.2e}"),
    );
}

fn status_forcing(t: &mut Tally) {
    let base = FeederDocument::from_network(&fixtures::ieee33());
    let switches = fixtures::ieee33().switch_ids();
    let scenarios = cases();
    let settings = SolverSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut points, mut attempts, mut open_lines) = (0, 0, 0);
    let (mut worst_flow, mut worst_isq) = (0.0f64, 0.0f64);
    while points < 100 && attempts < 5000 {
        attempts += 1;
        let mut doc = base.clone();
        for b in &mut doc.buses {
            let s = rng.random_range(0.5..1.5);
            b.pd_kw *= s;
            b.qd_kvar *= s;
        }
        let net = doc.into_network().unwrap();
        let sc = &scenarios[rng.random_range(0..scenarios.len())];
        let kind = if rng.random_bool(0.5) {
            ModelKind::BranchFlow
        } else {
            ModelKind::BusInjection
        };
        let voll = rng.random_range(10.0..2000.0);
        let closed: Vec<_> = switches
            .iter()
            .copied()
            .filter(|_| rng.random_bool(0.5))
            .collect();
        let assignment = SwitchAssignment::from_closed(&net, &closed);
        let model = build_model(&net, sc, voll, kind).unwrap();
        let fixed = solve_assignment(&model, &assignment, &settings).unwrap();
        let Some(sol) = fixed.solution else {
            continue;
        };
        points += 1;
        for l in sol.lines.iter().filter(|l| !l.closed) {
            open_lines += 1;
            for v in [l.p_from, l.q_from, l.p_to, l.q_to] {
                worst_flow = worst_flow.max(v.abs());
            }
            worst_isq = worst_isq.max(l.i_sq.abs());
        }
    }
    t.record(
        4,
        "open lines carry no flow",
        points == 100 && worst_flow <= 1e-7 && worst_isq <= 1e-7,
        format!(
            "{points} feasible points from {attempts} random statuses, {open_lines} open lines, \
             max |P|,|Q| {worst_flow:.2e} pu, max I^sq {worst_isq:.2e} pu²"
        ),
    );
}

fn socp_solver(t: &mut Tally) {
    let settings = SolverSettings::default();
    let mut analytic_worst = 0.0f64;
    let mut analytic_ok = 0;
    let analytic = analytic_cases();
    for (_, p, expected) in &analytic {
        let s = solve(p, &settings).unwrap();
        let err = (s.objective - expected).abs();
        analytic_worst = analytic_worst.max(err);
        if s.status == SocpStatus::Optimal && err <= 1e-6 {
            analytic_ok += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut random_ok = 0;
    let mut random_worst = 0.0f64;
    for _ in 0..20 {
        let tiny = Tiny::random(&mut rng);
        let s = solve(&tiny.program(), &settings).unwrap();
        let err = (s.objective - tiny.grid_oracle()).abs();
        random_worst = random_worst.max(err);
        if s.status == SocpStatus::Optimal && err <= 1e-4 {
            random_ok += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut idem, mut nearest) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let dim = rng.random_range(1..6);
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = project_soc(&v);
        let pp = project_soc(&p);
        idem = idem.max(p.iter().zip(&pp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let mut z: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        z[0] = z[1..].iter().map(|x| x * x).sum::<f64>().sqrt() + rng.random_range(0.0..1.0);
        let dist = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        // positive means the projection was farther than a point of the cone
        nearest = nearest.max(dist(&p) - dist(&z));
    }

    t.record(
        6,
        "SOCP solver",
        analytic_ok == analytic.len()
            && random_ok == 20
            && idem <= 1e-12
            && nearest <= 1e-9,
        format!(
            "analytic {analytic_ok}/{} (max err {analytic_worst:.1e}), random vs grid oracle \
             {random_ok}/20 (max err {random_worst:.1e}), projection idempotence {idem:.1e}, \
             Monte-Carlo excess {:.1e}",
            analytic.len(),
            nearest.max(0.0)
        ),
    );
}

fn qubo_backends(t: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sa_hits = 0;
    for k in 0..50 {
        let q = random_qubo(12, &mut rng);
        let exact = solve_exhaustive(&q).unwrap();
        let sa = solve_sa(&q, &AnnealSchedule::default(), 10, k).unwrap();
        if (sa.energy - exact.energy).abs() <= 1e-12 {
            sa_hits += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_norm = 0.0f64;
    for n in [1, 3, 6, 10] {
        let q = random_qubo(n, &mut rng);
        let gamma: Vec<f64> = (0..5).map(|_| rng.random_range(-4.0..4.0)).collect();
        let beta: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        for norm in qaoa_statevector(&q, &gamma, &beta).unwrap().layer_norms {
            worst_norm = worst_norm.max((norm - 1.0).abs());
        }
    }

    let mut wins = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let q = random_qubo(6, &mut rng);
        let params = QaoaParams {
            shots: 1024,
            seed,
            ..QaoaParams::with_depth(3)
        };
        let s = solve_qaoa(&q, &params).unwrap();
        let d = s.diagnostics.qaoa.as_ref().unwrap();
        for norm in &d.layer_norms {
            worst_norm = worst_norm.max((norm - 1.0).abs());
        }
        let energies = all_energies(&q);
        let uniform_mean = energies.iter().sum::<f64>() / energies.len() as f64;
        let uniform_best = (0..1024)
            .map(|_| energies[rng.random_range(0..64)])
            .fold(f64::INFINITY, f64::min);
        if s.energy <= uniform_best && d.expectation < uniform_mean {
            wins += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut ratio_ok = true;
    for _ in 0..20 {
        let q = random_qubo(7, &mut rng);
        let e = all_energies(&q);
        let arg = |better: fn(f64, f64) -> bool| {
            let mut k = 0;
            for i in 1..e.len() {
                if better(e[i], e[k]) {
                    k = i;
                }
            }
            index_to_bits(k as u64, 7)
        };
        ratio_ok &= approximation_ratio(&q, &arg(|a, b| a < b)).unwrap() == 1.0;
        ratio_ok &= approximation_ratio(&q, &arg(|a, b| a > b)).unwrap() == 0.0;
    }

    t.record(
        7,
        "QUBO backends",
        sa_hits >= 49 && worst_norm <= 1e-10 && wins >= 18 && ratio_ok,
        format!(
            "annealing matched exhaustive {sa_hits}/50, max |norm − 1| {worst_norm:.1e}, \
             QAOA beat uniform sampling {wins}/20 (best sample and ⟨C⟩), \
             ratio exactly 1/0 at the extremes: {ratio_ok}"
        ),
    );
}

fn step_qubo(t: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut equal = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..=5);
        let rho = rng.random_range(0.1..50.0);
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let lambda: Vec<f64> = (0..m).map(|_| rng.random_range(-rho..rho)).collect();
        let q = build_step_qubo(&y, &lambda, rho).unwrap();
        if solve_exhaustive(&q).unwrap().bits == threshold_rule(&y, &lambda, rho) {
            equal += 1;
        }
    }
    t.record(
        8,
        "ADMM step QUBO minimizer",
        equal == 1000,
        format!("{equal}/1000 triples equal the threshold rule"),
    );
}

fn data(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn determinism(t: &mut Tally) {
    let paths: Vec<Vec<&str>> = vec![
        vec!["solve", "--solver", "exact", "--model", "bf"],
        vec!["solve", "--solver", "exact", "--model", "bi"],
        vec!["solve", "--solver", "exact", "--model", "both"],
        vec!["solve", "--solver", "admm", "--qubo", "exhaustive", "--model", "both"],
        vec!["solve", "--solver", "admm", "--qubo", "sa", "--seed", "5"],
        vec!["solve", "--solver", "admm", "--qubo", "qaoa", "--seed", "5"],
        vec!["compare", "--qubo", "exhaustive"],
        vec!["compare", "--qubo", "sa", "--seed", "9", "--model", "bi"],
        vec!["compare", "--qubo", "qaoa", "--seed", "9"],
    ];
    let network = data("ieee33.json");
    let scenarios: Vec<String> = ["no-fault", "fault-line-7", "fault-lines-13-28", "fault-line-18"]
        .iter()
        .map(|n| data(&format!("scenarios/{n}.json")))
        .collect();
    let mut identical = 0;
    let mut notes = Vec::new();
    for path in &paths {
        let runs: Vec<_> = ["1", "4"]
            .iter()
            .map(|jobs| {
                let out = tempfile::tempdir().unwrap();
                let mut args: Vec<String> = std::iter::once("distreconf")
                    .chain(path.iter().copied())
                    .map(String::from)
                    .collect();
                args.extend(["--network".into(), network.clone(), "--scenario".into()]);
                args.extend(scenarios.iter().cloned());
                args.extend([
                    "--out".into(),
                    out.path().to_string_lossy().into_owned(),
                    "--jobs".into(),
                    jobs.to_string(),
                ]);
                let mut stdout = Vec::new();
                let code = distreconf_cli::run(args, &mut stdout);
                (code, stdout, snapshot(out.path()))
            })
            .collect();
        let ok = runs[0].0 == 0 && !runs[0].2.is_empty() && runs[0] == runs[1];
        if ok {
            identical += 1;
        } else {
            notes.push(format!("differs: {}", path.join(" ")));
        }
    }
    t.record(
        9,
        "byte-identical CLI outputs",
        identical == paths.len(),
        if notes.is_empty() {
            format!("{identical}/{} solver paths over all four cases", paths.len())
        } else {
            notes.join("; ")
        },
    );
}

fn main() {
    // the CLI reads solver overrides from the environment
    for var in [
        "DISTRECONF_EPS_PRIMAL",
        "DISTRECONF_EPS_DUAL",
        "DISTRECONF_MAX_ITERS",
        "DISTRECONF_ALGORITHM",
    ] {
        std::env::remove_var(var);
    }
    let mut t = Tally { failed: Vec::new() };
    let e = enumerate_all();
    model_equivalence(&mut t, &e);
    switching_agreement(&mut t, &e);
    relaxation_exactness(&mut t, &e);
    status_forcing(&mut t);
    beta_integrality(&mut t, &e);
    socp_solver(&mut t);
    qubo_backends(&mut t);
    step_qubo(&mut t);
    determinism(&mut t);
    if t.failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failed criteria {:?}", t.failed);
        std::process::exit(1);
    }
}
