mod common;

use std::collections::BTreeSet;

use common::threshold_rule;
use distreconf::exact::solve_enumeration;
use distreconf::formulation::{build_model, ModelKind, DEFAULT_VOLL};
use distreconf::mbadmm::*;
use distreconf::netmodel::{effective_status, fixtures, is_spanning_tree, FaultScenario};
use distreconf::qubo::{solve_exhaustive, QaoaParams, QuboMethod};
use distreconf::socp::SolverSettings;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn step_qubo_minimizer_is_the_threshold_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let m = rng.random_range(1..=5);
        let rho = rng.random_range(0.1..50.0);
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let lambda: Vec<f64> = (0..m).map(|_| rng.random_range(-rho..rho)).collect();
        let q = build_step_qubo(&y, &lambda, rho).unwrap();
        assert_eq!(
            solve_exhaustive(&q).unwrap().bits,
            threshold_rule(&y, &lambda, rho)
        );
    }
}

#[test]
fn step_qubo_small_cases() {
    let q = build_step_qubo(&[1.0, 0.0], &[0.0, 0.0], 2.0).unwrap();
    assert_eq!(solve_exhaustive(&q).unwrap().bits, vec![1, 0]);
    let tie = build_step_qubo(&[0.5], &[0.0], 10.0).unwrap();
    let s = solve_exhaustive(&tie).unwrap();
    assert_eq!(s.bits, vec![0]);
    assert_eq!(tie.energy(&[0]).unwrap(), tie.energy(&[1]).unwrap());
    // energies equal (ρ/2)‖u − y + λ/ρ‖²
    let q = build_step_qubo(&[0.3, 0.9], &[1.0, -2.0], 4.0).unwrap();
    let direct =
        |u: [f64; 2]| 2.0 * ((u[0] - 0.3 + 0.25f64).powi(2) + (u[1] - 0.9 - 0.5f64).powi(2));
    for (bits, u) in [
        ([0, 0], [0.0, 0.0]),
        ([1, 0], [1.0, 0.0]),
        ([1, 1], [1.0, 1.0]),
    ] {
        assert!((q.energy(&bits).unwrap() - direct(u)).abs() <= 1e-12);
    }
    assert!(build_step_qubo(&[0.1], &[], 1.0).is_err());
}

#[test]
fn no_binaries_is_one_continuous_solve() {
    let model = build_model(
        &fixtures::two_bus(),
        &FaultScenario::no_fault(),
        DEFAULT_VOLL,
        ModelKind::BranchFlow,
    )
    .unwrap();
    let r = solve_admm(&model, &AdmmParams::default(), &SolverSettings::default()).unwrap();
    assert!(r.assignment.0.is_empty());
    assert!(r.converged);
    assert_eq!(r.iterations, 1);
    assert!(r.flow.is_some());
}

#[test]
fn intact_feeder_matches_enumeration() {
    let net = fixtures::ieee33();
    let scenario = FaultScenario::no_fault();
    let model = build_model(&net, &scenario, DEFAULT_VOLL, ModelKind::BranchFlow).unwrap();
    let r = solve_admm(&model, &AdmmParams::default(), &SolverSettings::default()).unwrap();
    let exact = solve_enumeration(
        &net,
        &scenario,
        ModelKind::BranchFlow,
        DEFAULT_VOLL,
        &SolverSettings::default(),
    )
    .unwrap();
    let best = exact.best_row().unwrap();
    assert_eq!(r.assignment, best.assignment);
    assert_eq!(r.assignment.label(), "none");
    assert!(r.objective() >= best.objective - 1e-7);
}

fn radial(model: &distreconf::formulation::MicpModel, r: &AdmmResult) -> bool {
    let status = effective_status(&model.network, &model.scenario, &r.assignment).unwrap();
    let closed: BTreeSet<_> = status
        .into_iter()
        .filter(|(_, c)| *c)
        .map(|(id, _)| id)
        .collect();
    is_spanning_tree(&model.network, &closed)
}

#[test]
fn quantum_backend_on_a_fault_gives_a_radial_answer() {
    let scenario = &fixtures::ieee33_scenarios()[0];
    let model = build_model(
        &fixtures::ieee33(),
        scenario,
        DEFAULT_VOLL,
        ModelKind::BranchFlow,
    )
    .unwrap();
    let params = AdmmParams {
        qubo_backend: QuboMethod::Qaoa,
        seed: 5,
        qaoa: QaoaParams {
            restarts: 2,
            optimizer_budget: 100,
            ..QaoaParams::default()
        },
        ..AdmmParams::default()
    };
    let r = solve_admm(&model, &params, &SolverSettings::default()).unwrap();
    assert!(!r.trace.is_empty());
    assert_eq!(r.trace.len(), r.iterations);
    assert!(radial(&model, &r));
    assert!(r.objective() >= r.relaxation_objective - 1e-7);
    let csv = r.trace_csv();
    assert_eq!(csv.lines().count(), r.iterations + 1);
    assert!(csv.starts_with("iteration,primal_residual,dual_residual,objective"));
}

#[test]
fn annealing_backend_converges_below_tolerance() {
    let scenario = &fixtures::ieee33_scenarios()[2];
    let model = build_model(
        &fixtures::ieee33(),
        scenario,
        DEFAULT_VOLL,
        ModelKind::BusInjection,
    )
    .unwrap();
    let params = AdmmParams {
        qubo_backend: QuboMethod::Annealing,
        seed: 1,
        ..AdmmParams::default()
    };
    let r = solve_admm(&model, &params, &SolverSettings::default()).unwrap();
    assert!(r.converged);
    assert!(r.trace.last().unwrap().primal_residual <= params.eps_residual);
    assert!(radial(&model, &r));
}

#[test]
fn bad_rounding_is_repaired_to_a_radial_assignment() {
    // with the threshold near 1 every switch rounds open, which leaves the
    // downstream section of the fault disconnected
    let scenario = &fixtures::ieee33_scenarios()[0];
    let model = build_model(
        &fixtures::ieee33(),
        scenario,
        DEFAULT_VOLL,
        ModelKind::BranchFlow,
    )
    .unwrap();
    let params = AdmmParams {
        threshold: 0.999_999,
        max_outer_iters: 1,
        ..AdmmParams::default()
    };
    let r = solve_admm(&model, &params, &SolverSettings::default()).unwrap();
    assert!(radial(&model, &r));
    assert!(r.repaired);
    assert_eq!(r.assignment.closed().count(), 1);
}

#[test]
fn runs_are_deterministic() {
    let scenario = &fixtures::ieee33_scenarios()[1];
    let model = build_model(
        &fixtures::ieee33(),
        scenario,
        DEFAULT_VOLL,
        ModelKind::BranchFlow,
    )
    .unwrap();
    let params = AdmmParams {
        qubo_backend: QuboMethod::Annealing,
        seed: 9,
        ..AdmmParams::default()
    };
    let a = solve_admm(&model, &params, &SolverSettings::default()).unwrap();
    let b = solve_admm(&model, &params, &SolverSettings::default()).unwrap();
    assert_eq!(a.assignment, b.assignment);
    assert_eq!(a.trace_csv(), b.trace_csv());
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn rejects_bad_parameters() {
    let model = build_model(
        &fixtures::two_bus(),
        &FaultScenario::no_fault(),
        DEFAULT_VOLL,
        ModelKind::BranchFlow,
    )
    .unwrap();
    for params in [
        AdmmParams {
            rho: 0.0,
            ..AdmmParams::default()
        },
        AdmmParams {
            threshold: 1.0,
            ..AdmmParams::default()
        },
        AdmmParams {
            max_outer_iters: 0,
            ..AdmmParams::default()
        },
    ] {
        assert!(solve_admm(&model, &params, &SolverSettings::default()).is_err());
    }
}
