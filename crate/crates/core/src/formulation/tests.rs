use super::*;
use crate::netmodel::fixtures;

#[test]
fn two_bus_branch_flow_has_the_expected_variables() {
    let net = fixtures::two_bus();
    let m = build_branch_flow(&net, &FaultScenario::no_fault(), DEFAULT_VOLL).unwrap();
    // ν ×2, ν^ℓ ×2, I^sq, P_12, Q_12, β ×2, served/curtailed P and Q at both buses, P^grid, Q^grid
    assert_eq!(m.program.n_vars, 19);
    assert_eq!(m.var_map.len(), 19);
    assert!(m.binary_vars.is_empty());
    assert_eq!(m.program.rotated_cones.len(), 1);
    assert!(m.program.soc_cones.is_empty());
}

#[test]
fn ieee33_has_five_binaries() {
    let net = fixtures::ieee33();
    for kind in [ModelKind::BranchFlow, ModelKind::BusInjection] {
        let m = build_model(&net, &FaultScenario::no_fault(), DEFAULT_VOLL, kind).unwrap();
        assert_eq!(m.binary_vars.len(), 5);
        for &b in &m.binary_vars {
            assert!(m
                .program
                .box_vars
                .iter()
                .any(|bb| bb.index == b && bb.lower == 0.0 && bb.upper == 1.0));
        }
    }
}

#[test]
fn fix_binaries_without_binaries_is_identity() {
    let net = fixtures::two_bus();
    let m = build_branch_flow(&net, &FaultScenario::no_fault(), DEFAULT_VOLL).unwrap();
    let fixed = m.fix_binaries(&SwitchAssignment::default()).unwrap();
    assert_eq!(fixed, m.program);
}

#[test]
fn fix_binaries_names_the_missing_switch() {
    let net = fixtures::ieee33();
    let m = build_branch_flow(&net, &FaultScenario::no_fault(), DEFAULT_VOLL).unwrap();
    let mut a = SwitchAssignment::normal(&net);
    a.0.remove(&LineId(36));
    let err = m.fix_binaries(&a).unwrap_err().to_string();
    assert!(err.contains("missing switch 36"), "{err}");
}

#[test]
fn fix_binaries_folds_alpha_into_rhs() {
    let net = fixtures::ieee33();
    let m = build_branch_flow(&net, &FaultScenario::no_fault(), DEFAULT_VOLL).unwrap();
    let p = m.fix_binaries(&SwitchAssignment::normal(&net)).unwrap();
    for &b in &m.binary_vars {
        assert!(p.equalities.iter().all(|t| t.col != b));
        assert!(p
            .box_vars
            .iter()
            .any(|bb| bb.index == b && bb.lower == 0.0 && bb.upper == 0.0));
    }
}

#[test]
fn invalid_voll_is_rejected() {
    let net = fixtures::two_bus();
    assert!(build_branch_flow(&net, &FaultScenario::no_fault(), 0.0).is_err());
    assert!(build_bus_injection(&net, &FaultScenario::no_fault(), f64::NAN).is_err());
}

#[test]
fn zero_vector_decodes_and_flags_voltage() {
    let net = fixtures::two_bus();
    let m = build_branch_flow(&net, &FaultScenario::no_fault(), DEFAULT_VOLL).unwrap();
    let x = vec![0.0; m.program.n_vars];
    let sol = extract_solution(&m, &x, &SwitchAssignment::default()).unwrap();
    assert!(sol.lines.iter().all(|l| l.p_from == 0.0 && l.i_sq == 0.0));
    let report = sol.validity_report(1e-9);
    assert!(
        report.iter().any(|r| r.contains("squared voltage")),
        "{report:?}"
    );
    assert_eq!(cone_exactness(&m, &sol), 0.0);
}

#[test]
fn wrong_length_vector_is_rejected() {
    let net = fixtures::two_bus();
    let m = build_branch_flow(&net, &FaultScenario::no_fault(), DEFAULT_VOLL).unwrap();
    assert!(extract_solution(&m, &[0.0; 3], &SwitchAssignment::default()).is_err());
}
