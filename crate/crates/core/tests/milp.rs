mod common;

use proptest::prelude::*;
use scuc_core::milp::{solve_lp, solve_milp, solve_milp_with_start, SolveControls, SolveStatus};
use scuc_core::model::{Constraint, ConstraintTag, Domain, ModelSpec, Sense, VarKey, VarKind};

use common::milp::*;

fn exact() -> SolveControls {
    SolveControls::with_gap(0.0)
}

fn agrees(got: &scuc_core::milp::SolveOutcome, want: Option<f64>) -> bool {
    match want {
        None => got.status == SolveStatus::Infeasible && got.incumbent.is_none(),
        Some(v) => got.status == SolveStatus::OptimalWithinGap && (got.objective - v).abs() <= 1e-6,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_brute_force(seed: u64) {
        let m = random_milp(seed);
        let out = solve_milp(&m.model, &exact(), |_| Ok(Vec::new())).unwrap();
        prop_assert!(agrees(&out, m.brute_force(false)), "seed {} got {:?} {} want {:?}", seed, out.status, out.objective, m.brute_force(false));
        prop_assert!(is_monotone(&out));
        if let Some(x) = &out.incumbent {
            prop_assert!(m.model.max_violation(x) <= 1e-6);
            prop_assert!((m.model.evaluate_objective(x) - out.objective).abs() <= 1e-6);
        }
    }

    #[test]
    fn lazy_rows_persist_once_injected(seed: u64) {
        let m = random_milp(seed);
        let (out, broken) = solve_with_lazy_hidden(&m, &exact());
        prop_assert!(!broken, "seed {}", seed);
        prop_assert!(agrees(&out, m.brute_force(true)), "seed {}", seed);
        prop_assert!(is_monotone(&out));
    }

    #[test]
    fn relaxation_bounds_the_optimum(seed: u64) {
        let m = random_milp(seed);
        let mut relaxed = m.model.clone();
        relaxed.relax_integrality();
        let lp = solve_lp(&relaxed, &exact()).unwrap();
        if let Some(opt) = m.brute_force(false) {
            prop_assert!(lp.objective <= opt + 1e-7);
        }
    }

    #[test]
    fn repeated_solves_are_identical(seed: u64) {
        let m = random_milp(seed);
        let a = solve_with_lazy_hidden(&m, &exact()).0;
        let b = solve_with_lazy_hidden(&m, &exact()).0;
        prop_assert_eq!(a.incumbent, b.incumbent);
        prop_assert_eq!(a.stats.nodes, b.stats.nodes);
        prop_assert_eq!(a.stats.incumbent_trace, b.stats.incumbent_trace);
    }

    #[test]
    fn gap_status_is_honest(seed: u64, gap in 0.0f64..0.2) {
        let m = random_milp(seed);
        let out = solve_milp(&m.model, &SolveControls::with_gap(gap), |_| Ok(Vec::new())).unwrap();
        if out.status == SolveStatus::OptimalWithinGap {
            prop_assert!(out.relative_gap() <= gap + 1e-9);
        }
        if out.status == SolveStatus::Infeasible {
            prop_assert!(out.incumbent.is_none());
        }
    }
}

fn bin(m: &mut ModelSpec, k: usize, cost: f64) -> usize {
    m.add_variable(VarKey::new(VarKind::Commit, k, 1), Domain::Binary, 0.0, 1.0, cost)
}

#[test]
fn feasible_start_becomes_the_first_incumbent() {
    let mut m = ModelSpec::new();
    let a = bin(&mut m, 0, -3.0);
    let b = bin(&mut m, 1, -2.0);
    m.add_constraint(Constraint::new(ConstraintTag::Other, vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0));
    let out = solve_milp_with_start(&m, &exact(), Some(&[0.0, 1.0]), |_| Ok(Vec::new())).unwrap();
    assert_eq!(out.stats.incumbent_trace.first(), Some(&-2.0));
    assert_eq!(out.objective, -3.0);
}

#[test]
fn callback_errors_propagate() {
    let mut m = ModelSpec::new();
    bin(&mut m, 0, 1.0);
    let err = solve_milp(&m, &exact(), |_| Err(scuc_core::milp::CallbackError("boom".into()))).unwrap_err();
    assert!(err.to_string().contains("boom"));
}

#[test]
fn invalid_controls_are_rejected() {
    let mut m = ModelSpec::new();
    bin(&mut m, 0, 1.0);
    let bad = SolveControls {
        time_limit: std::time::Duration::ZERO,
        ..SolveControls::default()
    };
    assert!(solve_milp(&m, &bad, |_| Ok(Vec::new())).is_err());
    assert!(solve_milp(&m, &SolveControls::with_gap(-1.0), |_| Ok(Vec::new())).is_err());
}

#[test]
fn infinite_bounds_are_rejected() {
    let mut m = ModelSpec::new();
    m.add_variable(VarKey::new(VarKind::Power, 0, 1), Domain::Continuous, 0.0, f64::INFINITY, -1.0);
    assert!(matches!(solve_lp(&m, &exact()), Err(scuc_core::milp::MilpError::InfiniteBound(0))));
}
