mod common;

use std::time::Duration;

use proptest::prelude::*;
use scuc_core::decomposition::{
    prefix_digest, propagate_state, run_relax_and_cut, solve_monolithic, DecompositionError, DecompositionParams,
    SubproblemKind, WindowPartition, WindowSolution,
};
use scuc_core::formulation::{BoundaryState, UnitState};
use scuc_core::network::SensitivitySet;
use scuc_core::refine::{rins_refine, RinsParams};
use scuc_core::separation::{SeparationConfig, SeparationMode};
use scuc_core::validate::{check_schedule, Tolerances};

use common::*;

fn td() -> DecompositionParams {
    DecompositionParams {
        s_r: 0,
        ..DecompositionParams::default()
    }
}

#[test]
fn tight_ramp_restarts_once_with_a_wider_window() {
    let inst = restart_instance();
    let sens = SensitivitySet::build_default(&inst).unwrap();
    let res = run_relax_and_cut(&inst, &sens, &DecompositionParams::default()).unwrap();
    assert_eq!(res.restarts, 1);
    assert_eq!(res.final_s_i, 8);
    assert!(res.log.iter().any(|l| l.contains("restart")), "{:?}", res.log);
    let report = check_schedule(&inst, &sens, &res.schedule, &Tolerances::default()).unwrap();
    assert!(report.feasible, "{:?}", report.violations);
    assert!(res.schedule.p[0][5] <= 100.0 + 1e-6);
}

#[test]
fn myopic_instance_delays_the_start_under_td() {
    let inst = myopic_instance();
    let sens = SensitivitySet::build_default(&inst).unwrap();
    let res = run_relax_and_cut(&inst, &sens, &td()).unwrap();
    let start = res.schedule.x[1].iter().position(|&v| v > 0.5).map(|t| t + 1);
    assert_eq!(start, Some(7));

    let mono = solve_monolithic(&inst, &sens, SeparationMode::Dynamic, 0.0, Duration::from_secs(60), &SeparationConfig::default()).unwrap();
    let best = mono.schedule.unwrap();
    assert_eq!(best.x[1].iter().position(|&v| v > 0.5), Some(4));
    // two extra high-load periods at 8000 net savings each
    assert!((res.schedule.objective.total - best.objective.total - 16_000.0).abs() < 1e-3);
}

#[test]
fn one_rins_pass_repairs_the_myopic_start() {
    let inst = myopic_instance();
    let sens = SensitivitySet::build_default(&inst).unwrap();
    let td = run_relax_and_cut(&inst, &sens, &td()).unwrap().schedule;
    let params = RinsParams {
        max_passes: Some(1),
        ..RinsParams::default()
    };
    let refined = rins_refine(&inst, &sens, &td, &params).unwrap();
    assert!(refined.schedule.objective.total < td.objective.total - 1.0);
    assert!(refined.trace[0].accepted);
    assert_eq!((refined.trace[0].window_start, refined.trace[0].window_end), (1, 12));
    for pair in refined.trace.windows(2) {
        assert!(pair[1].objective <= pair[0].objective);
    }
    assert!(check_schedule(&inst, &sens, &refined.schedule, &Tolerances::default()).unwrap().feasible);

    let again = rins_refine(&inst, &sens, &refined.schedule, &params).unwrap();
    assert_eq!(again.schedule.x, refined.schedule.x);
    assert!(again.trace.iter().all(|r| !r.accepted));
}

#[test]
fn full_integer_window_matches_the_monolithic_solve() {
    let inst = small(4, 8);
    let sens = SensitivitySet::build_default(&inst).unwrap();
    let params = DecompositionParams {
        s_i: 8,
        s_r: 0,
        dt: 8,
        subproblem_gap: 1e-4,
        completion_gap: 1e-4,
        ..DecompositionParams::default()
    };
    let res = run_relax_and_cut(&inst, &sens, &params).unwrap();
    assert_eq!(res.subproblems.len(), 1);
    let mono = solve_monolithic(&inst, &sens, SeparationMode::Dynamic, 1e-4, Duration::from_secs(60), &SeparationConfig::default()).unwrap();
    assert!(rel(res.schedule.objective.total, mono.schedule.unwrap().objective.total) <= 2e-4);
}

#[test]
fn paper_parameters_use_three_windows_and_a_completion() {
    let inst = small(2, 24);
    let sens = SensitivitySet::build_default(&inst).unwrap();
    let res = run_relax_and_cut(&inst, &sens, &DecompositionParams::default()).unwrap();
    assert_eq!(res.restarts, 0);
    assert_eq!(res.windows_in_final_attempt(), 3);
    let kinds: Vec<_> = res.subproblems.iter().map(|s| (s.kind, s.first, s.integer_last, s.last)).collect();
    assert_eq!(
        kinds,
        vec![
            (SubproblemKind::Window, 1, 6, 12),
            (SubproblemKind::Window, 7, 12, 18),
            (SubproblemKind::Window, 13, 18, 24),
            (SubproblemKind::Completion, 19, 24, 24),
        ]
    );
    for line in &res.log {
        if line.starts_with("attempt=") {
            assert!(line.split(' ').all(|kv| kv.contains('=')), "{line}");
        }
    }
    assert!(check_schedule(&inst, &sens, &res.schedule, &Tolerances::default()).unwrap().feasible);
}

#[test]
fn committed_prefix_never_changes() {
    let inst = small(6, 24);
    let sens = SensitivitySet::build_default(&inst).unwrap();
    let res = run_relax_and_cut(&inst, &sens, &DecompositionParams::default()).unwrap();
    let last = res.restarts + 1;
    for s in res.subproblems.iter().filter(|s| s.attempt == last && s.fixed_len > 0) {
        assert_eq!(s.prefix_digest, prefix_digest(&res.schedule, s.fixed_len), "fixed={}", s.fixed_len);
    }
}

#[test]
fn infeasible_at_full_window_reports_diagnostics() {
    let mut a = unit("A", "A", 100.0, 300.0, 50.0, 10.0, 0.0, 0.0);
    a.init_on = true;
    a.init_power = 300.0;
    a.shutdown_cap = 100.0;
    let inst = two_bus("stuck", vec![a], vec![300.0, 10.0, 10.0, 10.0]);
    let sens = SensitivitySet::build_default(&inst).unwrap();
    let params = DecompositionParams {
        s_i: 2,
        s_r: 0,
        dt: 2,
        ds: 2,
        ..DecompositionParams::default()
    };
    match run_relax_and_cut(&inst, &sens, &params) {
        Err(DecompositionError::Infeasible { attempts, log }) => {
            assert_eq!(attempts, 2);
            assert!(!log.is_empty());
        }
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

#[test]
fn bad_parameters_are_rejected() {
    let inst = small(1, 8);
    let sens = SensitivitySet::build_default(&inst).unwrap();
    for params in [
        DecompositionParams { dt: 7, ..DecompositionParams::default() },
        DecompositionParams { s_i: 9, dt: 2, ..DecompositionParams::default() },
        DecompositionParams { ds: 0, ..DecompositionParams::default() },
    ] {
        assert!(matches!(run_relax_and_cut(&inst, &sens, &params), Err(DecompositionError::Params(_))));
    }
}

#[test]
fn propagation_matches_reference_exhaustively() {
    let (checked, mismatches) = propagation_sweep();
    assert!(mismatches.is_empty(), "{mismatches:#?}");
    assert_eq!(checked, 4 * 4 * 2 * 7 * (2 + 4 + 8));
}

#[test]
fn fractional_commitment_is_rejected() {
    let inst = two_bus("p", vec![unit("g", "A", 0.0, 100.0, 100.0, 1.0, 0.0, 0.0)], vec![10.0; 2]);
    let prev = BoundaryState::initial(&inst);
    let window = WindowSolution {
        x: vec![vec![1.0, 0.5]],
        p: vec![vec![10.0, 5.0]],
    };
    assert!(matches!(
        propagate_state(&inst, &prev, &window, 2),
        Err(DecompositionError::FractionalCommitment { period: 2, .. })
    ));
}

proptest! {
    #[test]
    fn partitions_are_disjoint_and_ordered(s_i in 1usize..10, s_r in 0usize..10, dt_off in 0usize..10, horizon in 1usize..40) {
        let dt = 1 + dt_off % s_i;
        let mut part = WindowPartition::new(s_i, s_r, dt, horizon).advance();
        let mut steps = 0;
        while part.fits() {
            let f = part.fixed();
            let i = part.integer().unwrap();
            prop_assert!(i.0 <= i.1);
            if let Some(f) = f {
                prop_assert_eq!(f.0, 1);
                prop_assert_eq!(f.1 + 1, i.0);
            } else {
                prop_assert_eq!(i.0, 1);
            }
            if let Some(r) = part.relaxed() {
                prop_assert_eq!(i.1 + 1, r.0);
                prop_assert!(r.1 <= horizon);
            }
            prop_assert!(i.1 <= horizon);
            part = part.advance();
            steps += 1;
            prop_assert!(steps <= horizon);
        }
    }

    #[test]
    fn propagated_state_is_consistent(prev_on: bool, carried in 0u32..10, ut in 1u32..6, dtm in 1u32..6, bits in proptest::collection::vec(any::<bool>(), 1..6)) {
        let mut g = unit("g", "A", 0.0, 100.0, 100.0, 1.0, 0.0, 0.0);
        g.min_up = ut;
        g.min_down = dtm;
        let inst = two_bus("p", vec![g], vec![10.0; 2]);
        let prev = BoundaryState { units: vec![UnitState {
            on: prev_on,
            up_remaining: 0,
            down_remaining: 0,
            power: if prev_on { 1.0 } else { 0.0 },
            cum_up: if prev_on { carried } else { 0 },
            cum_down: if prev_on { 0 } else { carried },
        }]};
        let dt = bits.len();
        let window = WindowSolution {
            x: vec![bits.iter().map(|&b| b as u8 as f64).collect()],
            p: vec![bits.iter().map(|&b| if b { 7.0 } else { 0.0 }).collect()],
        };
        let next = propagate_state(&inst, &prev, &window, dt).unwrap();
        prop_assert!(next.validate(&inst).is_ok());
        let u = next.units[0];
        prop_assert_eq!(u.on, bits[dt - 1]);
        prop_assert_eq!(u.on, u.cum_up > 0);
        prop_assert!((u.cum_up > 0) != (u.cum_down > 0));
    }
}
