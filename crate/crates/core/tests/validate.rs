mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use scuc_core::instance::{Bus, Instance, InstanceDocument, Line, Meta};
use scuc_core::network::SensitivitySet;
use scuc_core::schedule::Schedule;
use scuc_core::validate::{check_schedule, Family, Tolerances, ValidateError};

use common::*;

const BASE: usize = 0;
const SLOW: usize = 1;
const REMOTE: usize = 2;
const PEAKER: usize = 3;
const T: usize = 4;

fn fixture() -> Instance {
    let mut base = unit("base", "A", 10.0, 300.0, 1000.0, 10.0, 0.0, 0.0);
    base.init_on = true;
    base.init_power = 100.0;
    let mut slow = unit("slow", "A", 0.0, 100.0, 10.0, 20.0, 0.0, 0.0);
    slow.init_on = true;
    let mut remote = unit("remote", "B", 0.0, 100.0, 1000.0, 30.0, 0.0, 0.0);
    remote.init_on = true;
    remote.init_power = 100.0;
    let mut peaker = unit("peaker", "B", 0.0, 50.0, 1000.0, 90.0, 0.0, 0.0);
    peaker.min_up = 3;
    peaker.min_down = 2;
    peaker.init_min_down_remaining = 2;
    let doc = InstanceDocument {
        meta: Meta {
            name: "families".into(),
            horizon: T,
        },
        buses: vec![Bus { id: "A".into() }, Bus { id: "B".into() }],
        lines: vec![Line {
            id: "AB".into(),
            from_bus: "A".into(),
            to_bus: "B".into(),
            susceptance: 10.0,
            limit_base: 80.0,
            limit_contingency: None,
        }],
        generators: vec![base, slow, remote, peaker],
        contingencies: vec![],
        demand: BTreeMap::from([("A".to_string(), vec![100.0; T]), ("B".to_string(), vec![100.0; T])]),
        curtail_penalty: 1000.0,
    };
    Instance::from_document(doc).unwrap()
}

fn feasible(inst: &Instance) -> Schedule {
    let mut s = Schedule::zeros(inst);
    s.x = vec![vec![1.0; T], vec![1.0; T], vec![1.0; T], vec![0.0; T]];
    s.p[BASE] = vec![100.0; T];
    s.p[REMOTE] = vec![100.0; T];
    s
}

/// Minimal edits of the feasible schedule, each meant to break one family.
fn edits() -> Vec<(Family, fn(&mut Schedule, usize))> {
    vec![
        (Family::Balance, |s, t| s.curtail[1][t] = 1.0),
        (Family::ProdLimits, |s, t| {
            s.p[REMOTE][t] = 120.0;
            s.p[BASE][t] = 80.0;
        }),
        (Family::Security, |s, t| {
            s.p[BASE][t] = 200.0;
            s.p[REMOTE][t] = 0.0;
        }),
        (Family::Logic, |s, t| s.z[BASE][t] = 1.0),
        (Family::Ramp, |s, t| {
            s.p[SLOW][t] = 50.0;
            s.p[BASE][t] = 50.0;
        }),
        (Family::Integrality, |s, t| {
            if t + 1 < T {
                s.x[SLOW][t] = 0.5;
                s.w[SLOW][t] = 0.5;
                s.z[SLOW][t + 1] = 0.5;
            } else {
                s.x[SLOW][t] = 0.5;
                s.w[SLOW][t] = 0.5;
            }
        }),
    ]
}

fn families(inst: &Instance, s: &Schedule) -> std::collections::BTreeSet<Family> {
    let sens = SensitivitySet::build_default(inst).unwrap();
    check_schedule(inst, &sens, s, &Tolerances::default()).unwrap().families()
}

#[test]
fn fixture_schedule_is_feasible() {
    let inst = fixture();
    assert!(families(&inst, &feasible(&inst)).is_empty());
}

proptest! {
    #[test]
    fn each_edit_reports_only_its_family(t in 0usize..T, k in 0usize..6) {
        let inst = fixture();
        let (family, edit) = edits()[k];
        let mut s = feasible(&inst);
        edit(&mut s, t);
        prop_assert_eq!(families(&inst, &s), [family].into());
    }
}

#[test]
fn short_run_breaks_minimum_up_time_only() {
    let inst = fixture();
    let mut s = feasible(&inst);
    s.x[PEAKER][2] = 1.0;
    s.z[PEAKER][2] = 1.0;
    s.w[PEAKER][3] = 1.0;
    assert_eq!(families(&inst, &s), [Family::MinUpdown].into());
}

#[test]
fn early_start_breaks_initial_status_only() {
    let inst = fixture();
    let mut s = feasible(&inst);
    s.x[PEAKER] = vec![1.0; T];
    s.z[PEAKER][0] = 1.0;
    let sens = SensitivitySet::build_default(&inst).unwrap();
    let report = check_schedule(&inst, &sens, &s, &Tolerances::default()).unwrap();
    assert_eq!(report.families(), [Family::InitialStatus].into());
    assert_eq!(report.violation_count, 2);
    assert!(report.violations.iter().all(|f| f.generator.as_deref() == Some("peaker")));
}

#[test]
fn report_serializes_with_snake_case_families() {
    let inst = fixture();
    let mut s = feasible(&inst);
    s.curtail[1][0] = 1.0;
    let sens = SensitivitySet::build_default(&inst).unwrap();
    let json = check_schedule(&inst, &sens, &s, &Tolerances::default()).unwrap().to_json_pretty();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["feasible"], false);
    assert_eq!(v["violations"][0]["family"], "balance");
    assert_eq!(v["security_rows_checked"], 2 * T as u64);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let inst = fixture();
    let mut s = feasible(&inst);
    s.p[0].pop();
    let sens = SensitivitySet::build_default(&inst).unwrap();
    assert!(matches!(check_schedule(&inst, &sens, &s, &Tolerances::default()), Err(ValidateError::Dimension(_))));
}
