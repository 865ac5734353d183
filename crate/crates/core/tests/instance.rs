mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use scuc_core::generate::GenerateParams;
use scuc_core::instance::{Contingency, Instance, InstanceDocument, InstanceError};

use common::*;

fn doc(seed: u64) -> InstanceDocument {
    generated(&GenerateParams {
        buses: 8,
        generators: 5,
        lines: 12,
        contingencies: 3,
        horizon: 6,
        seed,
        ..GenerateParams::default()
    })
    .to_document()
}

/// Breaks exactly one invariant of a valid document; returns the field
/// fragment and invariant fragment the error must name.
fn corrupt(d: &mut InstanceDocument, which: usize, k: usize) -> (String, &'static str) {
    let g = k % d.generators.len();
    let gid = d.generators[g].id.clone();
    let l = k % d.lines.len();
    let lid = d.lines[l].id.clone();
    match which {
        0 => {
            d.generators[g].p_min = d.generators[g].p_max + 1.0;
            (format!("generators[{gid}].p_min"), "p_min <= p_max")
        }
        1 => {
            d.generators[g].cost_segments[0].width += 5.0;
            (format!("generators[{gid}].cost_segments"), "segment widths sum")
        }
        2 => {
            d.generators[g].min_up = 0;
            (format!("generators[{gid}].min_up"), "min_up >= 1")
        }
        3 => {
            d.generators[g].min_down = 0;
            (format!("generators[{gid}].min_down"), "min_down >= 1")
        }
        4 => {
            let gen = &mut d.generators[g];
            gen.init_on = false;
            gen.init_min_up_remaining = 0;
            gen.init_min_down_remaining = 0;
            gen.init_power = 1.0;
            (format!("generators[{gid}].init_power"), "init_power = 0")
        }
        5 => {
            let gen = &mut d.generators[g];
            gen.init_on = true;
            gen.init_min_down_remaining = 0;
            gen.init_min_up_remaining = 0;
            gen.init_power = gen.p_max + 10.0;
            (format!("generators[{gid}].init_power"), "p_min <= init_power <= p_max")
        }
        6 => {
            let gen = &mut d.generators[g];
            gen.init_on = true;
            gen.init_power = gen.p_min;
            gen.init_min_up_remaining = 0;
            gen.init_min_down_remaining = 1;
            (format!("generators[{gid}].init_min_down_remaining"), "matching init_on")
        }
        7 => {
            d.lines[l].susceptance = -1.0;
            (format!("lines[{lid}].susceptance"), "susceptance > 0")
        }
        8 => {
            d.lines[l].limit_base = 0.0;
            (format!("lines[{lid}].limit_base"), "limits > 0")
        }
        9 => {
            d.lines[l].to_bus = d.lines[l].from_bus.clone();
            (format!("lines[{lid}].to_bus"), "from_bus != to_bus")
        }
        10 => {
            let bus = d.demand.keys().next().unwrap().clone();
            d.demand.get_mut(&bus).unwrap()[0] = -1.0;
            (format!("demand[{bus}]"), "demand >= 0")
        }
        11 => {
            d.meta.horizon = 0;
            ("meta.horizon".into(), "T >= 1")
        }
        12 => {
            let gen = &mut d.generators[g];
            gen.cost_segments.push(scuc_core::instance::CostSegment { width: 0.0, marginal_cost: -1e6 });
            (format!("generators[{gid}].cost_segments"), "convexity")
        }
        _ => {
            d.generators[g].ramp_up = f64::NAN;
            (format!("generators[{gid}].ramp_up"), ">= 0")
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip_is_identity(seed in 1u64..10_000) {
        let inst = Instance::from_document(doc(seed)).unwrap();
        let again = Instance::from_json_str(&inst.to_json_pretty()).unwrap();
        prop_assert_eq!(&inst, &again);
    }

    #[test]
    fn bus_lookups_partition_the_fleet(seed in 1u64..10_000) {
        let inst = Instance::from_document(doc(seed)).unwrap();
        let mut all = Vec::new();
        for b in &inst.buses {
            let here = inst.generators_at_bus(&b.id).unwrap();
            let mut sorted = here.clone();
            sorted.sort();
            prop_assert_eq!(&here, &sorted);
            all.extend(here.into_iter().map(str::to_string));
        }
        let unique: BTreeSet<_> = all.iter().cloned().collect();
        prop_assert_eq!(unique.len(), all.len());
        let fleet: BTreeSet<_> = inst.generators.iter().map(|g| g.id.clone()).collect();
        prop_assert_eq!(unique, fleet);
    }

    #[test]
    fn single_corruption_names_its_invariant(seed in 1u64..500, which in 0usize..14, k in 0usize..20) {
        let mut d = doc(seed);
        let (field, invariant) = corrupt(&mut d, which, k);
        match Instance::from_document(d) {
            Err(InstanceError::Invariant { field: f, invariant: i }) => {
                prop_assert_eq!(&f, &field);
                prop_assert!(i.contains(invariant), "{} lacks {}", i, invariant);
            }
            other => prop_assert!(false, "expected invariant error on {}, got {:?}", field, other.err()),
        }
    }
}

#[test]
fn bus_queries() {
    let mut d = doc(3);
    let bus = d.buses[0].id.clone();
    for (k, g) in d.generators.iter_mut().enumerate() {
        g.bus = if k < 3 { bus.clone() } else { d.buses[1].id.clone() };
    }
    let inst = Instance::from_document(d).unwrap();
    let ids: Vec<&str> = inst.generators.iter().take(3).map(|g| g.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(inst.generators_at_bus(&bus).unwrap(), sorted);
    let empty = inst.buses.iter().find(|b| inst.generators_at_bus(&b.id).unwrap().is_empty()).unwrap();
    assert!(inst.generators_at_bus(&empty.id).unwrap().is_empty());
    assert!(matches!(inst.generators_at_bus("nowhere"), Err(InstanceError::UnknownBus(_))));
}

#[test]
fn bridge_outage_is_a_load_error() {
    let inst = network(3, &[(0, 1), (1, 2), (2, 0), (2, 1)], |_| 1.0);
    let mut d = inst.to_document();
    d.buses.push(scuc_core::instance::Bus { id: "leaf".into() });
    d.lines.push(scuc_core::instance::Line {
        id: "spur".into(),
        from_bus: "b0".into(),
        to_bus: "leaf".into(),
        susceptance: 1.0,
        limit_base: 10.0,
        limit_contingency: None,
    });
    d.contingencies.push(Contingency {
        id: "c-spur".into(),
        outaged_line: "spur".into(),
        limit_overrides: Default::default(),
    });
    let err = Instance::from_document(d).unwrap_err();
    assert!(matches!(err, InstanceError::BridgeContingency { .. }));
    assert!(err.to_string().contains("c-spur"));
}

#[test]
fn dangling_references_name_field_and_value() {
    let mut d = doc(2);
    d.contingencies[0].outaged_line = "ghost".into();
    let err = Instance::from_document(d).unwrap_err();
    match err {
        InstanceError::DanglingReference { field, value, target } => {
            assert!(field.ends_with(".outaged_line"));
            assert_eq!(value, "ghost");
            assert_eq!(target, "line");
        }
        other => panic!("{other}"),
    }
}

#[test]
fn reads_from_disk_and_reports_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i.json");
    let inst = Instance::from_document(doc(9)).unwrap();
    std::fs::write(&path, inst.to_json_pretty()).unwrap();
    assert_eq!(Instance::from_path(&path).unwrap(), inst);
    assert!(matches!(Instance::from_path(dir.path().join("none.json")), Err(InstanceError::Io(_))));
}
