#![allow(dead_code)]

pub mod milp;

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use scuc_core::generate::{generate, GenerateParams};
use scuc_core::decomposition::{propagate_state, WindowSolution};
use scuc_core::formulation::{BoundaryState, UnitState};
use scuc_core::instance::{Bus, CostSegment, Generator, Instance, InstanceDocument, Line, Meta};

/// Acceptance corpus: 20 buses, 10 generators, 30 lines, 8 contingencies.
pub fn corpus(horizon: usize) -> Vec<(String, Instance)> {
    (1..=10)
        .map(|seed| {
            let p = GenerateParams {
                buses: 20,
                generators: 10,
                lines: 30,
                contingencies: 8,
                horizon,
                seed,
                ..GenerateParams::default()
            };
            (format!("seed{seed}"), generated(&p))
        })
        .collect()
}

pub fn generated(p: &GenerateParams) -> Instance {
    Instance::from_document(generate(p).unwrap().document).unwrap()
}

pub fn small(seed: u64, horizon: usize) -> Instance {
    generated(&GenerateParams {
        buses: 6,
        generators: 4,
        lines: 8,
        contingencies: 2,
        horizon,
        seed,
        ..GenerateParams::default()
    })
}

#[allow(clippy::too_many_arguments)]
pub fn unit(id: &str, bus: &str, p_min: f64, p_max: f64, ramp: f64, marginal: f64, startup: f64, noload: f64) -> Generator {
    Generator {
        id: id.into(),
        bus: bus.into(),
        p_min,
        p_max,
        startup_cap: ramp.max(p_min),
        shutdown_cap: ramp.max(p_min),
        ramp_up: ramp,
        ramp_down: ramp,
        min_up: 1,
        min_down: 1,
        cost_startup: startup,
        cost_noload: noload,
        cost_at_min: marginal * p_min,
        cost_segments: vec![CostSegment {
            width: p_max - p_min,
            marginal_cost: marginal,
        }],
        init_on: false,
        init_min_up_remaining: 0,
        init_min_down_remaining: 0,
        init_power: 0.0,
    }
}

pub fn two_bus(name: &str, generators: Vec<Generator>, demand_b: Vec<f64>) -> Instance {
    let doc = InstanceDocument {
        meta: Meta {
            name: name.into(),
            horizon: demand_b.len(),
        },
        buses: vec![Bus { id: "A".into() }, Bus { id: "B".into() }],
        lines: vec![Line {
            id: "AB".into(),
            from_bus: "A".into(),
            to_bus: "B".into(),
            susceptance: 10.0,
            limit_base: 10_000.0,
            limit_contingency: None,
        }],
        generators,
        contingencies: vec![],
        demand: BTreeMap::from([("B".to_string(), demand_b)]),
        curtail_penalty: 10_000.0,
    };
    Instance::from_document(doc).unwrap()
}

/// Cheap unit that cannot ramp below 125 MW in time for a demand drop
/// when the period after the integer window is relaxed.
pub fn restart_instance() -> Instance {
    let mut a = unit("A", "A", 100.0, 300.0, 50.0, 10.0, 0.0, 0.0);
    a.shutdown_cap = 100.0;
    a.startup_cap = 100.0;
    a.init_on = true;
    a.init_power = 300.0;
    let b = unit("B", "A", 0.0, 300.0, 300.0, 100.0, 0.0, 0.0);
    let demand = (1..=24).map(|t| if t <= 6 { 300.0 } else { 50.0 }).collect();
    two_bus("tight-ramp", vec![a, b], demand)
}

/// Demand steps up at period 5. Starting the cheap unit pays off over
/// the rest of the day but not within the first six periods.
pub fn myopic_instance() -> Instance {
    let mut e = unit("E", "A", 0.0, 500.0, 500.0, 100.0, 0.0, 0.0);
    e.init_on = true;
    e.init_power = 100.0;
    let c = unit("C", "A", 0.0, 200.0, 200.0, 10.0, 30_000.0, 10_000.0);
    let demand = (1..=24).map(|t| if t < 5 { 100.0 } else { 300.0 }).collect();
    two_bus("myopic", vec![e, c], demand)
}

/// DC flows by a direct angle solve on the network without `outaged`.
pub fn dc_flows(instance: &Instance, injections: &[f64], reference: usize, outaged: Option<usize>) -> Vec<f64> {
    let n = instance.num_buses();
    let mut b = DMatrix::<f64>::zeros(n, n);
    for l in 0..instance.num_lines() {
        if Some(l) == outaged {
            continue;
        }
        let (i, j) = instance.line_ends(l);
        let s = instance.lines[l].susceptance;
        b[(i, i)] += s;
        b[(j, j)] += s;
        b[(i, j)] -= s;
        b[(j, i)] -= s;
    }
    let keep: Vec<usize> = (0..n).filter(|&k| k != reference).collect();
    let reduced = DMatrix::from_fn(n - 1, n - 1, |r, c| b[(keep[r], keep[c])]);
    let rhs = DVector::from_iterator(n - 1, keep.iter().map(|&k| injections[k]));
    let sol = reduced.lu().solve(&rhs).expect("connected network");
    let mut theta = vec![0.0; n];
    for (r, &k) in keep.iter().enumerate() {
        theta[k] = sol[r];
    }
    (0..instance.num_lines())
        .map(|l| {
            if Some(l) == outaged {
                return 0.0;
            }
            let (i, j) = instance.line_ends(l);
            instance.lines[l].susceptance * (theta[i] - theta[j])
        })
        .collect()
}

/// Lines whose removal disconnects the graph, by repeated breadth-first search.
pub fn bridges_by_search(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let connected_without = |skip: usize| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for (e, &(a, b)) in edges.iter().enumerate() {
                if e == skip {
                    continue;
                }
                let v = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    (0..edges.len()).filter(|&e| !connected_without(e)).collect()
}

/// Connected network on `n` buses with the given edges and one unit.
pub fn network(n: usize, edges: &[(usize, usize)], susceptance: impl Fn(usize) -> f64) -> Instance {
    let bus = |i: usize| format!("b{i}");
    let doc = InstanceDocument {
        meta: Meta {
            name: "net".into(),
            horizon: 1,
        },
        buses: (0..n).map(|i| Bus { id: bus(i) }).collect(),
        lines: edges
            .iter()
            .enumerate()
            .map(|(e, &(a, b))| Line {
                id: format!("l{e}"),
                from_bus: bus(a),
                to_bus: bus(b),
                susceptance: susceptance(e),
                limit_base: 100.0,
                limit_contingency: None,
            })
            .collect(),
        generators: vec![unit("g", "b0", 0.0, 100.0, 100.0, 1.0, 0.0, 0.0)],
        contingencies: vec![],
        demand: BTreeMap::new(),
        curtail_penalty: 1000.0,
    };
    Instance::from_document(doc).unwrap()
}

/// Relative difference against the smaller value.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().min(b.abs()).max(1.0)
}

/// Run length after `bits`, counted period by period from the carried state.
/// Returns (on, cum_up, cum_down, up_remaining, down_remaining).
pub fn reference_state(min_up: u32, min_down: u32, prev_on: bool, carried: u32, bits: &[bool]) -> (bool, u32, u32, u32, u32) {
    let (mut on, mut run) = (prev_on, carried);
    for &b in bits {
        if b == on {
            run += 1;
        } else {
            on = b;
            run = 1;
        }
    }
    if on {
        (on, run, 0, min_up.saturating_sub(run), 0)
    } else {
        (on, 0, run, 0, min_down.saturating_sub(run))
    }
}

/// Every (UT, DT, prior status, carried run, dt, window bits) combination with
/// UT, DT in 1..=4, carried run in 0..=6 and dt in 1..=3. Returns the number of
/// cases and a description of each disagreement with [`reference_state`].
pub fn propagation_sweep() -> (usize, Vec<String>) {
    let mut a = unit("g", "A", 0.0, 100.0, 100.0, 1.0, 0.0, 0.0);
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for ut in 1..=4u32 {
        for dtm in 1..=4u32 {
            a.min_up = ut;
            a.min_down = dtm;
            let inst = two_bus("p", vec![a.clone()], vec![10.0; 4]);
            for prev_on in [false, true] {
                for carried in 0..=6u32 {
                    let prev = BoundaryState {
                        units: vec![UnitState {
                            on: prev_on,
                            up_remaining: if prev_on { ut.saturating_sub(carried) } else { 0 },
                            down_remaining: if prev_on { 0 } else { dtm.saturating_sub(carried) },
                            power: if prev_on { 50.0 } else { 0.0 },
                            cum_up: if prev_on { carried } else { 0 },
                            cum_down: if prev_on { 0 } else { carried },
                        }],
                    };
                    for dt in 1..=3usize {
                        for mask in 0..(1u32 << dt) {
                            let bits: Vec<bool> = (0..dt).map(|k| mask >> k & 1 == 1).collect();
                            let window = WindowSolution {
                                x: vec![bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()],
                                p: vec![bits.iter().map(|&b| if b { 42.0 } else { 0.0 }).collect()],
                            };
                            checked += 1;
                            let want = reference_state(ut, dtm, prev_on, carried, &bits);
                            let got = match propagate_state(&inst, &prev, &window, dt) {
                                Ok(s) => s.units[0],
                                Err(e) => {
                                    mismatches.push(format!("UT={ut} DT={dtm} on={prev_on} run={carried} bits={bits:?}: {e}"));
                                    continue;
                                }
                            };
                            let tuple = (got.on, got.cum_up, got.cum_down, got.up_remaining, got.down_remaining);
                            if tuple != want || got.power != if got.on { 42.0 } else { 0.0 } {
                                mismatches.push(format!(
                                    "UT={ut} DT={dtm} on={prev_on} run={carried} bits={bits:?}: got {tuple:?} power {}, want {want:?}",
                                    got.power
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    (checked, mismatches)
}
