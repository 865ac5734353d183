//! Seeded synthetic instances for desk-scale experiments.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{find_bridges, Bus, Contingency, CostSegment, Generator, Instance, InstanceDocument, InstanceError, Line, Meta};
use crate::network::{FlowCase, NetworkError, SensitivitySet};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid generator parameters: {0}")]
    Params(String),
    #[error("{lines} lines cannot connect {buses} buses")]
    CannotConnect { buses: usize, lines: usize },
    #[error("{requested} contingencies requested but only {available} lines are not bridges")]
    TooManyContingencies { requested: usize, available: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateParams {
    pub buses: usize,
    pub generators: usize,
    pub lines: usize,
    pub contingencies: usize,
    pub horizon: usize,
    pub seed: u64,
    /// peak demand as a fraction of installed capacity
    pub peak_load_factor: f64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        GenerateParams {
            buses: 10,
            generators: 6,
            lines: 14,
            contingencies: 4,
            horizon: 24,
            seed: 1,
            peak_load_factor: 0.75,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub document: InstanceDocument,
    pub notices: Vec<String>,
}

#[derive(Clone, Copy)]
enum Class {
    Base,
    Mid,
    Peaker,
}

fn class_of(g: usize, n: usize) -> Class {
    let f = (g as f64 + 0.5) / n as f64;
    if f < 0.3 {
        Class::Base
    } else if f < 0.7 {
        Class::Mid
    } else {
        Class::Peaker
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn make_generator(rng: &mut ChaCha8Rng, id: String, bus: String, class: Class) -> Generator {
    let (p_max, min_frac, ramp_frac, up, down, startup, noload, marginal) = match class {
        Class::Base => (
            rng.gen_range(150.0..250.0),
            rng.gen_range(0.4..0.5),
            rng.gen_range(0.2..0.3),
            rng.gen_range(6..=10),
            rng.gen_range(5..=8),
            rng.gen_range(2000.0..4000.0),
            rng.gen_range(150.0..300.0),
            rng.gen_range(10.0..18.0),
        ),
        Class::Mid => (
            rng.gen_range(80.0..150.0),
            rng.gen_range(0.3..0.4),
            rng.gen_range(0.4..0.6),
            rng.gen_range(3..=5),
            rng.gen_range(3..=4),
            rng.gen_range(500.0..1200.0),
            rng.gen_range(80.0..150.0),
            rng.gen_range(25.0..38.0),
        ),
        Class::Peaker => (
            rng.gen_range(30.0..80.0),
            rng.gen_range(0.2..0.3),
            rng.gen_range(0.8..1.0),
            1,
            1,
            rng.gen_range(50.0..200.0),
            rng.gen_range(20.0..60.0),
            rng.gen_range(60.0..90.0),
        ),
    };
    let p_max = round2(p_max);
    let p_min = round2(p_max * min_frac);
    let ramp = round2(p_max * ramp_frac);
    let span = p_max - p_min;
    let pieces = rng.gen_range(1..=3usize);
    let mut segments = Vec::with_capacity(pieces);
    let mut used = 0.0;
    let mut cost = round2(marginal);
    for k in 0..pieces {
        let width = if k + 1 == pieces {
            round2(span - used)
        } else {
            round2(span / pieces as f64)
        };
        used += width;
        segments.push(CostSegment {
            width,
            marginal_cost: cost,
        });
        cost = round2(cost * rng.gen_range(1.05..1.25));
    }
    let on = match class {
        Class::Base | Class::Mid => rng.gen_bool(0.5),
        Class::Peaker => false,
    };
    Generator {
        id,
        bus,
        p_min,
        p_max,
        startup_cap: p_min,
        shutdown_cap: p_min.max(ramp),
        ramp_up: ramp,
        ramp_down: ramp,
        min_up: up,
        min_down: down,
        cost_startup: round2(startup),
        cost_noload: round2(noload),
        cost_at_min: round2(p_min * marginal * 0.9),
        cost_segments: segments,
        init_on: on,
        init_min_up_remaining: 0,
        init_min_down_remaining: 0,
        init_power: if on { p_min } else { 0.0 },
    }
}

/// Demand shape with a morning and an evening peak, in (0, 1].
fn daily_shape(horizon: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..horizon)
        .map(|t| {
            let h = (t as f64 + 0.5) * 24.0 / horizon as f64;
            0.55 + 0.3 * (-(h - 9.0).powi(2) / 8.0).exp() + 0.42 * (-(h - 19.0).powi(2) / 6.0).exp()
        })
        .collect();
    let max = raw.iter().cloned().fold(f64::MIN, f64::max);
    raw.into_iter().map(|v| v / max).collect()
}

/// Builds a connected network, a base/mid/peaker fleet, a double-peak
/// demand profile and contingencies on non-bridge lines. Line limits are
/// scaled from the flows of a proportional peak dispatch so that some of
/// them bind.
pub fn generate(params: &GenerateParams) -> Result<Generated, GenerateError> {
    let GenerateParams {
        buses: n,
        generators: ng,
        lines: nl,
        contingencies: nc,
        horizon,
        seed,
        peak_load_factor,
    } = *params;
    if n == 0 || ng == 0 || horizon == 0 {
        return Err(GenerateError::Params("buses, generators and horizon must be positive".into()));
    }
    if !(peak_load_factor > 0.0 && peak_load_factor.is_finite()) {
        return Err(GenerateError::Params("peak load factor must be positive".into()));
    }
    if nl + 1 < n {
        return Err(GenerateError::CannotConnect { buses: n, lines: nl });
    }
    let max_lines = n * (n - 1) / 2;
    if nl > max_lines {
        return Err(GenerateError::Params(format!("{nl} lines exceed the {max_lines} distinct bus pairs")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut notices = Vec::new();

    let bus_ids: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(nl);
    let mut used = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        pairs.push((j, i));
        used.insert((j, i));
    }
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|p| !used.contains(p))
        .collect();
    candidates.shuffle(&mut rng);
    pairs.extend(candidates.into_iter().take(nl - pairs.len()));

    let bridges = find_bridges(n, &pairs);
    let mut eligible: Vec<usize> = (0..pairs.len()).filter(|&l| !bridges[l]).collect();
    if nc > eligible.len() {
        return Err(GenerateError::TooManyContingencies {
            requested: nc,
            available: eligible.len(),
        });
    }
    eligible.shuffle(&mut rng);
    let mut outaged: Vec<usize> = eligible.into_iter().take(nc).collect();
    outaged.sort_unstable();

    let mut lines: Vec<Line> = pairs
        .iter()
        .enumerate()
        .map(|(l, &(a, b))| Line {
            id: format!("l{}", l + 1),
            from_bus: bus_ids[a].clone(),
            to_bus: bus_ids[b].clone(),
            susceptance: round2(rng.gen_range(5.0..20.0)),
            limit_base: 1.0,
            limit_contingency: None,
        })
        .collect();

    let generators: Vec<Generator> = (0..ng)
        .map(|g| {
            let bus = bus_ids[rng.gen_range(0..n)].clone();
            make_generator(&mut rng, format!("g{}", g + 1), bus, class_of(g, ng))
        })
        .collect();
    let capacity: f64 = generators.iter().map(|g| g.p_max).sum();
    let peak = capacity * peak_load_factor;
    if peak > capacity {
        let msg = format!("peak demand {peak:.1} MW exceeds installed capacity {capacity:.1} MW; curtailment will be needed");
        warn!("{msg}");
        notices.push(msg);
    }

    let mut load_buses: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
    if load_buses.is_empty() {
        load_buses.push(rng.gen_range(0..n));
    }
    let shares: Vec<f64> = load_buses.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
    let share_sum: f64 = shares.iter().sum();
    let shape = daily_shape(horizon);
    let demand: BTreeMap<String, Vec<f64>> = load_buses
        .iter()
        .zip(&shares)
        .map(|(&b, s)| {
            let series = shape.iter().map(|f| round2(peak * f * s / share_sum)).collect();
            (bus_ids[b].clone(), series)
        })
        .collect();

    let contingencies: Vec<Contingency> = outaged
        .iter()
        .enumerate()
        .map(|(c, &l)| Contingency {
            id: format!("c{}", c + 1),
            outaged_line: lines[l].id.clone(),
            limit_overrides: BTreeMap::new(),
        })
        .collect();

    let mut doc = InstanceDocument {
        meta: Meta {
            name: format!("syn-b{n}-g{ng}-l{nl}-c{nc}-t{horizon}-s{seed}"),
            horizon,
        },
        buses: bus_ids.iter().map(|id| Bus { id: id.clone() }).collect(),
        lines: lines.clone(),
        generators,
        contingencies,
        demand,
        curtail_penalty: 2000.0,
    };

    let probe = Instance::from_document(doc.clone())?;
    let sens = SensitivitySet::build_with_index(&probe, 0)?;
    let peak_t = (0..horizon)
        .max_by(|&a, &b| probe.total_demand(a).total_cmp(&probe.total_demand(b)))
        .unwrap_or(0);
    let total = probe.total_demand(peak_t);
    let injections: Vec<f64> = (0..n)
        .map(|b| {
            let gen: f64 = probe.generators_at(b).iter().map(|&g| probe.generators[g].p_max).sum();
            gen / capacity * total - probe.demand_at(b, peak_t)
        })
        .collect();
    let cases: Vec<FlowCase> = std::iter::once(FlowCase::Base)
        .chain((0..nc).map(FlowCase::Contingency))
        .collect();
    let mut worst = vec![0.0f64; nl];
    for case in cases {
        let flows = sens.line_flows(&injections, case)?;
        for (w, f) in worst.iter_mut().zip(flows) {
            *w = w.max(f.abs());
        }
    }
    for (line, w) in lines.iter_mut().zip(worst) {
        line.limit_base = round2((w * rng.gen_range(0.95..1.45)).max(10.0));
        line.limit_contingency = Some(round2(line.limit_base * 1.2));
    }
    doc.lines = lines;
    Instance::from_document(doc.clone())?;
    Ok(Generated { document: doc, notices })
}
