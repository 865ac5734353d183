//! Problem data: buses, generators, lines, N-1 line contingencies and the
//! bus × period demand matrix, together with the JSON instance schema.
//!
//! An [`Instance`] is immutable once parsed. All cross references are
//! resolved to dense indices at load time so the solver never touches
//! string ids on hot paths.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing field `{field}` (line {line}, column {column})")]
    MissingField {
        field: String,
        line: usize,
        column: usize,
    },
    #[error("malformed document at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("dangling reference: {field} = `{value}` does not name a known {target}")]
    DanglingReference {
        field: String,
        value: String,
        target: &'static str,
    },
    #[error("invariant violated for {field}: {invariant}")]
    Invariant { field: String, invariant: String },
    #[error("contingency `{contingency}` outages bridge line `{line}`: removing it islands the network")]
    BridgeContingency { contingency: String, line: String },
    #[error("unknown bus `{0}`")]
    UnknownBus(String),
    #[error("cannot read instance file: {0}")]
    Io(#[from] std::io::Error),
}

impl InstanceError {
    fn invariant(field: impl Into<String>, invariant: impl Into<String>) -> Self {
        InstanceError::Invariant {
            field: field.into(),
            invariant: invariant.into(),
        }
    }

    fn from_json(err: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let (line, column) = (err.line(), err.column());
        match err.classify() {
            Category::Io => InstanceError::Io(std::io::Error::other(err.to_string())),
            Category::Syntax | Category::Eof => InstanceError::Syntax {
                line,
                column,
                message: strip_position(&err.to_string()),
            },
            Category::Data => {
                let message = strip_position(&err.to_string());
                match missing_field_name(&message) {
                    Some(field) => InstanceError::MissingField {
                        field,
                        line,
                        column,
                    },
                    None => InstanceError::Malformed {
                        line,
                        column,
                        message,
                    },
                }
            }
        }
    }
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(idx) => message[..idx].to_string(),
        None => message.to_string(),
    }
}

fn missing_field_name(message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    let end = rest.find('`')?;
    Some(rest[..end].to_string())
}

/// One linear piece of the convex production cost curve above `p_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSegment {
    /// MW
    pub width: f64,
    /// $/MWh
    pub marginal_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub p_min: f64,
    pub p_max: f64,
    pub startup_cap: f64,
    pub shutdown_cap: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub min_up: u32,
    pub min_down: u32,
    pub cost_startup: f64,
    pub cost_noload: f64,
    /// Production cost of one period at `p_min`, in $. The segments price
    /// output above `p_min`.
    #[serde(default)]
    pub cost_at_min: f64,
    pub cost_segments: Vec<CostSegment>,
    pub init_on: bool,
    #[serde(default)]
    pub init_min_up_remaining: u32,
    #[serde(default)]
    pub init_min_down_remaining: u32,
    pub init_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub susceptance: f64,
    pub limit_base: f64,
    /// Emergency rating used under every contingency unless a contingency
    /// overrides it. Defaults to `limit_base`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_contingency: Option<f64>,
}

impl Line {
    pub fn contingency_limit(&self) -> f64 {
        self.limit_contingency.unwrap_or(self.limit_base)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contingency {
    pub id: String,
    pub outaged_line: String,
    /// Per-line post-contingency limits (line id → MW).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub limit_overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    pub horizon: usize,
}

/// Wire form of an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub meta: Meta,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub contingencies: Vec<Contingency>,
    /// bus id → one MW value per period. Buses without an entry carry no load.
    pub demand: BTreeMap<String, Vec<f64>>,
    pub curtail_penalty: f64,
}

/// A validated instance with resolved indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub horizon: usize,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
    pub contingencies: Vec<Contingency>,
    /// `demand[b][t]`, MW, `t` zero-based.
    pub demand: Vec<Vec<f64>>,
    pub curtail_penalty: f64,
    bus_index: HashMap<String, usize>,
    gen_bus: Vec<usize>,
    line_ends: Vec<(usize, usize)>,
    contingency_line: Vec<usize>,
    /// `contingency_limits[c][l]`
    contingency_limits: Vec<Vec<f64>>,
    gens_at_bus: Vec<Vec<usize>>,
}

const NONNEG: &str = "must be finite and >= 0";

impl Instance {
    pub fn from_json_str(text: &str) -> Result<Self, InstanceError> {
        Self::from_json_bytes(text.as_bytes())
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, InstanceError> {
        let doc: InstanceDocument =
            serde_json::from_slice(bytes).map_err(InstanceError::from_json)?;
        Self::from_document(doc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let bytes = std::fs::read(path)?;
        Self::from_json_bytes(&bytes)
    }

    pub fn from_document(doc: InstanceDocument) -> Result<Self, InstanceError> {
        let InstanceDocument {
            meta,
            buses,
            lines,
            generators,
            contingencies,
            demand,
            curtail_penalty,
        } = doc;
        let horizon = meta.horizon;
        if horizon < 1 {
            return Err(InstanceError::invariant("meta.horizon", "T >= 1"));
        }
        if !(curtail_penalty.is_finite() && curtail_penalty >= 0.0) {
            return Err(InstanceError::invariant("curtail_penalty", NONNEG));
        }
        if buses.is_empty() {
            return Err(InstanceError::invariant("buses", "at least one bus"));
        }

        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if bus_index.insert(bus.id.clone(), i).is_some() {
                return Err(InstanceError::invariant(
                    format!("buses[{}].id", bus.id),
                    "bus ids are unique",
                ));
            }
        }
        let resolve_bus = |field: String, id: &str| {
            bus_index
                .get(id)
                .copied()
                .ok_or_else(|| InstanceError::DanglingReference {
                    field,
                    value: id.to_string(),
                    target: "bus",
                })
        };

        let mut seen = HashSet::new();
        let mut gen_bus = Vec::with_capacity(generators.len());
        for g in &generators {
            if !seen.insert(g.id.as_str()) {
                return Err(InstanceError::invariant(
                    format!("generators[{}].id", g.id),
                    "generator ids are unique",
                ));
            }
            gen_bus.push(resolve_bus(format!("generators[{}].bus", g.id), &g.bus)?);
            validate_generator(g)?;
        }

        seen.clear();
        let mut line_index = HashMap::with_capacity(lines.len());
        let mut line_ends = Vec::with_capacity(lines.len());
        for (i, l) in lines.iter().enumerate() {
            if !seen.insert(l.id.as_str()) {
                return Err(InstanceError::invariant(
                    format!("lines[{}].id", l.id),
                    "line ids are unique",
                ));
            }
            line_index.insert(l.id.clone(), i);
            let from = resolve_bus(format!("lines[{}].from_bus", l.id), &l.from_bus)?;
            let to = resolve_bus(format!("lines[{}].to_bus", l.id), &l.to_bus)?;
            if from == to {
                return Err(InstanceError::invariant(
                    format!("lines[{}].to_bus", l.id),
                    "from_bus != to_bus",
                ));
            }
            if !(l.susceptance.is_finite() && l.susceptance > 0.0) {
                return Err(InstanceError::invariant(
                    format!("lines[{}].susceptance", l.id),
                    "susceptance > 0",
                ));
            }
            if !(l.limit_base.is_finite() && l.limit_base > 0.0) {
                return Err(InstanceError::invariant(
                    format!("lines[{}].limit_base", l.id),
                    "limits > 0",
                ));
            }
            if let Some(lc) = l.limit_contingency {
                if !(lc.is_finite() && lc > 0.0) {
                    return Err(InstanceError::invariant(
                        format!("lines[{}].limit_contingency", l.id),
                        "limits > 0",
                    ));
                }
            }
            line_ends.push((from, to));
        }

        if !is_connected(buses.len(), &line_ends) {
            return Err(InstanceError::invariant(
                "lines",
                "network connected in base case",
            ));
        }
        let bridges = find_bridges(buses.len(), &line_ends);

        seen.clear();
        let mut contingency_line = Vec::with_capacity(contingencies.len());
        let mut contingency_limits = Vec::with_capacity(contingencies.len());
        for c in &contingencies {
            if !seen.insert(c.id.as_str()) {
                return Err(InstanceError::invariant(
                    format!("contingencies[{}].id", c.id),
                    "contingency ids are unique",
                ));
            }
            let k = *line_index.get(&c.outaged_line).ok_or_else(|| {
                InstanceError::DanglingReference {
                    field: format!("contingencies[{}].outaged_line", c.id),
                    value: c.outaged_line.clone(),
                    target: "line",
                }
            })?;
            if bridges[k] {
                return Err(InstanceError::BridgeContingency {
                    contingency: c.id.clone(),
                    line: c.outaged_line.clone(),
                });
            }
            let mut limits: Vec<f64> = lines.iter().map(Line::contingency_limit).collect();
            for (line_id, &limit) in &c.limit_overrides {
                let l = *line_index.get(line_id).ok_or_else(|| {
                    InstanceError::DanglingReference {
                        field: format!("contingencies[{}].limit_overrides", c.id),
                        value: line_id.clone(),
                        target: "line",
                    }
                })?;
                if !(limit.is_finite() && limit > 0.0) {
                    return Err(InstanceError::invariant(
                        format!("contingencies[{}].limit_overrides[{}]", c.id, line_id),
                        "limits > 0",
                    ));
                }
                limits[l] = limit;
            }
            contingency_line.push(k);
            contingency_limits.push(limits);
        }

        let mut demand_matrix = vec![vec![0.0; horizon]; buses.len()];
        for (bus_id, values) in &demand {
            let b = resolve_bus(format!("demand[{bus_id}]"), bus_id)?;
            if values.len() != horizon {
                return Err(InstanceError::invariant(
                    format!("demand[{bus_id}]"),
                    format!("one value per period (T = {horizon}), got {}", values.len()),
                ));
            }
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(InstanceError::invariant(
                    format!("demand[{bus_id}]"),
                    "demand >= 0 elementwise",
                ));
            }
            demand_matrix[b].clone_from(values);
        }

        let mut gens_at_bus = vec![Vec::new(); buses.len()];
        for (g, &b) in gen_bus.iter().enumerate() {
            gens_at_bus[b].push(g);
        }
        for list in &mut gens_at_bus {
            list.sort_by(|&a, &b| generators[a].id.cmp(&generators[b].id));
        }

        Ok(Instance {
            name: meta.name,
            horizon,
            buses,
            generators,
            lines,
            contingencies,
            demand: demand_matrix,
            curtail_penalty,
            bus_index,
            gen_bus,
            line_ends,
            contingency_line,
            contingency_limits,
            gens_at_bus,
        })
    }

    pub fn to_document(&self) -> InstanceDocument {
        let demand = self
            .buses
            .iter()
            .zip(&self.demand)
            .filter(|(_, d)| d.iter().any(|&v| v != 0.0))
            .map(|(bus, d)| (bus.id.clone(), d.clone()))
            .collect();
        InstanceDocument {
            meta: Meta {
                name: self.name.clone(),
                horizon: self.horizon,
            },
            buses: self.buses.clone(),
            lines: self.lines.clone(),
            generators: self.generators.clone(),
            contingencies: self.contingencies.clone(),
            demand,
            curtail_penalty: self.curtail_penalty,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("instance serializes")
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn num_contingencies(&self) -> usize {
        self.contingencies.len()
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_index.get(id).copied()
    }

    pub fn generator_bus(&self, g: usize) -> usize {
        self.gen_bus[g]
    }

    /// `(from, to)` bus indices of line `l`.
    pub fn line_ends(&self, l: usize) -> (usize, usize) {
        self.line_ends[l]
    }

    pub fn contingency_line(&self, c: usize) -> usize {
        self.contingency_line[c]
    }

    /// Post-contingency thermal limit of line `l` under contingency `c`.
    pub fn contingency_limit(&self, c: usize, l: usize) -> f64 {
        self.contingency_limits[c][l]
    }

    /// Generator indices at bus index `b`, ordered by generator id.
    pub fn generators_at(&self, b: usize) -> &[usize] {
        &self.gens_at_bus[b]
    }

    /// The set G_b for a bus id, as generator ids in id order.
    pub fn generators_at_bus(&self, bus: &str) -> Result<Vec<&str>, InstanceError> {
        let b = self
            .bus_index(bus)
            .ok_or_else(|| InstanceError::UnknownBus(bus.to_string()))?;
        Ok(self.gens_at_bus[b]
            .iter()
            .map(|&g| self.generators[g].id.as_str())
            .collect())
    }

    /// Demand at bus `b` in zero-based period `t`.
    pub fn demand_at(&self, b: usize, t: usize) -> f64 {
        self.demand[b][t]
    }

    /// System demand in zero-based period `t`.
    pub fn total_demand(&self, t: usize) -> f64 {
        self.demand.iter().map(|row| row[t]).sum()
    }
}

fn validate_generator(g: &Generator) -> Result<(), InstanceError> {
    let field = |name: &str| format!("generators[{}].{}", g.id, name);
    let nonneg = [
        ("p_min", g.p_min),
        ("p_max", g.p_max),
        ("startup_cap", g.startup_cap),
        ("shutdown_cap", g.shutdown_cap),
        ("ramp_up", g.ramp_up),
        ("ramp_down", g.ramp_down),
        ("cost_startup", g.cost_startup),
        ("cost_noload", g.cost_noload),
        ("cost_at_min", g.cost_at_min),
        ("init_power", g.init_power),
    ];
    for (name, v) in nonneg {
        if !(v.is_finite() && v >= 0.0) {
            return Err(InstanceError::invariant(field(name), NONNEG));
        }
    }
    if g.p_min > g.p_max {
        return Err(InstanceError::invariant(field("p_min"), "0 <= p_min <= p_max"));
    }
    let mut width = 0.0;
    let mut last_cost = f64::NEG_INFINITY;
    for (k, s) in g.cost_segments.iter().enumerate() {
        if !(s.width.is_finite() && s.width >= 0.0 && s.marginal_cost.is_finite()) {
            return Err(InstanceError::invariant(
                format!("generators[{}].cost_segments[{k}]", g.id),
                "segment width >= 0 and finite marginal cost",
            ));
        }
        if s.marginal_cost < last_cost {
            return Err(InstanceError::invariant(
                field("cost_segments"),
                "marginal costs non-decreasing across segments (convexity)",
            ));
        }
        last_cost = s.marginal_cost;
        width += s.width;
    }
    let span = g.p_max - g.p_min;
    if (width - span).abs() > 1e-6 * span.abs().max(1.0) {
        return Err(InstanceError::invariant(
            field("cost_segments"),
            format!("segment widths sum to p_max - p_min ({span}), got {width}"),
        ));
    }
    if g.min_up < 1 {
        return Err(InstanceError::invariant(field("min_up"), "min_up >= 1"));
    }
    if g.min_down < 1 {
        return Err(InstanceError::invariant(field("min_down"), "min_down >= 1"));
    }
    if g.init_on {
        if g.init_power < g.p_min || g.init_power > g.p_max {
            return Err(InstanceError::invariant(
                field("init_power"),
                "init_on = true => p_min <= init_power <= p_max",
            ));
        }
        if g.init_min_down_remaining > 0 {
            return Err(InstanceError::invariant(
                field("init_min_down_remaining"),
                "only the remaining time matching init_on may be positive",
            ));
        }
        if g.init_min_up_remaining > g.min_up {
            return Err(InstanceError::invariant(
                field("init_min_up_remaining"),
                "init_min_up_remaining <= min_up",
            ));
        }
    } else {
        if g.init_power != 0.0 {
            return Err(InstanceError::invariant(
                field("init_power"),
                "init_on = false => init_power = 0",
            ));
        }
        if g.init_min_up_remaining > 0 {
            return Err(InstanceError::invariant(
                field("init_min_up_remaining"),
                "only the remaining time matching init_on may be positive",
            ));
        }
        if g.init_min_down_remaining > g.min_down {
            return Err(InstanceError::invariant(
                field("init_min_down_remaining"),
                "init_min_down_remaining <= min_down",
            ));
        }
    }
    Ok(())
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let adj = adjacency(n, edges);
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); n];
    for (e, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    adj
}

/// Marks every edge whose removal disconnects the graph. Parallel edges are
/// handled by tracking the parent edge rather than the parent vertex.
pub(crate) fn find_bridges(n: usize, edges: &[(usize, usize)]) -> Vec<bool> {
    let adj = adjacency(n, edges);
    let mut is_bridge = vec![false; edges.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    // iterative DFS: (vertex, parent edge, next adjacency slot)
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack = vec![(root, usize::MAX, 0usize)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(top) = stack.len().checked_sub(1) {
            let (u, parent_edge, next) = stack[top];
            if next < adj[u].len() {
                let (v, e) = adj[u][next];
                stack[top].2 += 1;
                if e == parent_edge {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, e, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[parent_edge] = true;
                    }
                }
            }
        }
    }
    is_bridge
}
