use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use log::{debug, warn};

use super::simplex::{LpEngine, LpStatus};
use super::{check_model, check_row, load_rows, row_bounds, CallbackError, MilpError, SolveControls, SolveOutcome, SolveStats, SolveStatus};
use crate::model::{Constraint, ModelSpec};

const START_TOL: f64 = 1e-5;
const STALL_ROUNDS: usize = 3;
/// keep diving while the child's bound is within this fraction of the
/// incumbent-to-best-bound distance
const PLUNGE_FRACTION: f64 = 0.5;
const DIVE_EVERY: u64 = 200;
const RINS_EVERY: u64 = 100;
const RINS_NODES: u64 = 300;
const RINS_AGREE: f64 = 0.1;
/// skip the neighborhood when fewer binaries than this share are fixed
const RINS_MIN_FIXED: f64 = 0.3;
const DIVE_EVERY_NO_INCUMBENT: u64 = 20;

struct Node {
    bound: f64,
    seq: u64,
    depth: u32,
    changes: Vec<(usize, f64, f64)>,
    basis: Rc<Vec<u8>>,
    /// branching that created the node: variable, up branch, distance moved
    origin: Option<(usize, bool, f64)>,
}

/// Average objective change per unit of rounding, per variable and direction.
struct Pseudocosts {
    sum: Vec<[f64; 2]>,
    count: Vec<[u32; 2]>,
}

impl Pseudocosts {
    fn new(n: usize) -> Self {
        Pseudocosts {
            sum: vec![[0.0; 2]; n],
            count: vec![[0; 2]; n],
        }
    }

    fn record(&mut self, j: usize, up: bool, per_unit: f64) {
        let d = usize::from(up);
        self.sum[j][d] += per_unit.max(0.0);
        self.count[j][d] += 1;
    }

    fn mean(&self, binaries: &[usize], d: usize) -> f64 {
        let (mut total, mut n) = (0.0, 0u32);
        for &j in binaries {
            total += self.sum[j][d];
            n += self.count[j][d];
        }
        if n == 0 {
            1.0
        } else {
            total / n as f64
        }
    }

    fn estimate(&self, j: usize, d: usize, fallback: f64) -> f64 {
        if self.count[j][d] == 0 {
            fallback
        } else {
            self.sum[j][d] / self.count[j][d] as f64
        }
    }
}

struct Queued(Node);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // max-heap: smallest bound first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.bound.total_cmp(&self.0.bound).then(other.0.seq.cmp(&self.0.seq))
    }
}

type Callback<'c> = dyn FnMut(&[f64]) -> Result<Vec<Constraint>, CallbackError> + 'c;

struct Search<'a> {
    model: &'a ModelSpec,
    controls: &'a SolveControls,
    callback: &'a mut Callback<'a>,
    lp: LpEngine,
    root_lo: Vec<f64>,
    root_hi: Vec<f64>,
    modified: Vec<usize>,
    binaries: Vec<usize>,
    pseudo: Pseudocosts,
    incumbent: Option<Vec<f64>>,
    incumbent_obj: f64,
    stats: SolveStats,
    rows: usize,
    seq: u64,
    deadline: Instant,
    dive_iterations: u64,
    last_dive_node: u64,
    /// rows added by the callback, in order
    cuts: Vec<Constraint>,
    root_x: Option<Vec<f64>>,
    allow_rins: bool,
    /// incumbents already used as a neighborhood centre
    rins_done: usize,
    last_rins_node: u64,
}

enum NodeResult {
    Done,
    Pruned(f64),
    Unbounded,
    Branched(Node, Node),
    Interrupted(Node),
}

impl Search<'_> {
    fn cutoff(&self) -> f64 {
        if self.incumbent.is_none() {
            return f64::INFINITY;
        }
        self.incumbent_obj - self.controls.mip_gap * self.incumbent_obj.abs().max(1.0)
    }

    fn lp_iteration_cap(&self) -> u64 {
        50_000 + 50 * (self.lp.num_structurals() + self.lp.num_rows()) as u64
    }

    fn offer(&mut self, candidate: Vec<f64>) -> Result<Option<Vec<Constraint>>, MilpError> {
        self.stats.callback_calls += 1;
        let cuts = (self.callback)(&candidate).map_err(|e| MilpError::Callback(e.0))?;
        if !cuts.is_empty() {
            return Ok(Some(cuts));
        }
        let obj = self.model.evaluate_objective(&candidate);
        if obj < self.incumbent_obj {
            debug!("incumbent {obj:.6} after {} nodes", self.stats.nodes);
            self.incumbent_obj = obj;
            self.incumbent = Some(candidate);
            self.stats.incumbent_trace.push(obj);
            self.stats.incumbent_row_counts.push(self.rows);
        }
        Ok(None)
    }

    fn add_cuts(&mut self, cuts: &[Constraint]) -> Result<(), MilpError> {
        for c in cuts {
            check_row(c, self.model.num_variables())?;
            let (lo, hi) = row_bounds(c);
            self.lp.add_row(&c.terms, lo, hi);
            self.cuts.push(c.clone());
            self.rows += 1;
            self.stats.cuts_added += 1;
        }
        Ok(())
    }

    fn solve_relaxation(&mut self) -> Result<LpStatus, MilpError> {
        let cap = self.lp_iteration_cap();
        let status = self.lp.solve(cap, Some(self.deadline));
        if status != LpStatus::IterationLimit {
            return Ok(status);
        }
        warn!("simplex iteration cap reached; retrying from the slack basis");
        self.lp.slack_basis();
        match self.lp.solve(4 * cap, Some(self.deadline)) {
            LpStatus::IterationLimit => Err(MilpError::Numerical("simplex iteration cap reached twice".into())),
            s => Ok(s),
        }
    }

    fn rins_due(&self, finishing: bool) -> bool {
        self.allow_rins
            && self.incumbent.is_some()
            && self.root_x.is_some()
            && self.stats.incumbent_trace.len() > self.rins_done
            && (finishing || self.stats.nodes >= self.last_rins_node + RINS_EVERY)
    }

    /// Sub-MIP over the binaries on which the incumbent and the root
    /// relaxation disagree; all others are fixed to the incumbent.
    fn rins(&mut self) -> Result<(), MilpError> {
        self.rins_done = self.stats.incumbent_trace.len();
        self.last_rins_node = self.stats.nodes;
        let (Some(inc), Some(root)) = (self.incumbent.clone(), self.root_x.as_ref()) else {
            return Ok(());
        };
        let mut sub = self.model.clone();
        for c in &self.cuts {
            sub.add_constraint(c.clone());
        }
        let mut fixed = 0;
        for &j in &self.binaries {
            if (root[j] - inc[j]).abs() <= RINS_AGREE {
                sub.variables[j].lo = inc[j];
                sub.variables[j].hi = inc[j];
                fixed += 1;
            }
        }
        let n = self.binaries.len();
        if fixed == n || (fixed as f64) < RINS_MIN_FIXED * n as f64 {
            return Ok(());
        }
        let left = self.deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return Ok(());
        }
        let controls = SolveControls {
            mip_gap: self.controls.mip_gap * 0.1,
            time_limit: left,
            node_limit: Some(RINS_NODES),
            ..self.controls.clone()
        };
        let out = solve_inner(&sub, &controls, Some(&inc), &mut *self.callback, false)?;
        self.stats.simplex_iterations += out.stats.simplex_iterations;
        if let Some(x) = out.incumbent {
            if out.objective < self.incumbent_obj {
                debug!("rins improved {:.6} -> {:.6}", self.incumbent_obj, out.objective);
                if let Some(cuts) = self.offer(x)? {
                    self.add_cuts(&cuts)?;
                }
            }
        }
        self.rins_done = self.stats.incumbent_trace.len();
        Ok(())
    }

    fn should_dive(&self) -> bool {
        let nodes = self.stats.nodes;
        let every = if self.incumbent.is_none() { DIVE_EVERY_NO_INCUMBENT } else { DIVE_EVERY };
        let due = nodes == 1 || nodes >= self.last_dive_node + every;
        due && self.dive_iterations <= self.lp.iterations / 2
    }

    /// Fractional diving from the current LP point: round the least
    /// fractional binaries, re-solve, and backtrack once per failure.
    /// Leaves modified bounds registered in `modified`.
    fn dive(&mut self, mut x: Vec<f64>) -> Result<(), MilpError> {
        self.last_dive_node = self.stats.nodes;
        let start_iterations = self.lp.iterations;
        let tol = self.controls.integer_feasibility_tol;
        let cap = self.lp_iteration_cap();
        let result = (|| -> Result<(), MilpError> {
            for _ in 0..=self.binaries.len() {
                let mut frac: Vec<(f64, usize)> = self
                    .binaries
                    .iter()
                    .filter_map(|&j| {
                        let f = x[j] - x[j].floor();
                        let dist = f.min(1.0 - f);
                        (dist > tol).then_some((dist, j))
                    })
                    .collect();
                if frac.is_empty() {
                    let mut candidate = x.clone();
                    for &j in &self.binaries {
                        candidate[j] = candidate[j].round();
                    }
                    match self.offer(candidate)? {
                        None => return Ok(()),
                        Some(cuts) => {
                            self.add_cuts(&cuts)?;
                            if self.lp.solve(cap, Some(self.deadline)) != LpStatus::Optimal {
                                return Ok(());
                            }
                            x = self.lp.values().to_vec();
                            continue;
                        }
                    }
                }
                frac.sort_by(|a, b| a.0.total_cmp(&b.0));
                let batch = (frac.len() / 4).max(1);
                let mut tries: Vec<Vec<(usize, f64)>> = vec![frac[..batch].iter().map(|&(_, j)| (j, x[j].round())).collect()];
                let (_, j0) = frac[0];
                if batch > 1 {
                    tries.push(vec![(j0, x[j0].round())]);
                }
                tries.push(vec![(j0, 1.0 - x[j0].round())]);
                let mut moved = false;
                for fixes in tries {
                    let saved: Vec<(usize, f64, f64)> = fixes.iter().map(|&(j, _)| {
                        let (lo, hi) = self.lp.bounds(j);
                        (j, lo, hi)
                    }).collect();
                    for &(j, v) in &fixes {
                        self.lp.set_bounds(j, v, v);
                        self.modified.push(j);
                    }
                    let status = self.lp.solve(cap, Some(self.deadline));
                    if status == LpStatus::TimeLimit {
                        return Ok(());
                    }
                    if status == LpStatus::Optimal
                        && self.lp.objective() + self.model.objective_offset < self.cutoff()
                    {
                        x = self.lp.values().to_vec();
                        moved = true;
                        break;
                    }
                    for (j, lo, hi) in saved {
                        self.lp.set_bounds(j, lo, hi);
                    }
                }
                if !moved {
                    return Ok(());
                }
            }
            Ok(())
        })();
        self.dive_iterations += self.lp.iterations - start_iterations;
        result
    }

    fn process(&mut self, node: Node) -> Result<NodeResult, MilpError> {
        for j in self.modified.drain(..) {
            self.lp.set_bounds(j, self.root_lo[j], self.root_hi[j]);
        }
        for &(j, lo, hi) in &node.changes {
            self.lp.set_bounds(j, lo, hi);
            self.modified.push(j);
        }
        self.lp.load_basis(&node.basis);
        self.stats.nodes += 1;
        self.stats.max_depth = self.stats.max_depth.max(node.depth);

        let mut stalls = 0;
        let mut first_solve = true;
        loop {
            match self.solve_relaxation()? {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return Ok(NodeResult::Done),
                LpStatus::TimeLimit => return Ok(NodeResult::Interrupted(node)),
                LpStatus::Unbounded => return Ok(NodeResult::Unbounded),
                LpStatus::IterationLimit => unreachable!(),
            }
            let lp_obj = self.lp.objective() + self.model.objective_offset;
            if first_solve {
                first_solve = false;
                if let Some((j, up, dist)) = node.origin {
                    if node.bound.is_finite() && dist > 0.0 {
                        self.pseudo.record(j, up, (lp_obj - node.bound) / dist);
                    }
                }
            }
            if node.depth == 0 && self.root_x.is_none() {
                self.root_x = Some(self.lp.values().to_vec());
            }
            let bound = lp_obj.max(node.bound);
            if bound >= self.cutoff() {
                return Ok(NodeResult::Pruned(bound));
            }
            let x = self.lp.values();
            let tol = self.controls.integer_feasibility_tol;
            let mean_down = self.pseudo.mean(&self.binaries, 0);
            let mean_up = self.pseudo.mean(&self.binaries, 1);
            let mut branch: Option<(usize, f64)> = None;
            for &j in &self.binaries {
                let v = x[j];
                let f = v - v.floor();
                if f.min(1.0 - f) <= tol {
                    continue;
                }
                let down = (f * self.pseudo.estimate(j, 0, mean_down)).max(1e-6);
                let up = ((1.0 - f) * self.pseudo.estimate(j, 1, mean_up)).max(1e-6);
                let score = down * up;
                if branch.map_or(true, |(_, bs)| score > bs) {
                    branch = Some((j, score));
                }
            }
            let Some((j, _)) = branch else {
                let mut candidate = x.to_vec();
                for &j in &self.binaries {
                    candidate[j] = candidate[j].round();
                }
                let Some(cuts) = self.offer(candidate.clone())? else {
                    return Ok(NodeResult::Done);
                };
                let progress = cuts
                    .iter()
                    .any(|c| c.violation(&candidate) > 1e-9 * c.rhs.abs().max(1.0));
                if !progress {
                    stalls += 1;
                    if stalls > STALL_ROUNDS {
                        warn!("callback keeps returning satisfied rows; dropping node");
                        return Ok(NodeResult::Done);
                    }
                }
                self.add_cuts(&cuts)?;
                continue;
            };
            let basis = Rc::new(self.lp.basis());
            let x_node = x.to_vec();
            let (lo, hi) = self.lp.bounds(j);
            let mut down = node.changes.clone();
            down.push((j, lo, 0.0_f64.max(lo)));
            let mut up = node.changes;
            up.push((j, 1.0_f64.min(hi), hi));
            let f = x[j] - x[j].floor();
            let up_first = f >= 0.5;
            let mut make = |changes, is_up: bool| {
                self.seq += 1;
                Node {
                    bound,
                    seq: self.seq,
                    depth: node.depth + 1,
                    changes,
                    basis: Rc::clone(&basis),
                    origin: Some((j, is_up, if is_up { 1.0 - f } else { f })),
                }
            };
            let (first, second) = if up_first {
                (make(up, true), make(down, false))
            } else {
                (make(down, false), make(up, true))
            };
            if self.should_dive() {
                self.dive(x_node)?;
            }
            return Ok(NodeResult::Branched(first, second));
        }
    }
}

/// Branch-and-bound with an optional starting point. A start that satisfies
/// the model rows and is accepted by the callback becomes the first incumbent.
pub fn solve_milp_with_start<F>(
    model: &ModelSpec,
    controls: &SolveControls,
    start: Option<&[f64]>,
    mut callback: F,
) -> Result<SolveOutcome, MilpError>
where
    F: FnMut(&[f64]) -> Result<Vec<Constraint>, CallbackError>,
{
    solve_inner(model, controls, start, &mut callback, true)
}

fn solve_inner(
    model: &ModelSpec,
    controls: &SolveControls,
    start: Option<&[f64]>,
    callback: &mut Callback<'_>,
    allow_rins: bool,
) -> Result<SolveOutcome, MilpError> {
    controls.validate()?;
    check_model(model)?;
    let t0 = Instant::now();
    let deadline = t0 + controls.time_limit;

    let root_lo: Vec<f64> = model.variables.iter().map(|v| v.lo).collect();
    let root_hi: Vec<f64> = model.variables.iter().map(|v| v.hi).collect();
    let mut lp = LpEngine::new(model.objective.clone(), root_lo.clone(), root_hi.clone(), controls.lp_pivot_tol);
    load_rows(&mut lp, &model.constraints, &root_lo, &root_hi);
    let mut binaries: Vec<usize> = (0..model.num_variables()).filter(|&j| model.is_binary(j)).collect();
    binaries.sort_by_key(|&j| model.variables[j].key);

    let mut s = Search {
        model,
        controls,
        callback,
        lp,
        root_lo,
        root_hi,
        modified: Vec::new(),
        pseudo: Pseudocosts::new(model.num_variables()),
        binaries,
        incumbent: None,
        incumbent_obj: f64::INFINITY,
        stats: SolveStats::default(),
        rows: model.num_constraints(),
        seq: 0,
        deadline,
        dive_iterations: 0,
        last_dive_node: 0,
        cuts: Vec::new(),
        root_x: None,
        allow_rins: allow_rins && controls.rins_heuristic,
        rins_done: 0,
        last_rins_node: 0,
    };

    if let Some(start) = start {
        let integral = s
            .binaries
            .iter()
            .all(|&j| (start[j] - start[j].round()).abs() <= controls.integer_feasibility_tol);
        if start.len() == model.num_variables() && integral && model.max_violation(start) <= START_TOL {
            let mut candidate = start.to_vec();
            for &j in &s.binaries {
                candidate[j] = candidate[j].round();
            }
            if let Some(cuts) = s.offer(candidate)? {
                s.add_cuts(&cuts)?;
            }
        } else {
            debug!("start point rejected: not integral or violates model rows");
        }
    }

    let mut heap: BinaryHeap<Queued> = BinaryHeap::new();
    let mut dive = Some(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        depth: 0,
        changes: Vec::new(),
        basis: Rc::new(s.lp.basis()),
        origin: None,
    });
    let mut pruned_min = f64::INFINITY;
    let mut limited = false;
    let mut unbounded = false;

    loop {
        let node = match dive.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(Queued(n)) => n,
                None => break,
            },
        };
        if Instant::now() >= deadline || controls.node_limit.is_some_and(|lim| s.stats.nodes >= lim) {
            heap.push(Queued(node));
            limited = true;
            break;
        }
        if node.bound >= s.cutoff() {
            if s.incumbent.is_some() && node.bound < s.incumbent_obj {
                pruned_min = pruned_min.min(node.bound);
            }
            continue;
        }
        match s.process(node)? {
            NodeResult::Done => {}
            NodeResult::Pruned(bound) => {
                if bound < s.incumbent_obj {
                    pruned_min = pruned_min.min(bound);
                }
            }
            NodeResult::Unbounded => {
                unbounded = true;
                break;
            }
            NodeResult::Interrupted(n) => {
                heap.push(Queued(n));
                limited = true;
                break;
            }
            NodeResult::Branched(first, second) => {
                let best_open = heap.peek().map_or(first.bound, |q| q.0.bound.min(first.bound));
                let plunge = s.incumbent.is_none()
                    || first.bound <= best_open + PLUNGE_FRACTION * (s.incumbent_obj - best_open);
                if plunge {
                    dive = Some(first);
                } else {
                    heap.push(Queued(first));
                }
                heap.push(Queued(second));
            }
        }
        let open_min = heap
            .peek()
            .map_or(f64::INFINITY, |q| q.0.bound)
            .min(dive.as_ref().map_or(f64::INFINITY, |n| n.bound));
        // gap-pruned subtrees keep their bounds in the global bound
        let global = if s.incumbent.is_some() {
            open_min.min(pruned_min).min(s.incumbent_obj)
        } else {
            open_min
        };
        let last = s.stats.bound_trace.last().copied().unwrap_or(f64::NEG_INFINITY);
        debug_assert!(global >= last - 1e-6 * last.abs().max(1.0));
        s.stats.bound_trace.push(global.max(last));

        if s.incumbent.is_some() {
            let gap = (s.incumbent_obj - global) / s.incumbent_obj.abs().max(1.0);
            let finishing = gap <= controls.mip_gap;
            if s.rins_due(finishing) {
                s.rins()?;
            }
            let gap = (s.incumbent_obj - global) / s.incumbent_obj.abs().max(1.0);
            if gap <= controls.mip_gap {
                break;
            }
        }
    }

    let open_min = heap.iter().map(|q| q.0.bound).fold(f64::INFINITY, f64::min);
    let best_bound = if s.incumbent.is_some() {
        open_min.min(pruned_min).min(s.incumbent_obj)
    } else if limited {
        open_min
    } else {
        f64::INFINITY
    };
    s.stats.simplex_iterations = s.lp.iterations;
    s.stats.wall_seconds = t0.elapsed().as_secs_f64();
    let status = match (&s.incumbent, limited) {
        _ if unbounded => SolveStatus::Unbounded,
        (Some(_), false) => SolveStatus::OptimalWithinGap,
        (Some(_), true) => {
            let gap = (s.incumbent_obj - best_bound) / s.incumbent_obj.abs().max(1.0);
            if gap <= controls.mip_gap {
                SolveStatus::OptimalWithinGap
            } else {
                SolveStatus::FeasibleTimeLimit
            }
        }
        (None, true) => SolveStatus::FeasibleTimeLimit,
        (None, false) => SolveStatus::Infeasible,
    };
    Ok(SolveOutcome {
        status,
        objective: s.incumbent_obj,
        incumbent: s.incumbent,
        best_bound,
        stats: s.stats,
    })
}
