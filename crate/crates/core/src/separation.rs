//! Security-constraint separation: screening integer solutions for
//! overloaded lines under the base case and every line outage, choosing the
//! most violated rows, and the two drivers that feed them to the optimizer
//! (lazy rows inside one search, or repeated solves from scratch).

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{debug, warn};
use rayon::prelude::*;
use rayon::ThreadPool;
use thiserror::Error;

use crate::formulation::{build_model, security_constraint, security_limit, BoundaryState, FormulationError, SecurityMode};
use crate::instance::Instance;
use crate::milp::{solve_milp_with_start, CallbackError, MilpError, SolveControls, SolveOutcome};
use crate::model::{Constraint, ModelSpec, VarKey, VarKind};
use crate::network::{format_sig, FlowCase, SensitivitySet, BALANCE_TOL};
use crate::schedule::Schedule;

/// Relative overload below which a flow counts as within its limit.
pub const VIOLATION_TOL: f64 = 1e-5;
pub const DEFAULT_CUT_CAP: usize = 15;
pub const DEFAULT_FILTER_ROUNDS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CutDirection {
    Upper,
    Lower,
}

/// One line-limit row: field order gives the (t, c, l, dir) ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SecurityCutId {
    pub period: usize,
    pub case: FlowCase,
    pub line: usize,
    pub direction: CutDirection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub id: SecurityCutId,
    pub flow: f64,
    pub limit: f64,
    pub normalized_excess: f64,
}

#[derive(Debug, Error)]
pub enum SeparationError {
    #[error("injections at period {period} do not balance (residual {residual:.3e} MW)")]
    Unbalanced { period: usize, residual: f64 },
    #[error("filtering did not converge within {rounds} rounds (last objective {objective})")]
    RoundCap { rounds: usize, objective: f64 },
    #[error("cannot build worker pool: {0}")]
    Workers(String),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeparationMode {
    /// every security row in the model from the start
    Enumerate,
    /// lazy rows injected from the integer-solution callback
    Dynamic,
    /// repeated solves, adding violated rows between them
    Filtering,
}

impl SeparationMode {
    pub fn name(self) -> &'static str {
        match self {
            SeparationMode::Enumerate => "enumerate",
            SeparationMode::Dynamic => "dynamic",
            SeparationMode::Filtering => "filtering",
        }
    }
}

impl std::str::FromStr for SeparationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "enumerate" => Ok(SeparationMode::Enumerate),
            "dynamic" => Ok(SeparationMode::Dynamic),
            "filtering" => Ok(SeparationMode::Filtering),
            other => Err(format!("unknown separation mode `{other}`")),
        }
    }
}

/// Screening workers. One thread screens inline.
#[derive(Clone)]
pub struct Workers {
    threads: usize,
    pool: Option<Arc<ThreadPool>>,
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Workers({})", self.threads)
    }
}

impl Workers {
    pub fn serial() -> Self {
        Workers { threads: 1, pool: None }
    }

    pub fn new(threads: usize) -> Result<Self, SeparationError> {
        let threads = threads.max(1);
        if threads == 1 {
            return Ok(Self::serial());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("screen-{i}"))
            .build()
            .map_err(|e| SeparationError::Workers(e.to_string()))?;
        Ok(Workers {
            threads,
            pool: Some(Arc::new(pool)),
        })
    }

    pub fn available() -> Result<Self, SeparationError> {
        Self::new(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

/// Dispatch and curtailment over a block of periods starting at `first_period`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub first_period: usize,
    /// `[generator][k]` for period `first_period + k`
    pub p: Vec<Vec<f64>>,
    /// `[bus][k]`
    pub curtail: Vec<Vec<f64>>,
}

impl Dispatch {
    pub fn from_model(instance: &Instance, model: &ModelSpec, x: &[f64]) -> Self {
        let periods = model.first_period..=model.last_period;
        let get = |kind, owner, t| model.var(&VarKey::new(kind, owner, t)).map_or(0.0, |j| x[j]);
        Dispatch {
            first_period: model.first_period,
            p: (0..instance.num_generators())
                .map(|g| periods.clone().map(|t| get(VarKind::Power, g, t)).collect())
                .collect(),
            curtail: (0..instance.num_buses())
                .map(|b| periods.clone().map(|t| get(VarKind::Curtail, b, t)).collect())
                .collect(),
        }
    }

    pub fn from_schedule(schedule: &Schedule) -> Self {
        Dispatch {
            first_period: 1,
            p: schedule.p.clone(),
            curtail: schedule.curtail.clone(),
        }
    }

    pub fn num_periods(&self) -> usize {
        self.p.first().or(self.curtail.first()).map_or(0, Vec::len)
    }

    /// Net injection `Σ_{g∈G_b} p − D_b + curtail_b` at every bus for global period `t`.
    pub fn injections(&self, instance: &Instance, t: usize) -> Vec<f64> {
        let k = t - self.first_period;
        (0..instance.num_buses())
            .map(|b| {
                let gen: f64 = instance.generators_at(b).iter().map(|&g| self.p[g][k]).sum();
                gen - instance.demand_at(b, t - 1) + self.curtail[b][k]
            })
            .collect()
    }
}

/// Result of one screening pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Screening {
    pub violations: Vec<Violation>,
    /// flow evaluations performed: lines × cases × periods
    pub evaluations: u64,
}

fn all_cases(instance: &Instance) -> Vec<FlowCase> {
    std::iter::once(FlowCase::Base)
        .chain((0..instance.num_contingencies()).map(FlowCase::Contingency))
        .collect()
}

fn screen_block(
    instance: &Instance,
    sens: &SensitivitySet,
    case: FlowCase,
    period: usize,
    inj: &[f64],
    counter: &AtomicU64,
) -> Vec<Violation> {
    let mut found = Vec::new();
    for line in 0..instance.num_lines() {
        let flow = sens.row(line, case).map_or(0.0, |row| crate::network::dot(row, inj));
        let limit = security_limit(instance, line, case);
        let excess = (flow.abs() - limit) / limit;
        if excess > VIOLATION_TOL {
            let direction = if flow > 0.0 { CutDirection::Upper } else { CutDirection::Lower };
            found.push(Violation {
                id: SecurityCutId {
                    period,
                    case,
                    line,
                    direction,
                },
                flow,
                limit,
                normalized_excess: excess,
            });
        }
    }
    counter.fetch_add(instance.num_lines() as u64, Ordering::Relaxed);
    found
}

fn sort_violations(v: &mut [Violation]) {
    v.sort_by(|a, b| {
        b.normalized_excess
            .total_cmp(&a.normalized_excess)
            .then(a.id.cmp(&b.id))
    });
}

/// Every violated line-limit row of the dispatch, most violated first.
/// Blocks of (case, period) are screened on the workers; the result does
/// not depend on how the blocks are scheduled.
pub fn screen(
    instance: &Instance,
    sens: &SensitivitySet,
    dispatch: &Dispatch,
    workers: &Workers,
) -> Result<Screening, SeparationError> {
    let periods: Vec<usize> = (0..dispatch.num_periods()).map(|k| dispatch.first_period + k).collect();
    let mut injections = Vec::with_capacity(periods.len());
    for &t in &periods {
        let inj = dispatch.injections(instance, t);
        let residual: f64 = inj.iter().sum();
        if residual.abs() > BALANCE_TOL {
            return Err(SeparationError::Unbalanced { period: t, residual });
        }
        injections.push(inj);
    }
    let cases = all_cases(instance);
    let blocks: Vec<(FlowCase, usize)> = cases
        .iter()
        .flat_map(|&c| (0..periods.len()).map(move |k| (c, k)))
        .collect();
    let counter = AtomicU64::new(0);
    let run = |&(case, k): &(FlowCase, usize)| screen_block(instance, sens, case, periods[k], &injections[k], &counter);
    let mut violations: Vec<Violation> = match &workers.pool {
        Some(pool) => pool.install(|| blocks.par_iter().flat_map_iter(run).collect()),
        None => blocks.iter().flat_map(run).collect(),
    };
    sort_violations(&mut violations);
    Ok(Screening {
        violations,
        evaluations: counter.into_inner(),
    })
}

/// Up to `cap_per_period` of the most violated ids per period that are not
/// in `pooled`. When every candidate is pooled already, the single most
/// violated id is returned again.
pub fn select_cuts(violations: &[Violation], cap_per_period: usize, pooled: &BTreeSet<SecurityCutId>) -> Vec<SecurityCutId> {
    let mut per_period: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut chosen = Vec::new();
    for v in violations {
        if pooled.contains(&v.id) {
            continue;
        }
        let used = per_period.entry(v.id.period).or_insert(0);
        if *used < cap_per_period {
            *used += 1;
            chosen.push(v.id);
        }
    }
    if chosen.is_empty() {
        if let Some(top) = violations.first() {
            warn!(
                "all {} violated rows are pooled; re-emitting the worst (excess {:.3e}, flow {:.6}, limit {})",
                violations.len(),
                top.normalized_excess,
                top.flow,
                top.limit
            );
            chosen.push(top.id);
        }
    }
    chosen
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledCut {
    pub id: SecurityCutId,
    pub flow: f64,
    pub limit: f64,
}

/// Cuts added during one solve, in insertion order and without duplicates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutPool {
    cuts: Vec<PooledCut>,
    ids: BTreeSet<SecurityCutId>,
}

impl CutPool {
    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn contains(&self, id: &SecurityCutId) -> bool {
        self.ids.contains(id)
    }

    pub fn ids(&self) -> &BTreeSet<SecurityCutId> {
        &self.ids
    }

    pub fn cuts(&self) -> &[PooledCut] {
        &self.cuts
    }

    /// Returns false when the id is already pooled.
    pub fn insert(&mut self, cut: PooledCut) -> bool {
        if !self.ids.insert(cut.id) {
            return false;
        }
        self.cuts.push(cut);
        true
    }

    pub fn write_csv<W: Write>(&self, instance: &Instance, mut out: W) -> std::io::Result<()> {
        writeln!(out, "line,period,contingency,direction,flow,limit")?;
        for c in &self.cuts {
            let case = match c.id.case {
                FlowCase::Base => "base".to_string(),
                FlowCase::Contingency(k) => instance.contingencies[k].id.clone(),
            };
            let dir = match c.id.direction {
                CutDirection::Upper => "upper",
                CutDirection::Lower => "lower",
            };
            writeln!(
                out,
                "{},{},{},{},{},{}",
                instance.lines[c.id.line].id,
                c.id.period,
                case,
                dir,
                format_sig(c.flow, 12),
                format_sig(c.limit, 12)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecureOutcome {
    pub outcome: SolveOutcome,
    pub pool: CutPool,
    /// solves performed: 1 except under filtering
    pub rounds: usize,
    pub screen_calls: usize,
    pub flow_evaluations: u64,
}

/// Separation settings shared by the drivers.
#[derive(Debug, Clone)]
pub struct SeparationConfig {
    pub cap_per_period: usize,
    pub max_rounds: usize,
    pub workers: Workers,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            cap_per_period: DEFAULT_CUT_CAP,
            max_rounds: DEFAULT_FILTER_ROUNDS,
            workers: Workers::serial(),
        }
    }
}

/// Screens a model point and turns the selected violations into rows.
fn separate(
    instance: &Instance,
    sens: &SensitivitySet,
    model: &ModelSpec,
    x: &[f64],
    config: &SeparationConfig,
    pool: &mut CutPool,
) -> Result<(Vec<Constraint>, u64), SeparationError> {
    let dispatch = Dispatch::from_model(instance, model, x);
    let screening = screen(instance, sens, &dispatch, &config.workers)?;
    let ids = select_cuts(&screening.violations, config.cap_per_period, pool.ids());
    let mut rows = Vec::with_capacity(ids.len());
    for id in ids {
        let v = screening.violations.iter().find(|v| v.id == id).expect("selected from screening");
        pool.insert(PooledCut {
            id,
            flow: v.flow,
            limit: v.limit,
        });
        rows.push(security_constraint(instance, sens, model, id)?);
    }
    Ok((rows, screening.evaluations))
}

/// Solves a lazily secured model, screening every integer solution the
/// search finds and injecting violated rows into the running search.
pub fn solve_with_dynamic_cuts(
    instance: &Instance,
    sens: &SensitivitySet,
    model: &ModelSpec,
    controls: &SolveControls,
    config: &SeparationConfig,
    start: Option<&[f64]>,
) -> Result<SecureOutcome, SeparationError> {
    let mut pool = CutPool::default();
    let mut evaluations = 0u64;
    let mut screens = 0usize;
    let mut failure: Option<SeparationError> = None;
    let outcome = solve_milp_with_start(model, controls, start, |x| {
        screens += 1;
        match separate(instance, sens, model, x, config, &mut pool) {
            Ok((rows, evals)) => {
                evaluations += evals;
                Ok(rows)
            }
            Err(e) => {
                let msg = e.to_string();
                failure = Some(e);
                Err(CallbackError(msg))
            }
        }
    });
    let outcome = match (outcome, failure) {
        (Err(_), Some(e)) => return Err(e),
        (Err(e), None) => return Err(e.into()),
        (Ok(o), _) => o,
    };
    debug!(
        "dynamic separation: {} cuts, {} screens, status {}",
        pool.len(),
        screens,
        outcome.status
    );
    Ok(SecureOutcome {
        outcome,
        pool,
        rounds: 1,
        screen_calls: screens,
        flow_evaluations: evaluations,
    })
}

/// Solve, screen the incumbent, add the selected rows, and solve again from
/// scratch until the incumbent is secure.
pub fn solve_with_filtering(
    instance: &Instance,
    sens: &SensitivitySet,
    model: &ModelSpec,
    controls: &SolveControls,
    config: &SeparationConfig,
    start: Option<&[f64]>,
) -> Result<SecureOutcome, SeparationError> {
    let t0 = Instant::now();
    let mut model = model.clone();
    let mut pool = CutPool::default();
    let mut evaluations = 0u64;
    let mut screens = 0usize;
    let mut start = start.map(<[f64]>::to_vec);
    let mut last_objective = f64::NAN;
    for round in 1..=config.max_rounds {
        let remaining = controls.time_limit.saturating_sub(t0.elapsed());
        let mut round_controls = controls.clone();
        round_controls.time_limit = remaining.max(Duration::from_millis(1));
        let mut outcome = solve_milp_with_start(&model, &round_controls, start.as_deref(), |_| Ok(Vec::new()))?;
        let Some(x) = outcome.incumbent.clone() else {
            return Ok(SecureOutcome {
                outcome,
                pool,
                rounds: round,
                screen_calls: screens,
                flow_evaluations: evaluations,
            });
        };
        last_objective = outcome.objective;
        screens += 1;
        let before = model.num_constraints();
        let (rows, evals) = separate(instance, sens, &model, &x, config, &mut pool)?;
        evaluations += evals;
        if rows.is_empty() {
            outcome.stats.cuts_added = pool.len();
            return Ok(SecureOutcome {
                outcome,
                pool,
                rounds: round,
                screen_calls: screens,
                flow_evaluations: evaluations,
            });
        }
        for row in rows {
            model.add_constraint(row);
        }
        debug!("filtering round {round}: {} rows added", model.num_constraints() - before);
        // the previous incumbent is now cut off
        start = None;
        if t0.elapsed() >= controls.time_limit {
            outcome.incumbent = None;
            outcome.objective = f64::INFINITY;
            outcome.status = crate::milp::SolveStatus::FeasibleTimeLimit;
            return Ok(SecureOutcome {
                outcome,
                pool,
                rounds: round,
                screen_calls: screens,
                flow_evaluations: evaluations,
            });
        }
    }
    Err(SeparationError::RoundCap {
        rounds: config.max_rounds,
        objective: last_objective,
    })
}

/// Builds the model over `[first_period, first_period + horizon)` with the
/// row set `mode` needs and solves it.
#[allow(clippy::too_many_arguments)]
pub fn solve_secure(
    instance: &Instance,
    sens: &SensitivitySet,
    first_period: usize,
    horizon: usize,
    theta: &BoundaryState,
    integer_prefix: usize,
    mode: SeparationMode,
    controls: &SolveControls,
    config: &SeparationConfig,
) -> Result<(ModelSpec, SecureOutcome), SeparationError> {
    let security = match mode {
        SeparationMode::Enumerate => SecurityMode::Enumerate,
        _ => SecurityMode::Lazy,
    };
    let model = build_model(instance, sens, first_period, horizon, theta, integer_prefix, security)?;
    let out = solve_model(instance, sens, &model, mode, controls, config, None)?;
    Ok((model, out))
}

/// Solves an already built model under `mode`.
pub fn solve_model(
    instance: &Instance,
    sens: &SensitivitySet,
    model: &ModelSpec,
    mode: SeparationMode,
    controls: &SolveControls,
    config: &SeparationConfig,
    start: Option<&[f64]>,
) -> Result<SecureOutcome, SeparationError> {
    match mode {
        SeparationMode::Enumerate => {
            let outcome = solve_milp_with_start(model, controls, start, |_| Ok(Vec::new()))?;
            Ok(SecureOutcome {
                outcome,
                pool: CutPool::default(),
                rounds: 1,
                screen_calls: 0,
                flow_evaluations: 0,
            })
        }
        SeparationMode::Dynamic => solve_with_dynamic_cuts(instance, sens, model, controls, config, start),
        SeparationMode::Filtering => solve_with_filtering(instance, sens, model, controls, config, start),
    }
}
