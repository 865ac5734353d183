//! Rolling-horizon relax-and-cut.
//!
//! Each subproblem covers a fixed prefix `w_F` (already committed, enters
//! through the boundary state only), an integer window `w_I` and a relaxed
//! lookahead `w_R`. The first `Δt` periods of every solved subproblem are
//! committed and the windows advance by `Δt`. Once the windows no longer
//! fit, the remaining periods are solved in one integer completion. A
//! failed subproblem or completion restarts the whole pass with a wider
//! integer window.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use log::info;
use thiserror::Error;

use crate::formulation::{objective_value, BoundaryState, FormulationError, UnitState};
use crate::instance::Instance;
use crate::milp::{SolveControls, SolveStatus};
use crate::model::{ModelSpec, VarKey, VarKind};
use crate::network::SensitivitySet;
use crate::schedule::{Provenance, Schedule};
use crate::separation::{solve_secure, CutPool, SeparationConfig, SeparationError, SeparationMode};

const BINARY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DecompositionError {
    #[error("invalid decomposition parameters: {0}")]
    Params(String),
    #[error("generator {generator}: commitment {value} at period {period} is not binary")]
    FractionalCommitment { generator: usize, period: usize, value: f64 },
    #[error("window solution covers {got} periods, expected {expected}")]
    WindowLength { expected: usize, got: usize },
    #[error("no feasible schedule with the integer window at the full horizon ({attempts} attempts)")]
    Infeasible { attempts: usize, log: Vec<String> },
    #[error("time limit reached before a complete schedule was found")]
    TimeLimit { log: Vec<String> },
    #[error(transparent)]
    Separation(#[from] SeparationError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
}

/// Window sizes for one pass. `s_f` is signed so the pass can start at `−Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPartition {
    pub s_f: i64,
    pub s_i: usize,
    pub s_r: usize,
    pub dt: usize,
    pub horizon: usize,
}

impl WindowPartition {
    pub fn new(s_i: usize, s_r: usize, dt: usize, horizon: usize) -> Self {
        WindowPartition {
            s_f: -(dt as i64),
            s_i,
            s_r,
            dt,
            horizon,
        }
    }

    pub fn fits(&self) -> bool {
        self.s_f + (self.s_i + self.s_r) as i64 <= self.horizon as i64
    }

    #[must_use]
    pub fn advance(self) -> Self {
        WindowPartition {
            s_f: self.s_f + self.dt as i64,
            ..self
        }
    }

    /// Committed periods, one-based and inclusive; `None` when empty.
    pub fn fixed(&self) -> Option<(usize, usize)> {
        (self.s_f >= 1).then(|| (1, self.s_f as usize))
    }

    pub fn integer(&self) -> Option<(usize, usize)> {
        let start = self.s_f + 1;
        (self.s_i > 0 && start >= 1).then(|| (start as usize, (self.s_f as usize) + self.s_i))
    }

    pub fn relaxed(&self) -> Option<(usize, usize)> {
        let start = self.s_f + self.s_i as i64 + 1;
        (self.s_r > 0 && start >= 1).then(|| (start as usize, start as usize + self.s_r - 1))
    }
}

/// Commitment and production of the committed periods of one subproblem,
/// `[generator][k]` for `k < Δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSolution {
    pub x: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

/// Boundary state after committing `window` on top of `prev`.
///
/// A unit whose status never changes inside the window extends the run it
/// carried in from `prev`; otherwise the run restarts at the last switch.
pub fn propagate_state(
    instance: &Instance,
    prev: &BoundaryState,
    window: &WindowSolution,
    dt: usize,
) -> Result<BoundaryState, DecompositionError> {
    let mut units = Vec::with_capacity(prev.units.len());
    for (g, gen) in instance.generators.iter().enumerate() {
        let xs = &window.x[g];
        if xs.len() != dt || window.p[g].len() != dt || dt == 0 {
            return Err(DecompositionError::WindowLength {
                expected: dt,
                got: xs.len(),
            });
        }
        let mut bits = Vec::with_capacity(dt);
        for (k, &v) in xs.iter().enumerate() {
            let r = v.round();
            if (v - r).abs() > BINARY_TOL || !(r == 0.0 || r == 1.0) {
                return Err(DecompositionError::FractionalCommitment {
                    generator: g,
                    period: k + 1,
                    value: v,
                });
            }
            bits.push(r == 1.0);
        }
        let on = bits[dt - 1];
        let mut run = bits.iter().rev().take_while(|&&b| b == on).count() as u32;
        let carried = &prev.units[g];
        if run as usize == dt && carried.on == on {
            run += if on { carried.cum_up } else { carried.cum_down };
        }
        units.push(if on {
            UnitState {
                on,
                up_remaining: gen.min_up.saturating_sub(run),
                down_remaining: 0,
                power: window.p[g][dt - 1],
                cum_up: run,
                cum_down: 0,
            }
        } else {
            UnitState {
                on,
                up_remaining: 0,
                down_remaining: gen.min_down.saturating_sub(run),
                power: 0.0,
                cum_up: 0,
                cum_down: run,
            }
        });
    }
    Ok(BoundaryState { units })
}

#[derive(Debug, Clone)]
pub struct DecompositionParams {
    pub s_i: usize,
    pub s_r: usize,
    pub dt: usize,
    pub ds: usize,
    /// relative gap of every windowed subproblem
    pub subproblem_gap: f64,
    /// relative gap of the completion solve
    pub completion_gap: f64,
    pub time_limit: Duration,
    pub mode: SeparationMode,
    pub separation: SeparationConfig,
}

impl Default for DecompositionParams {
    fn default() -> Self {
        DecompositionParams {
            s_i: 6,
            s_r: 6,
            dt: 6,
            ds: 2,
            subproblem_gap: 0.01,
            completion_gap: 0.01,
            time_limit: Duration::from_secs(3600),
            mode: SeparationMode::Dynamic,
            separation: SeparationConfig::default(),
        }
    }
}

impl DecompositionParams {
    pub fn validate(&self, horizon: usize) -> Result<(), DecompositionError> {
        let bad = |m: String| Err(DecompositionError::Params(m));
        if self.s_i == 0 || self.dt == 0 || self.ds == 0 {
            return bad("s_i, dt and ds must be positive".into());
        }
        if self.dt > self.s_i {
            return bad(format!("dt = {} exceeds s_i = {}", self.dt, self.s_i));
        }
        if self.s_i > horizon {
            return bad(format!("s_i = {} exceeds the horizon {horizon}", self.s_i));
        }
        if !(self.subproblem_gap >= 0.0 && self.completion_gap >= 0.0) {
            return bad("gaps must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemKind {
    Window,
    Completion,
}

/// One solved subproblem. `Display` gives the `key=value` progress line.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemLog {
    pub attempt: usize,
    pub iteration: usize,
    pub kind: SubproblemKind,
    pub s_i: usize,
    pub first: usize,
    pub integer_last: usize,
    pub last: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub cuts: usize,
    pub nodes: u64,
    pub seconds: f64,
    /// committed periods after this subproblem
    pub fixed_len: usize,
    /// digest of the committed prefix after this subproblem
    pub prefix_digest: u64,
}

impl fmt::Display for SubproblemLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            SubproblemKind::Window => "window",
            SubproblemKind::Completion => "completion",
        };
        write!(
            f,
            "attempt={} iteration={} kind={kind} s_i={} periods={}..{} integer_last={} status={} objective={:.6} cuts={} nodes={} seconds={:.3} fixed={}",
            self.attempt,
            self.iteration,
            self.s_i,
            self.first,
            self.last,
            self.integer_last,
            self.status,
            self.objective,
            self.cuts,
            self.nodes,
            self.seconds,
            self.fixed_len
        )
    }
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub schedule: Schedule,
    pub restarts: usize,
    /// integer window size of the successful pass
    pub final_s_i: usize,
    pub subproblems: Vec<SubproblemLog>,
    pub log: Vec<String>,
    pub total_cuts: usize,
    pub wall_seconds: f64,
}

impl DecompositionResult {
    /// Windowed subproblems of the successful pass.
    pub fn windows_in_final_attempt(&self) -> usize {
        let last = self.restarts + 1;
        self.subproblems
            .iter()
            .filter(|s| s.attempt == last && s.kind == SubproblemKind::Window)
            .count()
    }
}

/// Digest of `x`, `p` and curtailment over the first `len` periods.
pub fn prefix_digest(schedule: &Schedule, len: usize) -> u64 {
    let mut h = DefaultHasher::new();
    for m in [&schedule.x, &schedule.p, &schedule.curtail] {
        for row in m.iter() {
            for v in &row[..len] {
                v.to_bits().hash(&mut h);
            }
        }
    }
    h.finish()
}

fn model_value(model: &ModelSpec, point: &[f64], kind: VarKind, owner: usize, t: usize) -> f64 {
    model.var(&VarKey::new(kind, owner, t)).map_or(0.0, |j| point[j])
}

/// Copies periods `from..=to` of a model point into the schedule.
fn commit(
    instance: &Instance,
    model: &ModelSpec,
    point: &[f64],
    (from, to): (usize, usize),
    provenance: Provenance,
    out: &mut Schedule,
) {
    for t in from..=to {
        for g in 0..instance.num_generators() {
            out.x[g][t - 1] = model_value(model, point, VarKind::Commit, g, t).round();
            out.p[g][t - 1] = model_value(model, point, VarKind::Power, g, t);
        }
        for b in 0..instance.num_buses() {
            out.curtail[b][t - 1] = model_value(model, point, VarKind::Curtail, b, t);
        }
        out.provenance[t - 1] = provenance;
    }
}

fn window_solution(instance: &Instance, schedule: &Schedule, from: usize, dt: usize) -> WindowSolution {
    let slice = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..instance.num_generators())
            .map(|g| m[g][from - 1..from - 1 + dt].to_vec())
            .collect()
    };
    WindowSolution {
        x: slice(&schedule.x),
        p: slice(&schedule.p),
    }
}

enum Pass {
    Done(Schedule),
    Failed,
    OutOfTime,
}

struct Runner<'a> {
    instance: &'a Instance,
    sens: &'a SensitivitySet,
    params: &'a DecompositionParams,
    started: Instant,
    logs: Vec<SubproblemLog>,
    lines: Vec<String>,
    total_cuts: usize,
}

impl Runner<'_> {
    fn remaining(&self) -> Option<Duration> {
        let left = self.params.time_limit.saturating_sub(self.started.elapsed());
        (!left.is_zero()).then_some(left)
    }

    fn note(&mut self, line: String) {
        info!("{line}");
        self.lines.push(line);
    }

    #[allow(clippy::too_many_arguments)]
    fn solve(
        &mut self,
        attempt: usize,
        iteration: usize,
        kind: SubproblemKind,
        s_i: usize,
        first: usize,
        horizon: usize,
        integer_prefix: usize,
        theta: &BoundaryState,
        gap: f64,
    ) -> Result<Option<(ModelSpec, Vec<f64>, SubproblemLog)>, DecompositionError> {
        let Some(left) = self.remaining() else { return Ok(None) };
        let controls = SolveControls {
            time_limit: left,
            ..SolveControls::with_gap(gap)
        };
        let t0 = Instant::now();
        let (model, out) = solve_secure(
            self.instance,
            self.sens,
            first,
            horizon,
            theta,
            integer_prefix,
            self.params.mode,
            &controls,
            &self.params.separation,
        )?;
        self.total_cuts += out.pool.len();
        let log = SubproblemLog {
            attempt,
            iteration,
            kind,
            s_i,
            first,
            integer_last: first + integer_prefix - 1,
            last: first + horizon - 1,
            status: out.outcome.status,
            objective: out.outcome.objective,
            cuts: out.pool.len(),
            nodes: out.outcome.stats.nodes,
            seconds: t0.elapsed().as_secs_f64(),
            fixed_len: 0,
            prefix_digest: 0,
        };
        match out.outcome.incumbent {
            Some(point) => Ok(Some((model, point, log))),
            None => {
                let line = log.to_string();
                self.note(line);
                self.logs.push(log);
                Ok(None)
            }
        }
    }

    fn pass(&mut self, attempt: usize, s_i: usize) -> Result<Pass, DecompositionError> {
        let (instance, params) = (self.instance, self.params);
        let horizon = instance.horizon;
        let mut schedule = Schedule::zeros(instance);
        let mut theta = BoundaryState::initial(instance);
        let mut part = WindowPartition::new(s_i, params.s_r, params.dt, horizon);
        let mut iteration = 0;
        let mut fixed_len = 0usize;

        while part.fits() {
            part = part.advance();
            if !part.fits() {
                break;
            }
            iteration += 1;
            let first = part.s_f as usize + 1;
            let span = s_i + params.s_r;
            let solved = self.solve(
                attempt,
                iteration,
                SubproblemKind::Window,
                s_i,
                first,
                span,
                s_i,
                &theta,
                params.subproblem_gap,
            )?;
            let Some((model, point, mut log)) = solved else {
                return Ok(if self.remaining().is_none() { Pass::OutOfTime } else { Pass::Failed });
            };
            let covers_rest = params.s_r == 0 && first + s_i - 1 == horizon;
            let to = if covers_rest { horizon } else { first + params.dt - 1 };
            commit(instance, &model, &point, (first, to), Provenance::FixedAtIteration { iteration }, &mut schedule);
            fixed_len = to;
            log.fixed_len = fixed_len;
            log.prefix_digest = prefix_digest(&schedule, fixed_len);
            let line = log.to_string();
            self.note(line);
            self.logs.push(log);
            if covers_rest {
                return Ok(Pass::Done(schedule));
            }
            theta = propagate_state(instance, &theta, &window_solution(instance, &schedule, first, params.dt), params.dt)?;
        }

        let first = fixed_len + 1;
        let span = horizon - fixed_len;
        let solved = self.solve(
            attempt,
            iteration + 1,
            SubproblemKind::Completion,
            s_i,
            first,
            span,
            span,
            &theta,
            params.completion_gap,
        )?;
        let Some((model, point, mut log)) = solved else {
            return Ok(if self.remaining().is_none() { Pass::OutOfTime } else { Pass::Failed });
        };
        commit(instance, &model, &point, (first, horizon), Provenance::FinalCompletion, &mut schedule);
        log.fixed_len = horizon;
        log.prefix_digest = prefix_digest(&schedule, horizon);
        let line = log.to_string();
        self.note(line);
        self.logs.push(log);
        Ok(Pass::Done(schedule))
    }
}

/// Runs the decomposition with restarts. On failure of any subproblem the
/// integer window grows by `ds` (capped at the horizon) and the pass starts
/// over from the initial state.
pub fn run_relax_and_cut(
    instance: &Instance,
    sens: &SensitivitySet,
    params: &DecompositionParams,
) -> Result<DecompositionResult, DecompositionError> {
    let horizon = instance.horizon;
    params.validate(horizon)?;
    let mut runner = Runner {
        instance,
        sens,
        params,
        started: Instant::now(),
        logs: Vec::new(),
        lines: Vec::new(),
        total_cuts: 0,
    };
    let mut s_i = params.s_i;
    let mut attempt = 1;
    loop {
        match runner.pass(attempt, s_i)? {
            Pass::Done(mut schedule) => {
                schedule.derive_transitions(instance);
                schedule.objective = objective_value(instance, &schedule)?;
                runner.note(format!(
                    "result=feasible restarts={} s_i={s_i} objective={:.6} cuts={} seconds={:.3}",
                    attempt - 1,
                    schedule.objective.total,
                    runner.total_cuts,
                    runner.started.elapsed().as_secs_f64()
                ));
                return Ok(DecompositionResult {
                    schedule,
                    restarts: attempt - 1,
                    final_s_i: s_i,
                    subproblems: runner.logs,
                    log: runner.lines,
                    total_cuts: runner.total_cuts,
                    wall_seconds: runner.started.elapsed().as_secs_f64(),
                });
            }
            Pass::OutOfTime => return Err(DecompositionError::TimeLimit { log: runner.lines }),
            Pass::Failed => {
                if s_i >= horizon {
                    return Err(DecompositionError::Infeasible {
                        attempts: attempt,
                        log: runner.lines,
                    });
                }
                let next = (s_i + params.ds).min(horizon);
                runner.note(format!("restart={attempt} s_i={s_i} next_s_i={next}"));
                s_i = next;
                attempt += 1;
            }
        }
    }
}

/// Result of one full-horizon solve.
#[derive(Debug, Clone)]
pub struct MonolithicResult {
    pub schedule: Option<Schedule>,
    pub status: SolveStatus,
    pub best_bound: f64,
    pub pool: CutPool,
    pub rounds: usize,
    pub nodes: u64,
    pub wall_seconds: f64,
}

/// Solves the whole horizon as one MILP with every commitment binary.
pub fn solve_monolithic(
    instance: &Instance,
    sens: &SensitivitySet,
    mode: SeparationMode,
    gap: f64,
    time_limit: Duration,
    config: &SeparationConfig,
) -> Result<MonolithicResult, DecompositionError> {
    let started = Instant::now();
    let horizon = instance.horizon;
    let theta = BoundaryState::initial(instance);
    let controls = SolveControls {
        time_limit,
        ..SolveControls::with_gap(gap)
    };
    let (model, out) = solve_secure(instance, sens, 1, horizon, &theta, horizon, mode, &controls, config)?;
    let schedule = match &out.outcome.incumbent {
        Some(point) => {
            let mut s = Schedule::zeros(instance);
            commit(instance, &model, point, (1, horizon), Provenance::Monolithic, &mut s);
            s.derive_transitions(instance);
            s.objective = objective_value(instance, &s)?;
            Some(s)
        }
        None => None,
    };
    Ok(MonolithicResult {
        schedule,
        status: out.outcome.status,
        best_bound: out.outcome.best_bound,
        pool: out.pool,
        rounds: out.rounds,
        nodes: out.outcome.stats.nodes,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}
