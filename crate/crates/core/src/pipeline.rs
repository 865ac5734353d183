//! One end-to-end run: monolithic or decomposed solve, optional
//! refinement, shared by the command line and the benchmark.

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::decomposition::{run_relax_and_cut, solve_monolithic, DecompositionError, DecompositionParams, DecompositionResult, MonolithicResult};
use crate::instance::Instance;
use crate::milp::SolveStatus;
use crate::network::SensitivitySet;
use crate::refine::{rins_refine, RefineError, RinsParams, RinsResult};
use crate::schedule::Schedule;
use crate::separation::{SeparationConfig, SeparationMode};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RunMode {
    Monolithic,
    /// decomposition without a relaxed lookahead
    Td,
    /// decomposition with a relaxed lookahead
    TdR,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Monolithic => "monolithic",
            RunMode::Td => "td",
            RunMode::TdR => "td-r",
        }
    }
}

impl std::str::FromStr for RunMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "monolithic" => Ok(RunMode::Monolithic),
            "td" => Ok(RunMode::Td),
            "td-r" => Ok(RunMode::TdR),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub mode: RunMode,
    pub separation: SeparationMode,
    pub s_i: usize,
    /// ignored in [`RunMode::Td`], which always uses zero
    pub s_r: usize,
    pub dt: usize,
    pub ds: usize,
    pub gap_sub: f64,
    pub gap_final: f64,
    /// covers the solve and any refinement
    pub time_limit: Duration,
    /// `(window, stride)` of a refinement pass after the solve
    pub rins: Option<(usize, usize)>,
    pub config: SeparationConfig,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            mode: RunMode::TdR,
            separation: SeparationMode::Dynamic,
            s_i: 6,
            s_r: 6,
            dt: 6,
            ds: 2,
            gap_sub: 0.01,
            gap_final: 0.001,
            time_limit: Duration::from_secs(3600),
            rins: None,
            config: SeparationConfig::default(),
        }
    }
}

impl RunSettings {
    pub fn decomposition_params(&self) -> DecompositionParams {
        DecompositionParams {
            s_i: self.s_i,
            s_r: if self.mode == RunMode::Td { 0 } else { self.s_r },
            dt: self.dt,
            ds: self.ds,
            subproblem_gap: self.gap_sub,
            completion_gap: self.gap_sub,
            time_limit: self.time_limit,
            mode: self.separation,
            separation: self.config.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Feasible,
    Infeasible,
    /// time ran out before any schedule was found
    NoIncumbent,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub schedule: Option<Schedule>,
    pub wall_seconds: f64,
    pub cuts: usize,
    pub subproblems: usize,
    pub restarts: usize,
    pub monolithic: Option<MonolithicResult>,
    pub decomposition: Option<DecompositionResult>,
    /// log of a decomposition that ended without a schedule
    pub failure_log: Vec<String>,
    pub rins: Option<RinsResult>,
}

impl RunOutcome {
    pub fn objective(&self) -> Option<f64> {
        self.schedule.as_ref().map(|s| s.objective.total)
    }
}

pub fn run(instance: &Instance, sens: &SensitivitySet, settings: &RunSettings) -> Result<RunOutcome, PipelineError> {
    if settings.time_limit.is_zero() {
        return Err(PipelineError::Params("time limit must be positive".into()));
    }
    let started = Instant::now();
    let mut out = RunOutcome {
        status: RunStatus::NoIncumbent,
        schedule: None,
        wall_seconds: 0.0,
        cuts: 0,
        subproblems: 0,
        restarts: 0,
        monolithic: None,
        decomposition: None,
        failure_log: Vec::new(),
        rins: None,
    };
    match settings.mode {
        RunMode::Monolithic => {
            let mono = solve_monolithic(
                instance,
                sens,
                settings.separation,
                settings.gap_final,
                settings.time_limit,
                &settings.config,
            )?;
            out.cuts = mono.pool.len();
            out.subproblems = 1;
            out.status = match (&mono.schedule, mono.status) {
                (Some(_), _) => RunStatus::Feasible,
                (None, SolveStatus::Infeasible) => RunStatus::Infeasible,
                (None, _) => RunStatus::NoIncumbent,
            };
            out.schedule = mono.schedule.clone();
            out.monolithic = Some(mono);
        }
        RunMode::Td | RunMode::TdR => match run_relax_and_cut(instance, sens, &settings.decomposition_params()) {
            Ok(res) => {
                out.cuts = res.total_cuts;
                out.subproblems = res.subproblems.len();
                out.restarts = res.restarts;
                out.status = RunStatus::Feasible;
                out.schedule = Some(res.schedule.clone());
                out.decomposition = Some(res);
            }
            Err(DecompositionError::Infeasible { attempts, log }) => {
                out.status = RunStatus::Infeasible;
                out.restarts = attempts.saturating_sub(1);
                out.failure_log = log;
            }
            Err(DecompositionError::TimeLimit { log }) => {
                out.status = RunStatus::NoIncumbent;
                out.failure_log = log;
            }
            Err(e) => return Err(e.into()),
        },
    }

    if let (Some((window, stride)), Some(schedule)) = (settings.rins, &out.schedule) {
        let left = settings.time_limit.saturating_sub(started.elapsed());
        if !left.is_zero() {
            let params = RinsParams {
                window,
                stride,
                gap: settings.gap_final,
                time_limit: left,
                max_passes: None,
                mode: settings.separation,
                separation: settings.config.clone(),
            };
            let refined = rins_refine(instance, sens, schedule, &params)?;
            out.schedule = Some(refined.schedule.clone());
            out.rins = Some(refined);
        }
    }
    out.wall_seconds = started.elapsed().as_secs_f64();
    Ok(out)
}
