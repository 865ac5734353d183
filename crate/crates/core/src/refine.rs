//! Sliding-window neighborhood search on a complete schedule. Everything
//! outside the window is fixed to the incumbent and the window is re-solved
//! with full security; improvements are accepted only when strict.

use std::io::Write;
use std::time::{Duration, Instant};

use log::info;
use thiserror::Error;

use crate::formulation::{build_model, objective_value, schedule_point, BoundaryState, FormulationError, SecurityMode};
use crate::instance::Instance;
use crate::milp::SolveControls;
use crate::model::{ModelSpec, VarKey, VarKind};
use crate::network::SensitivitySet;
use crate::schedule::{Provenance, Schedule};
use crate::separation::{solve_model, SeparationConfig, SeparationError, SeparationMode};

/// A pass improving the objective by less than this (relative) ends the search.
pub const PASS_IMPROVEMENT_TOL: f64 = 1e-4;

const ACCEPT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("invalid refinement parameters: {0}")]
    Params(String),
    #[error("incumbent does not match the instance: {0}")]
    Incumbent(String),
    #[error(transparent)]
    Separation(#[from] SeparationError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
}

#[derive(Debug, Clone)]
pub struct RinsParams {
    pub window: usize,
    pub stride: usize,
    pub gap: f64,
    pub time_limit: Duration,
    /// `None` runs passes until one improves by less than [`PASS_IMPROVEMENT_TOL`]
    pub max_passes: Option<usize>,
    pub mode: SeparationMode,
    pub separation: SeparationConfig,
}

impl Default for RinsParams {
    fn default() -> Self {
        RinsParams {
            window: 12,
            stride: 9,
            gap: 1e-3,
            time_limit: Duration::from_secs(3600),
            max_passes: None,
            mode: SeparationMode::Dynamic,
            separation: SeparationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub pass: usize,
    pub window_start: usize,
    pub window_end: usize,
    pub accepted: bool,
    /// objective after this window
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct RinsResult {
    pub schedule: Schedule,
    pub initial_objective: f64,
    pub trace: Vec<TraceRow>,
    pub passes: usize,
    /// the time budget ran out before the last pass finished
    pub truncated: bool,
}

impl RinsResult {
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "pass,window_start,accepted,objective")?;
        for r in &self.trace {
            writeln!(out, "{},{},{},{:.6}", r.pass, r.window_start, r.accepted, r.objective)?;
        }
        Ok(())
    }
}

/// Window start positions (one-based) covering `1..=horizon`.
pub fn window_starts(horizon: usize, window: usize, stride: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 1;
    loop {
        let end = (start + window - 1).min(horizon);
        out.push((start, end));
        if end == horizon {
            return out;
        }
        start += stride;
    }
}

fn fix_outside(model: &mut ModelSpec, incumbent: &Schedule, (from, to): (usize, usize)) {
    for var in model.variables.iter_mut() {
        let key = var.key;
        let t = key.period;
        if (from..=to).contains(&t) {
            continue;
        }
        let value = match key.kind {
            VarKind::Commit => incumbent.x[key.owner][t - 1],
            VarKind::Startup => incumbent.z[key.owner][t - 1],
            VarKind::Shutdown => incumbent.w[key.owner][t - 1],
            VarKind::Power => incumbent.p[key.owner][t - 1],
            VarKind::Curtail => incumbent.curtail[key.owner][t - 1],
            VarKind::Segment | VarKind::InitialPower => continue,
        };
        var.lo = value;
        var.hi = value;
    }
}

fn read_back(instance: &Instance, model: &ModelSpec, point: &[f64], base: &Schedule, (from, to): (usize, usize), pass: usize) -> Schedule {
    let mut s = base.clone();
    let get = |kind, owner, t| model.var(&VarKey::new(kind, owner, t)).map_or(0.0, |j| point[j]);
    for t in from..=to {
        for g in 0..instance.num_generators() {
            s.x[g][t - 1] = get(VarKind::Commit, g, t).round();
            s.p[g][t - 1] = get(VarKind::Power, g, t);
        }
        for b in 0..instance.num_buses() {
            s.curtail[b][t - 1] = get(VarKind::Curtail, b, t);
        }
        s.provenance[t - 1] = Provenance::RinsPass { pass };
    }
    s.derive_transitions(instance);
    s
}

/// Runs window passes over the horizon until the improvement of a full
/// pass falls below [`PASS_IMPROVEMENT_TOL`], the pass cap is reached or
/// the time budget expires. The objective never increases.
pub fn rins_refine(
    instance: &Instance,
    sens: &SensitivitySet,
    incumbent: &Schedule,
    params: &RinsParams,
) -> Result<RinsResult, RefineError> {
    if params.window == 0 || params.stride == 0 {
        return Err(RefineError::Params("window and stride must be positive".into()));
    }
    if params.stride > params.window {
        return Err(RefineError::Params(format!(
            "stride {} leaves periods between windows of {}",
            params.stride, params.window
        )));
    }
    incumbent
        .check_dimensions(instance)
        .map_err(|e| RefineError::Incumbent(e.to_string()))?;
    let started = Instant::now();
    let horizon = instance.horizon;
    let theta = BoundaryState::initial(instance);
    let base = build_model(instance, sens, 1, horizon, &theta, horizon, SecurityMode::Lazy)?;
    let mut current = incumbent.clone();
    current.derive_transitions(instance);
    current.objective = objective_value(instance, &current)?;
    let initial_objective = current.objective.total;
    let mut trace = Vec::new();
    let mut passes = 0;
    let mut truncated = false;

    'passes: while params.max_passes.map_or(true, |m| passes < m) {
        passes += 1;
        let pass_start = current.objective.total;
        for (from, to) in window_starts(horizon, params.window, params.stride) {
            let left = params.time_limit.saturating_sub(started.elapsed());
            if left.is_zero() {
                truncated = true;
                break 'passes;
            }
            let mut model = base.clone();
            fix_outside(&mut model, &current, (from, to));
            let start = schedule_point(instance, &model, &current);
            let controls = SolveControls {
                time_limit: left,
                ..SolveControls::with_gap(params.gap)
            };
            let out = solve_model(instance, sens, &model, params.mode, &controls, &params.separation, Some(&start))?;
            let mut accepted = false;
            if let Some(point) = &out.outcome.incumbent {
                let mut cand = read_back(instance, &model, point, &current, (from, to), passes);
                cand.objective = objective_value(instance, &cand)?;
                let old = current.objective.total;
                if cand.objective.total < old - ACCEPT_TOL * old.abs().max(1.0) {
                    current = cand;
                    accepted = true;
                }
            }
            info!(
                "rins pass={passes} window={from}..{to} accepted={accepted} objective={:.6}",
                current.objective.total
            );
            trace.push(TraceRow {
                pass: passes,
                window_start: from,
                window_end: to,
                accepted,
                objective: current.objective.total,
            });
            if started.elapsed() >= params.time_limit {
                truncated = to < horizon;
                break 'passes;
            }
        }
        let gain = (pass_start - current.objective.total) / pass_start.abs().max(1.0);
        if gain < PASS_IMPROVEMENT_TOL {
            break;
        }
    }
    Ok(RinsResult {
        schedule: current,
        initial_objective,
        trace,
        passes,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_for_a_day() {
        assert_eq!(window_starts(24, 12, 9), vec![(1, 12), (10, 21), (19, 24)]);
        assert_eq!(window_starts(12, 12, 9), vec![(1, 12)]);
        assert_eq!(window_starts(5, 2, 2), vec![(1, 2), (3, 4), (5, 5)]);
    }
}
