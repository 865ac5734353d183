//! Bundled MILP optimizer: bounded-variable primal simplex under a
//! best-bound branch-and-bound with an integer-solution callback.

mod bnb;
mod lu;
mod simplex;

use simplex::LpEngine;

use std::collections::HashMap;
use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::model::{Constraint, Domain, ModelSpec, Sense};

pub use bnb::solve_milp_with_start;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveControls {
    pub mip_gap: f64,
    pub time_limit: Duration,
    pub node_limit: Option<u64>,
    pub integer_feasibility_tol: f64,
    pub lp_pivot_tol: f64,
    /// neighborhood sub-searches around new incumbents
    pub rins_heuristic: bool,
}

impl Default for SolveControls {
    fn default() -> Self {
        SolveControls {
            mip_gap: 1e-4,
            time_limit: Duration::from_secs(3600),
            node_limit: None,
            integer_feasibility_tol: 1e-6,
            lp_pivot_tol: 1e-9,
            rins_heuristic: true,
        }
    }
}

impl SolveControls {
    pub fn with_gap(gap: f64) -> Self {
        SolveControls {
            mip_gap: gap,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        if !(self.mip_gap >= 0.0) {
            return Err(MilpError::Controls(format!("mip_gap must be >= 0, got {}", self.mip_gap)));
        }
        if self.time_limit.is_zero() {
            return Err(MilpError::Controls("time_limit must be positive".into()));
        }
        if !(self.integer_feasibility_tol > 0.0 && self.integer_feasibility_tol < 0.5) {
            return Err(MilpError::Controls("integer_feasibility_tol must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    OptimalWithinGap,
    FeasibleTimeLimit,
    Infeasible,
    Unbounded,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::OptimalWithinGap => "optimal",
            SolveStatus::FeasibleTimeLimit => "time_limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub nodes: u64,
    pub simplex_iterations: u64,
    pub cuts_added: usize,
    pub callback_calls: usize,
    pub wall_seconds: f64,
    /// global lower bound after each processed node
    pub bound_trace: Vec<f64>,
    /// objective of each accepted incumbent, in acceptance order
    pub incumbent_trace: Vec<f64>,
    /// number of constraints present when each incumbent was accepted
    pub incumbent_row_counts: Vec<usize>,
    pub max_depth: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub incumbent: Option<Vec<f64>>,
    pub objective: f64,
    pub best_bound: f64,
    pub stats: SolveStats,
}

impl SolveOutcome {
    pub fn has_incumbent(&self) -> bool {
        self.incumbent.is_some()
    }

    /// `(objective − best_bound) / max(1, |objective|)`, infinite without an incumbent.
    pub fn relative_gap(&self) -> f64 {
        if self.incumbent.is_none() {
            return f64::INFINITY;
        }
        ((self.objective - self.best_bound) / self.objective.abs().max(1.0)).max(0.0)
    }
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid solve controls: {0}")]
    Controls(String),
    #[error("variable {0} has an infinite bound")]
    InfiniteBound(usize),
    #[error("constraint references variable {index} but the model has {count}")]
    UnknownVariable { index: usize, count: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("integer-solution callback failed: {0}")]
    Callback(String),
}

/// Error a callback reports to abort the solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallbackError(pub String);

impl fmt::Display for CallbackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CallbackError {}

/// Solves a model with continuous domains. Binary domains are treated as `[0, 1]`.
pub fn solve_lp(model: &ModelSpec, controls: &SolveControls) -> Result<SolveOutcome, MilpError> {
    let mut relaxed = model.clone();
    relaxed.relax_integrality();
    solve_milp(&relaxed, controls, |_| Ok(Vec::new()))
}

/// Branch-and-bound over the binaries of `model`. Every integer-feasible
/// point is offered to `on_integer_solution`; a non-empty answer adds the
/// returned rows to the whole remaining search and the node is re-solved.
pub fn solve_milp<F>(model: &ModelSpec, controls: &SolveControls, on_integer_solution: F) -> Result<SolveOutcome, MilpError>
where
    F: FnMut(&[f64]) -> Result<Vec<Constraint>, CallbackError>,
{
    solve_milp_with_start(model, controls, None, on_integer_solution)
}

pub(crate) fn row_bounds(c: &Constraint) -> (f64, f64) {
    match c.sense {
        Sense::Le => (f64::NEG_INFINITY, c.rhs),
        Sense::Ge => (c.rhs, f64::INFINITY),
        Sense::Eq => (c.rhs, c.rhs),
    }
}

/// Loads model rows into `lp`. Sides implied by the column bounds are
/// dropped, rows left with no side are skipped, and rows with identical
/// terms are merged into one ranged row unless the ranges cross. Bounds only tighten during the
/// search, so a side implied at the root stays implied.
pub(crate) fn load_rows(lp: &mut LpEngine, constraints: &[Constraint], col_lo: &[f64], col_hi: &[f64]) {
    let mut pending: Vec<(&[(usize, f64)], f64, f64)> = Vec::with_capacity(constraints.len());
    let mut seen: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
    for c in constraints {
        let (mut lo, mut hi) = row_bounds(c);
        let (mut amin, mut amax) = (0.0, 0.0);
        for &(j, a) in &c.terms {
            if a > 0.0 {
                amin += a * col_lo[j];
                amax += a * col_hi[j];
            } else {
                amin += a * col_hi[j];
                amax += a * col_lo[j];
            }
        }
        if c.sense != Sense::Eq {
            if amax <= hi {
                hi = f64::INFINITY;
            }
            if amin >= lo {
                lo = f64::NEG_INFINITY;
            }
            if !lo.is_finite() && !hi.is_finite() {
                continue;
            }
        }
        let key: Vec<(usize, u64)> = c.terms.iter().map(|&(j, a)| (j, a.to_bits())).collect();
        match seen.get(&key) {
            Some(&k) if pending[k].1.max(lo) <= pending[k].2.min(hi) => {
                let row = &mut pending[k];
                row.1 = row.1.max(lo);
                row.2 = row.2.min(hi);
            }
            Some(_) => pending.push((&c.terms, lo, hi)),
            None => {
                seen.insert(key, pending.len());
                pending.push((&c.terms, lo, hi));
            }
        }
    }
    for (terms, lo, hi) in pending {
        lp.add_row(terms, lo, hi);
    }
}

pub(crate) fn check_model(model: &ModelSpec) -> Result<(), MilpError> {
    let count = model.num_variables();
    for (j, v) in model.variables.iter().enumerate() {
        if !v.lo.is_finite() || !v.hi.is_finite() {
            return Err(MilpError::InfiniteBound(j));
        }
        if v.domain != Domain::Continuous && (v.lo < 0.0 || v.hi > 1.0) {
            return Err(MilpError::Numerical(format!("variable {j} has bounds outside [0, 1]")));
        }
    }
    for c in &model.constraints {
        check_row(c, count)?;
    }
    Ok(())
}

pub(crate) fn check_row(c: &Constraint, count: usize) -> Result<(), MilpError> {
    for &(j, _) in &c.terms {
        if j >= count {
            return Err(MilpError::UnknownVariable { index: j, count });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintTag, VarKey, VarKind};

    fn var(m: &mut ModelSpec, k: usize, domain: Domain, lo: f64, hi: f64, cost: f64) -> usize {
        m.add_variable(VarKey::new(VarKind::Power, k, 1), domain, lo, hi, cost)
    }

    #[test]
    fn lp_examples() {
        let mut m = ModelSpec::new();
        let x = var(&mut m, 0, Domain::Continuous, 0.0, 10.0, -1.0);
        m.add_constraint(Constraint::new(ConstraintTag::Other, vec![(x, 1.0)], Sense::Le, 3.0));
        let out = solve_lp(&m, &SolveControls::default()).unwrap();
        assert_eq!(out.status, SolveStatus::OptimalWithinGap);
        assert!((out.objective + 3.0).abs() < 1e-9);

        // x + y = 3, x − y = 1 → (2, 1)
        let mut m = ModelSpec::new();
        let x = var(&mut m, 0, Domain::Continuous, -10.0, 10.0, 1.0);
        let y = var(&mut m, 1, Domain::Continuous, -10.0, 10.0, 1.0);
        m.add_constraint(Constraint::new(ConstraintTag::Other, vec![(x, 1.0), (y, 1.0)], Sense::Eq, 3.0));
        m.add_constraint(Constraint::new(ConstraintTag::Other, vec![(x, 1.0), (y, -1.0)], Sense::Eq, 1.0));
        let out = solve_lp(&m, &SolveControls::default()).unwrap();
        let sol = out.incumbent.unwrap();
        assert!((sol[x] - 2.0).abs() < 1e-9 && (sol[y] - 1.0).abs() < 1e-9);

        let mut m = ModelSpec::new();
        let x = var(&mut m, 0, Domain::Continuous, 0.0, 10.0, 1.0);
        m.add_constraint(Constraint::new(ConstraintTag::Other, vec![(x, 1.0)], Sense::Le, 1.0));
        m.add_constraint(Constraint::new(ConstraintTag::Other, vec![(x, 1.0)], Sense::Ge, 2.0));
        let out = solve_lp(&m, &SolveControls::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
        assert!(out.incumbent.is_none());
    }

    #[test]
    fn continuous_model_calls_back_once() {
        let mut m = ModelSpec::new();
        let x = var(&mut m, 0, Domain::Continuous, 0.0, 4.0, -2.0);
        m.add_constraint(Constraint::new(ConstraintTag::Other, vec![(x, 2.0)], Sense::Le, 5.0));
        let mut calls = 0;
        let out = solve_milp(&m, &SolveControls::default(), |_| {
            calls += 1;
            Ok(Vec::new())
        })
        .unwrap();
        assert_eq!(calls, 1);
        assert!((out.objective + 5.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack_needs_branching() {
        // 0/1 knapsack checked against enumeration
        let mut m = ModelSpec::new();
        let w = [2.0, 3.0, 1.0, 4.0];
        let v = [5.0, 4.0, 3.0, 6.0];
        let idx: Vec<usize> = (0..4).map(|k| var(&mut m, k, Domain::Binary, 0.0, 1.0, -v[k])).collect();
        m.add_constraint(Constraint::new(
            ConstraintTag::Other,
            idx.iter().map(|&j| (j, w[j])).collect(),
            Sense::Le,
            6.0,
        ));
        let mut best = 0.0f64;
        for mask in 0..16u32 {
            let (mut wt, mut val) = (0.0, 0.0);
            for k in 0..4 {
                if mask >> k & 1 == 1 {
                    wt += w[k];
                    val += v[k];
                }
            }
            if wt <= 6.0 {
                best = best.max(val);
            }
        }
        let out = solve_milp(&m, &SolveControls::with_gap(0.0), |_| Ok(Vec::new())).unwrap();
        assert_eq!(out.status, SolveStatus::OptimalWithinGap);
        assert!((out.objective + best).abs() < 1e-9);
    }

    #[test]
    fn rejecting_callback_makes_model_infeasible() {
        let mut m = ModelSpec::new();
        let a = var(&mut m, 0, Domain::Binary, 0.0, 1.0, 1.0);
        let b = var(&mut m, 1, Domain::Binary, 0.0, 1.0, 1.0);
        m.add_constraint(Constraint::new(ConstraintTag::Other, vec![(a, 1.0), (b, 1.0)], Sense::Ge, 1.0));
        let out = solve_milp(&m, &SolveControls::default(), |_| {
            // a + b ≤ 0 removes every point with a + b ≥ 1
            Ok(vec![Constraint::new(ConstraintTag::Other, vec![(a, 1.0), (b, 1.0)], Sense::Le, 0.0)])
        })
        .unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
        assert!(out.incumbent.is_none());
    }
}
