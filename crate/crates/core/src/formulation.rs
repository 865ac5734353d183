//! Builds the commitment model over a contiguous block of periods.
//!
//! The same builder serves the full-horizon problem and every windowed
//! subproblem: the block starts at `first_period` with boundary state
//! `theta`, the first `integer_prefix` periods keep binary x/z/w and the
//! remaining periods relax them to `[0, 1]`.
//!
//! Production cost uses the segment representation
//! `p = p_min·x + Σ_k seg_k`, `0 ≤ seg_k ≤ width_k·x`.

use thiserror::Error;

use crate::instance::{Generator, Instance};
use crate::model::{Constraint, ConstraintTag, Domain, ModelSpec, Sense, VarKey, VarKind};
use crate::network::{FlowCase, SensitivitySet};
use crate::schedule::{ObjectiveBreakdown, Schedule};
use crate::separation::{CutDirection, SecurityCutId};

const POWER_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("boundary state has {got} units, instance has {expected} generators")]
    ThetaMismatch { expected: usize, got: usize },
    #[error("boundary state for generator {0} is inconsistent: {1}")]
    ThetaInvalid(usize, String),
    #[error("integer prefix {integer_prefix} exceeds horizon {horizon}")]
    PrefixTooLong { integer_prefix: usize, horizon: usize },
    #[error("periods {first}..={last} fall outside the instance horizon 1..={horizon}")]
    PeriodRange {
        first: usize,
        last: usize,
        horizon: usize,
    },
    #[error("power {power} MW outside [{lo}, {hi}] for generator `{generator}`")]
    PowerOutOfBounds {
        generator: String,
        power: f64,
        lo: f64,
        hi: f64,
    },
    #[error("security row requested for period {period} outside the model")]
    CutOutsideModel { period: usize },
    #[error(transparent)]
    Schedule(#[from] crate::schedule::ScheduleError),
}

/// How line-limit rows of the security block enter a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecurityMode {
    /// every (line, period, case) row up front
    Enumerate,
    /// none up front; rows arrive as cuts
    Lazy,
}

/// Initial condition of one generator at a block boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitState {
    pub on: bool,
    /// periods the unit must still stay on
    pub up_remaining: u32,
    /// periods the unit must still stay off
    pub down_remaining: u32,
    pub power: f64,
    /// consecutive on-periods ending at the boundary
    pub cum_up: u32,
    /// consecutive off-periods ending at the boundary
    pub cum_down: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryState {
    pub units: Vec<UnitState>,
}

impl BoundaryState {
    /// State at the start of the horizon, from the instance data. Run
    /// lengths are reconstructed as the part of the minimum time already
    /// served.
    pub fn initial(instance: &Instance) -> Self {
        let units = instance
            .generators
            .iter()
            .map(|g| {
                if g.init_on {
                    UnitState {
                        on: true,
                        up_remaining: g.init_min_up_remaining,
                        down_remaining: 0,
                        power: g.init_power,
                        cum_up: g.min_up.saturating_sub(g.init_min_up_remaining),
                        cum_down: 0,
                    }
                } else {
                    UnitState {
                        on: false,
                        up_remaining: 0,
                        down_remaining: g.init_min_down_remaining,
                        power: 0.0,
                        cum_up: 0,
                        cum_down: g.min_down.saturating_sub(g.init_min_down_remaining),
                    }
                }
            })
            .collect();
        BoundaryState { units }
    }

    pub fn validate(&self, instance: &Instance) -> Result<(), FormulationError> {
        if self.units.len() != instance.num_generators() {
            return Err(FormulationError::ThetaMismatch {
                expected: instance.num_generators(),
                got: self.units.len(),
            });
        }
        for (g, u) in self.units.iter().enumerate() {
            if u.up_remaining > 0 && !u.on {
                return Err(FormulationError::ThetaInvalid(g, "up time remaining while off".into()));
            }
            if u.down_remaining > 0 && u.on {
                return Err(FormulationError::ThetaInvalid(g, "down time remaining while on".into()));
            }
            if u.cum_up > 0 && u.cum_down > 0 {
                return Err(FormulationError::ThetaInvalid(g, "both run counters positive".into()));
            }
            if !u.on && u.power != 0.0 {
                return Err(FormulationError::ThetaInvalid(g, "off with nonzero power".into()));
            }
        }
        Ok(())
    }
}

/// Builds the model over global periods `first_period ..= first_period + horizon - 1`.
pub fn build_model(
    instance: &Instance,
    sens: &SensitivitySet,
    first_period: usize,
    horizon: usize,
    theta: &BoundaryState,
    integer_prefix: usize,
    security: SecurityMode,
) -> Result<ModelSpec, FormulationError> {
    theta.validate(instance)?;
    let last = first_period + horizon - 1;
    if horizon == 0 || first_period == 0 || last > instance.horizon {
        return Err(FormulationError::PeriodRange {
            first: first_period,
            last,
            horizon: instance.horizon,
        });
    }
    if integer_prefix > horizon {
        return Err(FormulationError::PrefixTooLong {
            integer_prefix,
            horizon,
        });
    }
    let periods = first_period..=last;
    let integer_last = first_period + integer_prefix - 1;

    let mut m = ModelSpec::new();
    m.first_period = first_period;
    m.last_period = last;
    m.integer_last_period = integer_last;

    for (g, gen) in instance.generators.iter().enumerate() {
        m.add_variable(
            VarKey::new(VarKind::InitialPower, g, first_period - 1),
            Domain::Continuous,
            0.0,
            gen.p_max.max(theta.units[g].power),
            0.0,
        );
        for t in periods.clone() {
            let domain = if t <= integer_last {
                Domain::Binary
            } else {
                Domain::UnitInterval
            };
            m.add_variable(
                VarKey::new(VarKind::Commit, g, t),
                domain,
                0.0,
                1.0,
                gen.cost_noload + gen.cost_at_min,
            );
            m.add_variable(VarKey::new(VarKind::Startup, g, t), domain, 0.0, 1.0, gen.cost_startup);
            m.add_variable(VarKey::new(VarKind::Shutdown, g, t), domain, 0.0, 1.0, 0.0);
            m.add_variable(VarKey::new(VarKind::Power, g, t), Domain::Continuous, 0.0, gen.p_max, 0.0);
            for (k, seg) in gen.cost_segments.iter().enumerate() {
                m.add_variable(
                    VarKey::segment(g, t, k),
                    Domain::Continuous,
                    0.0,
                    seg.width,
                    seg.marginal_cost,
                );
            }
        }
    }
    for b in 0..instance.num_buses() {
        for t in periods.clone() {
            m.add_variable(
                VarKey::new(VarKind::Curtail, b, t),
                Domain::Continuous,
                0.0,
                instance.demand_at(b, t - 1),
                instance.curtail_penalty,
            );
        }
    }

    let v = |m: &ModelSpec, kind, owner, t| m.var(&VarKey::new(kind, owner, t)).expect("variable");

    for (g, gen) in instance.generators.iter().enumerate() {
        let state = theta.units[g];
        let x0 = if state.on { 1.0 } else { 0.0 };
        let p0 = v(&m, VarKind::InitialPower, g, first_period - 1);
        m.add_constraint(Constraint::new(
            ConstraintTag::InitPower,
            vec![(p0, 1.0)],
            Sense::Eq,
            state.power,
        ));

        let (pinned, value) = if state.on {
            (state.up_remaining as usize, 1.0)
        } else {
            (state.down_remaining as usize, 0.0)
        };
        for t in first_period..first_period + pinned.min(horizon) {
            m.add_constraint(Constraint::new(
                ConstraintTag::InitialStatus,
                vec![(v(&m, VarKind::Commit, g, t), 1.0)],
                Sense::Eq,
                value,
            ));
        }

        for t in periods.clone() {
            let x = v(&m, VarKind::Commit, g, t);
            let z = v(&m, VarKind::Startup, g, t);
            let w = v(&m, VarKind::Shutdown, g, t);
            let p = v(&m, VarKind::Power, g, t);
            let first = t == first_period;

            // x_t - x_{t-1} = z_t - w_t
            let mut terms = vec![(x, 1.0), (z, -1.0), (w, 1.0)];
            let rhs = if first {
                x0
            } else {
                terms.push((v(&m, VarKind::Commit, g, t - 1), -1.0));
                0.0
            };
            m.add_constraint(Constraint::new(ConstraintTag::Logic, terms, Sense::Eq, rhs));
            m.add_constraint(Constraint::new(
                ConstraintTag::Logic,
                vec![(z, 1.0), (w, 1.0)],
                Sense::Le,
                1.0,
            ));

            let up_from = first_period.max((t + 1).saturating_sub(gen.min_up as usize));
            let mut terms: Vec<(usize, f64)> = (up_from..=t)
                .map(|tau| (v(&m, VarKind::Startup, g, tau), 1.0))
                .collect();
            terms.push((x, -1.0));
            m.add_constraint(Constraint::new(ConstraintTag::MinUpDown, terms, Sense::Le, 0.0));
            let down_from = first_period.max((t + 1).saturating_sub(gen.min_down as usize));
            let mut terms: Vec<(usize, f64)> = (down_from..=t)
                .map(|tau| (v(&m, VarKind::Shutdown, g, tau), 1.0))
                .collect();
            terms.push((x, 1.0));
            m.add_constraint(Constraint::new(ConstraintTag::MinUpDown, terms, Sense::Le, 1.0));

            let mut terms = vec![(p, 1.0), (x, -gen.p_min)];
            for k in 0..gen.cost_segments.len() {
                terms.push((m.var(&VarKey::segment(g, t, k)).expect("segment"), -1.0));
            }
            m.add_constraint(Constraint::new(ConstraintTag::ProdLimits, terms, Sense::Eq, 0.0));
            for (k, seg) in gen.cost_segments.iter().enumerate() {
                let s = m.var(&VarKey::segment(g, t, k)).expect("segment");
                m.add_constraint(Constraint::new(
                    ConstraintTag::ProdLimits,
                    vec![(s, 1.0), (x, -seg.width)],
                    Sense::Le,
                    0.0,
                ));
            }

            let p_prev = if first { p0 } else { v(&m, VarKind::Power, g, t - 1) };
            // p_t - p_{t-1} <= RU x_{t-1} + SU z_t
            let mut terms = vec![(p, 1.0), (p_prev, -1.0), (z, -gen.startup_cap)];
            let rhs = if first {
                gen.ramp_up * x0
            } else {
                terms.push((v(&m, VarKind::Commit, g, t - 1), -gen.ramp_up));
                0.0
            };
            m.add_constraint(Constraint::new(ConstraintTag::Ramp, terms, Sense::Le, rhs));
            // p_{t-1} - p_t <= RD x_t + SD w_t
            m.add_constraint(Constraint::new(
                ConstraintTag::Ramp,
                vec![(p_prev, 1.0), (p, -1.0), (x, -gen.ramp_down), (w, -gen.shutdown_cap)],
                Sense::Le,
                0.0,
            ));
        }
    }

    for t in periods.clone() {
        let mut terms: Vec<(usize, f64)> = (0..instance.num_generators())
            .map(|g| (v(&m, VarKind::Power, g, t), 1.0))
            .collect();
        terms.extend((0..instance.num_buses()).map(|b| (v(&m, VarKind::Curtail, b, t), 1.0)));
        m.add_constraint(Constraint::new(
            ConstraintTag::Balance,
            terms,
            Sense::Eq,
            instance.total_demand(t - 1),
        ));
    }

    if security == SecurityMode::Enumerate {
        for id in all_security_ids(instance, first_period, last) {
            let row = security_constraint(instance, sens, &m, id)?;
            m.add_constraint(row);
        }
    }
    Ok(m)
}

/// Every security row id over the given periods: lines × periods × ({base} ∪ C) × {upper, lower}.
pub fn all_security_ids(instance: &Instance, first: usize, last: usize) -> Vec<SecurityCutId> {
    let cases: Vec<FlowCase> = std::iter::once(FlowCase::Base)
        .chain((0..instance.num_contingencies()).map(FlowCase::Contingency))
        .collect();
    let mut ids = Vec::new();
    for period in first..=last {
        for &case in &cases {
            for line in 0..instance.num_lines() {
                for direction in [CutDirection::Upper, CutDirection::Lower] {
                    ids.push(SecurityCutId {
                        period,
                        case,
                        line,
                        direction,
                    });
                }
            }
        }
    }
    ids
}

/// Thermal limit applying to a security row.
pub fn security_limit(instance: &Instance, line: usize, case: FlowCase) -> f64 {
    match case {
        FlowCase::Base => instance.lines[line].limit_base,
        FlowCase::Contingency(c) => instance.contingency_limit(c, line),
    }
}

/// The line-limit row for `id`, expressed over the model's p and curtail variables:
/// `Σ_b δ_lb^c (Σ_{g∈G_b} p_gt − D_bt + curtail_bt)` bounded by `±F_l^c`.
/// The outaged line of a contingency carries no flow and yields an empty row.
pub fn security_constraint(
    instance: &Instance,
    sens: &SensitivitySet,
    model: &ModelSpec,
    id: SecurityCutId,
) -> Result<Constraint, FormulationError> {
    let t = id.period;
    if t < model.first_period || t > model.last_period {
        return Err(FormulationError::CutOutsideModel { period: t });
    }
    let limit = security_limit(instance, id.line, id.case);
    let mut terms = Vec::new();
    let mut demand_flow = 0.0;
    if let Some(row) = sens.row(id.line, id.case) {
        for (b, &delta) in row.iter().enumerate() {
            if delta == 0.0 {
                continue;
            }
            for &g in instance.generators_at(b) {
                terms.push((model.var(&VarKey::new(VarKind::Power, g, t)).expect("p"), delta));
            }
            let d = instance.demand_at(b, t - 1);
            if d > 0.0 {
                terms.push((model.var(&VarKey::new(VarKind::Curtail, b, t)).expect("curtail"), delta));
                demand_flow += delta * d;
            }
        }
    }
    let (sense, rhs) = match id.direction {
        CutDirection::Upper => (Sense::Le, limit + demand_flow),
        CutDirection::Lower => (Sense::Ge, -limit + demand_flow),
    };
    Ok(Constraint {
        tag: ConstraintTag::Security,
        cut: Some(id),
        terms,
        sense,
        rhs,
    })
}

/// Splits output above `commit·p_min` over the cost segments in order.
/// Under non-decreasing marginal costs this greedy fill is the cheapest split.
pub fn segment_fill(gen: &Generator, commit: f64, power: f64) -> Vec<f64> {
    let mut rest = (power - gen.p_min * commit).max(0.0);
    gen.cost_segments
        .iter()
        .map(|s| {
            let cap = s.width * commit;
            let take = rest.min(cap);
            rest -= take;
            take
        })
        .collect()
}

/// C^P for one period: `commit·cost_at_min + Σ_k marginal_k·seg_k`.
pub fn production_cost(gen: &Generator, commit: bool, power: f64) -> Result<f64, FormulationError> {
    let (lo, hi) = if commit { (gen.p_min, gen.p_max) } else { (0.0, 0.0) };
    if power < lo - POWER_TOL || power > hi + POWER_TOL {
        return Err(FormulationError::PowerOutOfBounds {
            generator: gen.id.clone(),
            power,
            lo,
            hi,
        });
    }
    if !commit {
        return Ok(0.0);
    }
    Ok(production_cost_relaxed(gen, 1.0, power.clamp(lo, hi)))
}

fn production_cost_relaxed(gen: &Generator, commit: f64, power: f64) -> f64 {
    let fill = segment_fill(gen, commit, power);
    commit * gen.cost_at_min
        + gen
            .cost_segments
            .iter()
            .zip(&fill)
            .map(|(s, q)| s.marginal_cost * q)
            .sum::<f64>()
}

/// Objective of a full-horizon schedule, including the curtailment penalty.
pub fn objective_value(instance: &Instance, schedule: &Schedule) -> Result<ObjectiveBreakdown, FormulationError> {
    schedule.check_dimensions(instance)?;
    let mut out = ObjectiveBreakdown::default();
    for (g, gen) in instance.generators.iter().enumerate() {
        for t in 0..instance.horizon {
            let x = schedule.x[g][t];
            out.production += production_cost_relaxed(gen, x, schedule.p[g][t]);
            out.startup += gen.cost_startup * schedule.z[g][t];
            out.noload += gen.cost_noload * x;
        }
    }
    out.curtailment = instance.curtail_penalty * schedule.curtail.iter().flatten().sum::<f64>();
    out.total = out.production + out.startup + out.noload + out.curtailment;
    Ok(out)
}

/// Maps a full-horizon schedule onto the variables of a model covering
/// the same periods (segments filled greedily).
pub fn schedule_point(instance: &Instance, model: &ModelSpec, schedule: &Schedule) -> Vec<f64> {
    let mut x = vec![0.0; model.num_variables()];
    for (j, var) in model.variables.iter().enumerate() {
        let key = var.key;
        let (o, t) = (key.owner, key.period);
        x[j] = match key.kind {
            VarKind::Commit => schedule.x[o][t - 1],
            VarKind::Startup => schedule.z[o][t - 1],
            VarKind::Shutdown => schedule.w[o][t - 1],
            VarKind::Power => schedule.p[o][t - 1],
            VarKind::Curtail => schedule.curtail[o][t - 1],
            VarKind::Segment => {
                let gen = &instance.generators[o];
                segment_fill(gen, schedule.x[o][t - 1], schedule.p[o][t - 1])[key.segment]
            }
            VarKind::InitialPower => {
                if t == 0 {
                    instance.generators[o].init_power
                } else {
                    schedule.p[o][t - 1]
                }
            }
        };
    }
    x
}
