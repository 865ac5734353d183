//! Full-constraint feasibility check of a schedule, recomputed from the raw
//! instance data and line sensitivities only.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::instance::Instance;
use crate::network::{dot, FlowCase, SensitivitySet};
use crate::schedule::Schedule;

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("schedule dimension mismatch: {0}")]
    Dimension(String),
    #[error("reference objective must be positive, got {0}")]
    NonPositiveReference(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// distance of x/z/w from {0, 1}
    pub binary: f64,
    /// absolute residual on logic and minimum up/down rows
    pub logic: f64,
    /// MW residual on balance, ramp and production limits
    pub mw: f64,
    /// relative excess on line limits
    pub flow_relative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            binary: 1e-6,
            logic: 1e-6,
            mw: 1e-4,
            flow_relative: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Integrality,
    InitialStatus,
    Logic,
    MinUpdown,
    ProdLimits,
    Ramp,
    Balance,
    Security,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub family: Family,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bus: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<String>,
    /// one-based period
    pub period: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contingency: Option<String>,
    pub magnitude: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub feasible: bool,
    pub violation_count: usize,
    pub violations: Vec<Finding>,
    pub security_rows_checked: u64,
    pub max_flow_ratio: f64,
    pub tolerances: Tolerances,
}

impl ValidationReport {
    pub fn families(&self) -> std::collections::BTreeSet<Family> {
        self.violations.iter().map(|f| f.family).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Ctx<'a> {
    instance: &'a Instance,
    out: Vec<Finding>,
}

impl Ctx<'_> {
    fn gen(&mut self, family: Family, g: usize, t: usize, magnitude: f64, detail: String) {
        self.out.push(Finding {
            family,
            generator: Some(self.instance.generators[g].id.clone()),
            bus: None,
            line: None,
            period: t + 1,
            contingency: None,
            magnitude,
            detail,
        });
    }
}

fn check_dims(instance: &Instance, s: &Schedule) -> Result<(), ValidateError> {
    let (g, b, t) = (instance.num_generators(), instance.num_buses(), instance.horizon);
    let ok = |m: &Vec<Vec<f64>>, rows: usize| m.len() == rows && m.iter().all(|r| r.len() == t);
    if !(ok(&s.x, g) && ok(&s.z, g) && ok(&s.w, g) && ok(&s.p, g)) {
        return Err(ValidateError::Dimension(format!("generator series must be {g} x {t}")));
    }
    if !ok(&s.curtail, b) {
        return Err(ValidateError::Dimension(format!("curtailment must be {b} x {t}")));
    }
    Ok(())
}

/// Checks every constraint family over the whole horizon, including every
/// line-limit row for the base case and each contingency.
pub fn check_schedule(
    instance: &Instance,
    sens: &SensitivitySet,
    schedule: &Schedule,
    tol: &Tolerances,
) -> Result<ValidationReport, ValidateError> {
    check_dims(instance, schedule)?;
    let horizon = instance.horizon;
    let mut cx = Ctx {
        instance,
        out: Vec::new(),
    };
    let s = schedule;

    for (g, gen) in instance.generators.iter().enumerate() {
        for t in 0..horizon {
            for (name, v) in [("x", s.x[g][t]), ("z", s.z[g][t]), ("w", s.w[g][t])] {
                let dist = (v - v.round()).abs().max((-v).max(0.0)).max((v - 1.0).max(0.0));
                if dist > tol.binary {
                    cx.gen(Family::Integrality, g, t, dist, format!("{name} = {v}"));
                }
            }
        }

        let x0 = if gen.init_on { 1.0 } else { 0.0 };
        let (pinned, value) = if gen.init_on {
            (gen.init_min_up_remaining as usize, 1.0)
        } else {
            (gen.init_min_down_remaining as usize, 0.0)
        };
        for t in 0..pinned.min(horizon) {
            let r = (s.x[g][t] - value).abs();
            if r > tol.logic {
                cx.gen(Family::InitialStatus, g, t, r, format!("x must stay {value} from the initial state"));
            }
        }

        for t in 0..horizon {
            let prev = if t == 0 { x0 } else { s.x[g][t - 1] };
            let r = (s.x[g][t] - prev - s.z[g][t] + s.w[g][t]).abs();
            if r > tol.logic {
                cx.gen(Family::Logic, g, t, r, "x_t - x_{t-1} != z_t - w_t".into());
            }
            let r = s.z[g][t] + s.w[g][t] - 1.0;
            if r > tol.logic {
                cx.gen(Family::Logic, g, t, r, "z_t + w_t > 1".into());
            }

            let from = (t + 1).saturating_sub(gen.min_up as usize);
            let starts: f64 = s.z[g][from..=t].iter().sum();
            let r = starts - s.x[g][t];
            if r > tol.logic {
                cx.gen(Family::MinUpdown, g, t, r, format!("start-up within the last {} periods but off", gen.min_up));
            }
            let from = (t + 1).saturating_sub(gen.min_down as usize);
            let stops: f64 = s.w[g][from..=t].iter().sum();
            let r = stops - (1.0 - s.x[g][t]);
            if r > tol.logic {
                cx.gen(Family::MinUpdown, g, t, r, format!("shut-down within the last {} periods but on", gen.min_down));
            }

            let (x, p) = (s.x[g][t], s.p[g][t]);
            let r = gen.p_min * x - p;
            if r > tol.mw {
                cx.gen(Family::ProdLimits, g, t, r, format!("p = {p} below p_min * x"));
            }
            let r = p - gen.p_max * x;
            if r > tol.mw {
                cx.gen(Family::ProdLimits, g, t, r, format!("p = {p} above p_max * x"));
            }

            let (p_prev, x_prev) = if t == 0 { (gen.init_power, x0) } else { (s.p[g][t - 1], s.x[g][t - 1]) };
            let r = p - p_prev - gen.ramp_up * x_prev - gen.startup_cap * s.z[g][t];
            if r > tol.mw {
                cx.gen(Family::Ramp, g, t, r, "ramp-up limit exceeded".into());
            }
            let r = p_prev - p - gen.ramp_down * x - gen.shutdown_cap * s.w[g][t];
            if r > tol.mw {
                cx.gen(Family::Ramp, g, t, r, "ramp-down limit exceeded".into());
            }
        }
    }

    for t in 0..horizon {
        let supply: f64 = s.p.iter().map(|row| row[t]).sum();
        let served: f64 = (0..instance.num_buses())
            .map(|b| instance.demand[b][t] - s.curtail[b][t])
            .sum();
        let r = (supply - served).abs();
        if r > tol.mw {
            cx.out.push(Finding {
                family: Family::Balance,
                generator: None,
                bus: None,
                line: None,
                period: t + 1,
                contingency: None,
                magnitude: r,
                detail: format!("generation {supply} vs served load {served}"),
            });
        }
        for b in 0..instance.num_buses() {
            let c = s.curtail[b][t];
            let r = (-c).max(c - instance.demand[b][t]);
            if r > tol.mw {
                cx.out.push(Finding {
                    family: Family::Balance,
                    generator: None,
                    bus: Some(instance.buses[b].id.clone()),
                    line: None,
                    period: t + 1,
                    contingency: None,
                    magnitude: r,
                    detail: format!("curtailment {c} outside [0, demand]"),
                });
            }
        }
    }

    let (security, rows, ratio) = check_security(instance, sens, s, tol);
    cx.out.extend(security);
    let violations = cx.out;
    Ok(ValidationReport {
        feasible: violations.is_empty(),
        violation_count: violations.len(),
        violations,
        security_rows_checked: rows,
        max_flow_ratio: ratio,
        tolerances: *tol,
    })
}

fn check_security(instance: &Instance, sens: &SensitivitySet, s: &Schedule, tol: &Tolerances) -> (Vec<Finding>, u64, f64) {
    let horizon = instance.horizon;
    let injections: Vec<Vec<f64>> = (0..horizon)
        .map(|t| {
            (0..instance.num_buses())
                .map(|b| {
                    let gen: f64 = instance.generators_at(b).iter().map(|&g| s.p[g][t]).sum();
                    gen - instance.demand[b][t] + s.curtail[b][t]
                })
                .collect()
        })
        .collect();
    let cases: Vec<FlowCase> = std::iter::once(FlowCase::Base)
        .chain((0..instance.num_contingencies()).map(FlowCase::Contingency))
        .collect();
    let blocks: Vec<(usize, usize)> = (0..horizon).flat_map(|t| (0..cases.len()).map(move |c| (t, c))).collect();
    let results: Vec<(Vec<Finding>, f64)> = blocks
        .par_iter()
        .map(|&(t, ci)| {
            let case = cases[ci];
            let mut found = Vec::new();
            let mut worst = 0.0f64;
            for l in 0..instance.num_lines() {
                let Some(row) = sens.row(l, case) else { continue };
                let flow = dot(row, &injections[t]);
                let limit = match case {
                    FlowCase::Base => instance.lines[l].limit_base,
                    FlowCase::Contingency(c) => instance.contingency_limit(c, l),
                };
                worst = worst.max(flow.abs() / limit);
                let excess = flow.abs() - limit;
                if excess > tol.flow_relative * limit {
                    found.push(Finding {
                        family: Family::Security,
                        generator: None,
                        bus: None,
                        line: Some(instance.lines[l].id.clone()),
                        period: t + 1,
                        contingency: match case {
                            FlowCase::Base => None,
                            FlowCase::Contingency(c) => Some(instance.contingencies[c].id.clone()),
                        },
                        magnitude: excess,
                        detail: format!("flow {flow} exceeds limit {limit}"),
                    });
                }
            }
            (found, worst)
        })
        .collect();
    let rows = (horizon * cases.len() * instance.num_lines() * 2) as u64;
    let mut findings = Vec::new();
    let mut worst = 0.0f64;
    for (f, w) in results {
        findings.extend(f);
        worst = worst.max(w);
    }
    (findings, rows, worst)
}

/// `(objective − reference) / reference`.
pub fn gap_report(objective: f64, reference: f64) -> Result<f64, ValidateError> {
    if !(reference > 0.0) {
        return Err(ValidateError::NonPositiveReference(reference));
    }
    Ok((objective - reference) / reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_examples() {
        let g = gap_report(1.587, 1.575).unwrap();
        assert_eq!(format!("{:.2}%", g * 100.0), "0.76%");
        assert_eq!(gap_report(2.0, 2.0).unwrap(), 0.0);
        let g = gap_report(1.444, 1.418).unwrap();
        assert_eq!(format!("{:.2}%", g * 100.0), "1.83%");
        assert!(gap_report(1.0, 0.0).is_err());
    }
}
