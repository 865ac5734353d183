//! Solver-agnostic MILP description shared by the formulation builder, the
//! bundled optimizer and the separation routines.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use crate::instance::Instance;
use crate::network::FlowCase;
use crate::separation::{CutDirection, SecurityCutId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    /// x: commitment
    Commit,
    /// z: start-up
    Startup,
    /// w: shut-down
    Shutdown,
    /// p: dispatch
    Power,
    /// output above p_min on one cost segment
    Segment,
    /// load curtailment at a bus
    Curtail,
    /// p_g0, pinned to the boundary state's initial production
    InitialPower,
}

impl VarKind {
    pub fn symbol(self) -> &'static str {
        match self {
            VarKind::Commit => "x",
            VarKind::Startup => "z",
            VarKind::Shutdown => "w",
            VarKind::Power => "p",
            VarKind::Segment => "seg",
            VarKind::Curtail => "curtail",
            VarKind::InitialPower => "p0",
        }
    }

    fn owned_by_bus(self) -> bool {
        matches!(self, VarKind::Curtail)
    }
}

/// Structured variable name. `owner` is a generator index, or a bus index
/// for curtailment; `period` is the global one-based period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarKey {
    pub kind: VarKind,
    pub owner: usize,
    pub period: usize,
    pub segment: usize,
}

impl VarKey {
    pub fn new(kind: VarKind, owner: usize, period: usize) -> Self {
        VarKey {
            kind,
            owner,
            period,
            segment: 0,
        }
    }

    pub fn segment(owner: usize, period: usize, segment: usize) -> Self {
        VarKey {
            kind: VarKind::Segment,
            owner,
            period,
            segment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Binary,
    UnitInterval,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableDef {
    pub key: VarKey,
    pub domain: Domain,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintTag {
    InitialStatus,
    Logic,
    MinUpDown,
    InitPower,
    ProdLimits,
    Ramp,
    Balance,
    Security,
    /// rows produced outside the UC formulation (tests, generic models)
    Other,
}

impl ConstraintTag {
    pub fn name(self) -> &'static str {
        match self {
            ConstraintTag::InitialStatus => "initial_status",
            ConstraintTag::Logic => "logic",
            ConstraintTag::MinUpDown => "min_updown",
            ConstraintTag::InitPower => "init_power",
            ConstraintTag::ProdLimits => "prod_limits",
            ConstraintTag::Ramp => "ramp",
            ConstraintTag::Balance => "balance",
            ConstraintTag::Security => "security",
            ConstraintTag::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub tag: ConstraintTag,
    pub cut: Option<SecurityCutId>,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(tag: ConstraintTag, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Constraint {
            tag,
            cut: None,
            terms,
            sense,
            rhs,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A linear model: variables with domains and bounds, linear rows and a
/// linear objective (plus a constant offset).
#[derive(Debug, Clone, Default)]
pub struct ModelSpec {
    pub variables: Vec<VariableDef>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    /// First global period covered (one-based).
    pub first_period: usize,
    /// Last global period covered.
    pub last_period: usize,
    /// Last global period whose x/z/w are binary.
    pub integer_last_period: usize,
    index: HashMap<VarKey, usize>,
}

impl ModelSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, key: VarKey, domain: Domain, lo: f64, hi: f64, cost: f64) -> usize {
        let j = self.variables.len();
        let prev = self.index.insert(key, j);
        debug_assert!(prev.is_none(), "duplicate variable {key:?}");
        self.variables.push(VariableDef { key, domain, lo, hi });
        self.objective.push(cost);
        j
    }

    pub fn add_constraint(&mut self, c: Constraint) -> usize {
        self.constraints.push(c);
        self.constraints.len() - 1
    }

    pub fn var(&self, key: &VarKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_binary(&self, j: usize) -> bool {
        self.variables[j].domain == Domain::Binary
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.domain == Domain::Binary).count()
    }

    pub fn evaluate_objective(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn count_tag(&self, tag: ConstraintTag) -> usize {
        self.constraints.iter().filter(|c| c.tag == tag).count()
    }

    pub fn has_tag(&self, tag: ConstraintTag) -> bool {
        self.constraints.iter().any(|c| c.tag == tag)
    }

    /// Pins variable `j` to `value`.
    pub fn fix_variable(&mut self, j: usize, value: f64) {
        self.variables[j].lo = value;
        self.variables[j].hi = value;
    }

    /// Turns every binary into a unit-interval continuous variable.
    pub fn relax_integrality(&mut self) {
        for v in &mut self.variables {
            if v.domain == Domain::Binary {
                v.domain = Domain::UnitInterval;
            }
        }
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xv)| (v.lo - xv).max(xv - v.hi).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    pub fn variable_name(&self, j: usize, instance: Option<&Instance>) -> String {
        let key = self.variables[j].key;
        let owner = match instance {
            Some(inst) if key.kind.owned_by_bus() => inst.buses[key.owner].id.clone(),
            Some(inst) if key.owner < inst.num_generators() => inst.generators[key.owner].id.clone(),
            _ => key.owner.to_string(),
        };
        match key.kind {
            VarKind::Segment => format!("seg[{},{},{}]", owner, key.period, key.segment),
            VarKind::InitialPower => format!("p0[{owner}]"),
            kind => format!("{}[{},{}]", kind.symbol(), owner, key.period),
        }
    }

    pub fn constraint_name(&self, i: usize, instance: Option<&Instance>) -> String {
        let c = &self.constraints[i];
        match (&c.cut, instance) {
            (Some(id), Some(inst)) => {
                let dir = match id.direction {
                    CutDirection::Upper => "flow_ub",
                    CutDirection::Lower => "flow_lb",
                };
                let case = match id.case {
                    FlowCase::Base => "base".to_string(),
                    FlowCase::Contingency(k) => inst.contingencies[k].id.clone(),
                };
                format!("{}[{},{},{}]", dir, inst.lines[id.line].id, id.period, case)
            }
            _ => format!("{}_{}", c.tag.name(), i),
        }
    }

    /// Plain-text LP-format dump for debugging.
    pub fn write_lp<W: Write>(&self, instance: Option<&Instance>, mut out: W) -> std::io::Result<()> {
        let names: Vec<String> = (0..self.num_variables())
            .map(|j| self.variable_name(j, instance))
            .collect();
        let fmt_terms = |terms: &mut dyn Iterator<Item = (usize, f64)>| {
            let mut s = String::new();
            for (j, a) in terms {
                if a == 0.0 {
                    continue;
                }
                let sign = if a < 0.0 { '-' } else { '+' };
                s.push_str(&format!(" {} {} {}", sign, a.abs(), names[j]));
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        };
        writeln!(out, "\\ model over periods {}..={}", self.first_period, self.last_period)?;
        writeln!(out, "Minimize")?;
        let mut obj = self.objective.iter().copied().enumerate();
        writeln!(out, " obj:{} + {}", fmt_terms(&mut obj), self.objective_offset)?;
        writeln!(out, "Subject To")?;
        for (i, c) in self.constraints.iter().enumerate() {
            let mut terms = c.terms.iter().copied();
            writeln!(
                out,
                " {}:{} {} {}",
                self.constraint_name(i, instance),
                fmt_terms(&mut terms),
                c.sense,
                c.rhs
            )?;
        }
        writeln!(out, "Bounds")?;
        for (j, v) in self.variables.iter().enumerate() {
            writeln!(out, " {} <= {} <= {}", v.lo, names[j], v.hi)?;
        }
        let binaries: Vec<&str> = self
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.domain == Domain::Binary)
            .map(|(j, _)| names[j].as_str())
            .collect();
        if !binaries.is_empty() {
            writeln!(out, "Binary")?;
            for name in binaries {
                writeln!(out, " {name}")?;
            }
        }
        writeln!(out, "End")
    }
}
