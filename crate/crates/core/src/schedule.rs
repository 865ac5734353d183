//! Commitment/dispatch schedules and their JSON file form.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("schedule dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed schedule file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Which stage produced a period's values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Provenance {
    Monolithic,
    FixedAtIteration { iteration: usize },
    FinalCompletion,
    RinsPass { pass: usize },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Monolithic => write!(f, "monolithic"),
            Provenance::FixedAtIteration { iteration } => write!(f, "fixed@{iteration}"),
            Provenance::FinalCompletion => write!(f, "completion"),
            Provenance::RinsPass { pass } => write!(f, "rins@{pass}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub total: f64,
    pub production: f64,
    pub startup: f64,
    pub noload: f64,
    pub curtailment: f64,
}

/// Values over the full horizon. Matrices are `[generator][t]` and
/// `[bus][t]` with zero-based `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub curtail: Vec<Vec<f64>>,
    pub objective: ObjectiveBreakdown,
    pub provenance: Vec<Provenance>,
}

impl Schedule {
    pub fn zeros(instance: &Instance) -> Self {
        let t = instance.horizon;
        let g = instance.num_generators();
        Schedule {
            x: vec![vec![0.0; t]; g],
            z: vec![vec![0.0; t]; g],
            w: vec![vec![0.0; t]; g],
            p: vec![vec![0.0; t]; g],
            curtail: vec![vec![0.0; t]; instance.num_buses()],
            objective: ObjectiveBreakdown::default(),
            provenance: vec![Provenance::Monolithic; t],
        }
    }

    pub fn horizon(&self) -> usize {
        self.provenance.len()
    }

    /// Recomputes z/w from x and the initial status through the logic identity.
    pub fn derive_transitions(&mut self, instance: &Instance) {
        for (g, gen) in instance.generators.iter().enumerate() {
            let mut prev = if gen.init_on { 1.0 } else { 0.0 };
            for t in 0..self.x[g].len() {
                let cur = self.x[g][t];
                self.z[g][t] = (cur - prev).max(0.0);
                self.w[g][t] = (prev - cur).max(0.0);
                prev = cur;
            }
        }
    }

    pub fn check_dimensions(&self, instance: &Instance) -> Result<(), ScheduleError> {
        let t = instance.horizon;
        let g = instance.num_generators();
        let b = instance.num_buses();
        let gen_ok = |m: &Vec<Vec<f64>>| m.len() == g && m.iter().all(|r| r.len() == t);
        if !(gen_ok(&self.x) && gen_ok(&self.z) && gen_ok(&self.w) && gen_ok(&self.p)) {
            return Err(ScheduleError::Dimension(format!(
                "generator series must be {g} x {t}"
            )));
        }
        if self.curtail.len() != b || self.curtail.iter().any(|r| r.len() != t) {
            return Err(ScheduleError::Dimension(format!(
                "curtailment must be {b} x {t}"
            )));
        }
        if self.provenance.len() != t {
            return Err(ScheduleError::Dimension(format!(
                "provenance has {} periods, horizon is {t}",
                self.provenance.len()
            )));
        }
        Ok(())
    }

    pub fn to_file(&self, instance: &Instance) -> ScheduleFile {
        let generators = instance
            .generators
            .iter()
            .enumerate()
            .map(|(g, gen)| {
                (
                    gen.id.clone(),
                    GeneratorSeries {
                        x: self.x[g].iter().map(|&v| tidy(v)).collect(),
                        p: self.p[g].iter().map(|&v| tidy(v)).collect(),
                    },
                )
            })
            .collect();
        let curtailment = instance
            .buses
            .iter()
            .enumerate()
            .map(|(b, bus)| (bus.id.clone(), self.curtail[b].iter().map(|&v| tidy(v)).collect()))
            .collect();
        ScheduleFile {
            instance: instance.name.clone(),
            horizon: self.horizon(),
            objective: self.objective,
            generators,
            curtailment,
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_json_pretty(&self, instance: &Instance) -> String {
        serde_json::to_string_pretty(&self.to_file(instance)).expect("schedule serializes")
    }

    pub fn from_json_str(text: &str, instance: &Instance) -> Result<Self, ScheduleError> {
        let file: ScheduleFile = serde_json::from_str(text)?;
        file.into_schedule(instance)
    }
}

/// Values within 1e-9 of an integer print as that integer, the rest are
/// rounded to 1e-9 MW so the file does not carry LP round-off noise.
fn tidy(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        return r + 0.0;
    }
    (v * 1e9).round() / 1e9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSeries {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

/// On-disk schedule: per-generator `x`/`p`, per-bus curtailment and the
/// objective breakdown. Start-up/shut-down indicators are implied by `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub instance: String,
    pub horizon: usize,
    pub objective: ObjectiveBreakdown,
    pub generators: BTreeMap<String, GeneratorSeries>,
    pub curtailment: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub provenance: Vec<Provenance>,
}

impl ScheduleFile {
    pub fn into_schedule(self, instance: &Instance) -> Result<Schedule, ScheduleError> {
        let t = instance.horizon;
        if self.horizon != t {
            return Err(ScheduleError::Dimension(format!(
                "schedule horizon {} does not match instance horizon {t}",
                self.horizon
            )));
        }
        let mut s = Schedule::zeros(instance);
        for (g, gen) in instance.generators.iter().enumerate() {
            let series = self.generators.get(&gen.id).ok_or_else(|| {
                ScheduleError::Dimension(format!("no series for generator `{}`", gen.id))
            })?;
            if series.x.len() != t || series.p.len() != t {
                return Err(ScheduleError::Dimension(format!(
                    "generator `{}` series must have {t} periods",
                    gen.id
                )));
            }
            s.x[g].clone_from(&series.x);
            s.p[g].clone_from(&series.p);
        }
        if self.generators.len() != instance.num_generators() {
            return Err(ScheduleError::Dimension(
                "schedule names generators unknown to the instance".into(),
            ));
        }
        for (bus_id, values) in &self.curtailment {
            let b = instance.bus_index(bus_id).ok_or_else(|| {
                ScheduleError::Dimension(format!("curtailment for unknown bus `{bus_id}`"))
            })?;
            if values.len() != t {
                return Err(ScheduleError::Dimension(format!(
                    "curtailment at `{bus_id}` must have {t} periods"
                )));
            }
            s.curtail[b].clone_from(values);
        }
        if self.provenance.len() == t {
            s.provenance = self.provenance;
        }
        s.derive_transitions(instance);
        s.objective = self.objective;
        Ok(s)
    }
}
