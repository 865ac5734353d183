//! Method matrix over a corpus with a CSV results table.

use std::io::Write;

use crate::instance::Instance;
use crate::network::SensitivitySet;
use crate::pipeline::{run, RunMode, RunSettings, RunStatus};
use crate::separation::SeparationMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Method {
    pub mode: RunMode,
    pub separation: SeparationMode,
}

impl Method {
    pub fn name(&self) -> String {
        format!("{}:{}", self.mode.name(), self.separation.name())
    }

    pub fn matrix() -> Vec<Method> {
        let mut out = Vec::new();
        for mode in [RunMode::Monolithic, RunMode::Td, RunMode::TdR] {
            for separation in [SeparationMode::Dynamic, SeparationMode::Filtering, SeparationMode::Enumerate] {
                out.push(Method { mode, separation });
            }
        }
        out
    }

    const REFERENCE: Method = Method {
        mode: RunMode::Monolithic,
        separation: SeparationMode::Enumerate,
    };
}

impl std::str::FromStr for Method {
    type Err = String;
    /// `mode:separation`, e.g. `td-r:dynamic`
    fn from_str(s: &str) -> Result<Self, String> {
        let (mode, sep) = s
            .split_once(':')
            .ok_or_else(|| format!("method `{s}` must read mode:separation"))?;
        Ok(Method {
            mode: mode.parse()?,
            separation: sep.parse()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub instance: String,
    pub method: Method,
    pub status: String,
    pub objective: Option<f64>,
    pub gap_vs_best: Option<f64>,
    pub wall_seconds: f64,
    pub cuts: usize,
    pub subproblems: usize,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub solved: usize,
    pub geomean_objective: Option<f64>,
    pub mean_gap: Option<f64>,
    pub geomean_seconds: f64,
}

/// Runs every method on every instance. Failures are recorded in the row's
/// status and the run continues.
pub fn run_matrix(corpus: &[(String, Instance)], methods: &[Method], base: &RunSettings) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for (name, instance) in corpus {
        let first = rows.len();
        let sens = SensitivitySet::build_with_index(instance, 0);
        for &method in methods {
            let settings = RunSettings {
                mode: method.mode,
                separation: method.separation,
                ..base.clone()
            };
            let mut row = BenchRow {
                instance: name.clone(),
                method,
                status: String::new(),
                objective: None,
                gap_vs_best: None,
                wall_seconds: 0.0,
                cuts: 0,
                subproblems: 0,
                restarts: 0,
            };
            match &sens {
                Err(e) => row.status = format!("error: {e}"),
                Ok(sens) => match run(instance, sens, &settings) {
                    Ok(out) => {
                        row.status = status_name(out.status).into();
                        row.objective = out.objective();
                        row.wall_seconds = out.wall_seconds;
                        row.cuts = out.cuts;
                        row.subproblems = out.subproblems;
                        row.restarts = out.restarts;
                    }
                    Err(e) => row.status = format!("error: {e}"),
                },
            }
            log::info!("benchmark {name} {} {}", method.name(), row.status);
            rows.push(row);
        }
        fill_gaps(&mut rows[first..]);
    }
    rows
}

fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Feasible => "feasible",
        RunStatus::Infeasible => "infeasible",
        RunStatus::NoIncumbent => "no_incumbent",
    }
}

/// Gap of each row against the enumerate-mode monolithic objective, or the
/// best objective among the rows when that reference is missing.
fn fill_gaps(rows: &mut [BenchRow]) {
    let reference = rows
        .iter()
        .find(|r| r.method == Method::REFERENCE)
        .and_then(|r| r.objective)
        .or_else(|| rows.iter().filter_map(|r| r.objective).min_by(f64::total_cmp));
    let Some(reference) = reference.filter(|&r| r > 0.0) else { return };
    for r in rows {
        r.gap_vs_best = r.objective.map(|o| (o - reference) / reference);
    }
}

fn geomean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v.max(1e-9).ln();
        n += 1;
    }
    (n > 0).then(|| (sum / n as f64).exp())
}

pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|method| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.method == method).collect();
            let gaps: Vec<f64> = mine.iter().filter_map(|r| r.gap_vs_best).collect();
            SummaryRow {
                method,
                solved: mine.iter().filter(|r| r.objective.is_some()).count(),
                geomean_objective: geomean(mine.iter().filter_map(|r| r.objective)),
                mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
                geomean_seconds: geomean(mine.iter().map(|r| r.wall_seconds)).unwrap_or(0.0),
            }
        })
        .collect()
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or(String::new(), |v| format!("{v:.digits$}"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Data rows, then one `geomean` row per method: geometric mean of
/// objective and seconds, arithmetic mean of the gap.
pub fn write_csv<W: Write>(rows: &[BenchRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "instance,method,objective,gap_vs_best,wall_seconds,cuts,subproblems,restarts,status")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.3},{},{},{},{}",
            csv_field(&r.instance),
            r.method.name(),
            opt(r.objective, 6),
            opt(r.gap_vs_best, 6),
            r.wall_seconds,
            r.cuts,
            r.subproblems,
            r.restarts,
            csv_field(&r.status)
        )?;
    }
    for s in summarize(rows) {
        writeln!(
            out,
            "geomean,{},{},{},{:.3},,,,solved={}",
            s.method.name(),
            opt(s.geomean_objective, 6),
            opt(s.mean_gap, 6),
            s.geomean_seconds,
            s.solved
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(instance: &str, method: &str, objective: Option<f64>, secs: f64) -> BenchRow {
        BenchRow {
            instance: instance.into(),
            method: method.parse().unwrap(),
            status: "feasible".into(),
            objective,
            gap_vs_best: None,
            wall_seconds: secs,
            cuts: 0,
            subproblems: 1,
            restarts: 0,
        }
    }

    #[test]
    fn matrix_has_nine_methods() {
        let m = Method::matrix();
        assert_eq!(m.len(), 9);
        assert_eq!(m[0].name(), "monolithic:dynamic");
        assert!(m.contains(&"td-r:enumerate".parse().unwrap()));
        assert!("td-r".parse::<Method>().is_err());
    }

    #[test]
    fn gap_uses_enumerate_monolithic_when_present() {
        let mut rows = vec![
            row("a", "td:dynamic", Some(99.0), 1.0),
            row("a", "monolithic:enumerate", Some(100.0), 1.0),
        ];
        fill_gaps(&mut rows);
        assert!((rows[0].gap_vs_best.unwrap() + 0.01).abs() < 1e-12);
        assert_eq!(rows[1].gap_vs_best, Some(0.0));

        let mut rows = vec![row("a", "td:dynamic", Some(110.0), 1.0), row("a", "td-r:dynamic", Some(100.0), 1.0)];
        fill_gaps(&mut rows);
        assert!((rows[0].gap_vs_best.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn summary_times_are_geometric() {
        let rows = vec![row("a", "td:dynamic", Some(1.0), 1.0), row("b", "td:dynamic", None, 100.0)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert!((s[0].geomean_seconds - 10.0).abs() < 1e-9);
        assert_eq!(s[0].solved, 1);
    }
}
