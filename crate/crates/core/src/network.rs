//! DC power-flow sensitivities.
//!
//! Flows are oriented from `from_bus` to `to_bus`. The base PTDF is obtained
//! from the reduced nodal susceptance matrix (reference row and column
//! removed); line outage distribution factors follow from the PTDF of a unit
//! transfer across the outaged line:
//!
//! ```text
//! LODF[l,k] = ptdf'[l,k] / (1 - ptdf'[k,k]),   ptdf'[l,k] = ptdf[l,from_k] - ptdf[l,to_k]
//! ptdf_c[l,·] = ptdf[l,·] + LODF[l,k] · ptdf[k,·]
//! ```
//!
//! Post-contingency rows are materialized lazily and cached.

use std::io::Write;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::instance::Instance;

/// `|1 - ptdf'[k,k]|` below this marks line `k` as a bridge.
pub const BRIDGE_TOL: f64 = 1e-8;

/// Injections must sum to zero within this many MW.
pub const BALANCE_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("base network is disconnected")]
    Disconnected,
    #[error("reduced susceptance matrix is singular")]
    Singular,
    #[error("unknown bus `{0}`")]
    UnknownBus(String),
    #[error("line index {0} out of range")]
    UnknownLine(usize),
    #[error("contingency index {0} out of range")]
    UnknownContingency(usize),
    #[error("line {line} is the outaged line of contingency {contingency}")]
    OutagedLine { line: usize, contingency: usize },
    #[error("injections are unbalanced: sum = {0} MW")]
    Unbalanced(f64),
    #[error("injection vector has {got} entries, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Which network topology a flow refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowCase {
    Base,
    /// Index into `Instance::contingencies`.
    Contingency(usize),
}

#[derive(Debug)]
pub struct SensitivitySet {
    reference_bus: usize,
    n_bus: usize,
    n_line: usize,
    ends: Vec<(usize, usize)>,
    /// line-major `n_line × n_bus`
    ptdf: Vec<f64>,
    /// `lodf[l * n_line + k]`: share of line k's flow picked up by l when k trips.
    /// NaN in columns of bridge lines.
    lodf: Vec<f64>,
    bridge: Vec<bool>,
    contingency_line: Vec<usize>,
    rows: Vec<OnceLock<Box<[f64]>>>,
}

impl SensitivitySet {
    /// Build with the reference bus given by id.
    pub fn build(instance: &Instance, reference_bus: &str) -> Result<Self, NetworkError> {
        let r = instance
            .bus_index(reference_bus)
            .ok_or_else(|| NetworkError::UnknownBus(reference_bus.to_string()))?;
        Self::build_with_index(instance, r)
    }

    /// Build with the default reference bus (the first listed bus).
    pub fn build_default(instance: &Instance) -> Result<Self, NetworkError> {
        Self::build_with_index(instance, 0)
    }

    pub fn build_with_index(instance: &Instance, reference_bus: usize) -> Result<Self, NetworkError> {
        let n_bus = instance.num_buses();
        let n_line = instance.num_lines();
        if reference_bus >= n_bus {
            return Err(NetworkError::UnknownBus(reference_bus.to_string()));
        }
        let ends: Vec<(usize, usize)> = (0..n_line).map(|l| instance.line_ends(l)).collect();
        let susceptance: Vec<f64> = instance.lines.iter().map(|l| l.susceptance).collect();
        let ptdf = base_ptdf(n_bus, &ends, &susceptance, reference_bus)?;

        let mut lodf = vec![f64::NAN; n_line * n_line];
        let mut bridge = vec![false; n_line];
        for (k, &(fk, tk)) in ends.iter().enumerate() {
            let transfer = |l: usize| ptdf[l * n_bus + fk] - ptdf[l * n_bus + tk];
            let denom = 1.0 - transfer(k);
            if denom.abs() < BRIDGE_TOL {
                bridge[k] = true;
                continue;
            }
            for l in 0..n_line {
                lodf[l * n_line + k] = if l == k { -1.0 } else { transfer(l) / denom };
            }
        }

        let contingency_line: Vec<usize> = (0..instance.num_contingencies())
            .map(|c| instance.contingency_line(c))
            .collect();
        let rows = (0..contingency_line.len() * n_line)
            .map(|_| OnceLock::new())
            .collect();
        Ok(SensitivitySet {
            reference_bus,
            n_bus,
            n_line,
            ends,
            ptdf,
            lodf,
            bridge,
            contingency_line,
            rows,
        })
    }

    pub fn reference_bus(&self) -> usize {
        self.reference_bus
    }

    pub fn num_buses(&self) -> usize {
        self.n_bus
    }

    pub fn num_lines(&self) -> usize {
        self.n_line
    }

    pub fn num_contingencies(&self) -> usize {
        self.contingency_line.len()
    }

    pub fn line_ends(&self, l: usize) -> (usize, usize) {
        self.ends[l]
    }

    /// Base-case row δ_l·^0.
    pub fn ptdf_row(&self, l: usize) -> &[f64] {
        &self.ptdf[l * self.n_bus..(l + 1) * self.n_bus]
    }

    pub fn ptdf(&self, l: usize, b: usize) -> f64 {
        self.ptdf[l * self.n_bus + b]
    }

    /// LODF of monitored line `l` for an outage of line `k`; `None` if `k` is a bridge.
    pub fn lodf(&self, l: usize, k: usize) -> Option<f64> {
        if self.bridge[k] {
            None
        } else {
            Some(self.lodf[l * self.n_line + k])
        }
    }

    pub fn is_bridge(&self, k: usize) -> bool {
        self.bridge[k]
    }

    /// Lines whose removal islands the network, detected from the LODF denominator.
    pub fn bridges(&self) -> Vec<usize> {
        (0..self.n_line).filter(|&k| self.bridge[k]).collect()
    }

    pub fn outaged_line(&self, case: FlowCase) -> Option<usize> {
        match case {
            FlowCase::Base => None,
            FlowCase::Contingency(c) => Some(self.contingency_line[c]),
        }
    }

    /// δ_l·^c for line `l` under contingency `c`; cached after the first call.
    pub fn contingency_ptdf_row(&self, l: usize, c: usize) -> Result<&[f64], NetworkError> {
        if l >= self.n_line {
            return Err(NetworkError::UnknownLine(l));
        }
        let k = *self
            .contingency_line
            .get(c)
            .ok_or(NetworkError::UnknownContingency(c))?;
        if l == k {
            return Err(NetworkError::OutagedLine {
                line: l,
                contingency: c,
            });
        }
        Ok(self.rows[c * self.n_line + l].get_or_init(|| {
            let factor = self.lodf[l * self.n_line + k];
            let base = self.ptdf_row(l);
            let outaged = self.ptdf_row(k);
            base.iter()
                .zip(outaged)
                .map(|(a, b)| a + factor * b)
                .collect()
        }))
    }

    /// Row for `l` in the given case; `None` for the outaged line itself.
    pub fn row(&self, l: usize, case: FlowCase) -> Option<&[f64]> {
        match case {
            FlowCase::Base => Some(self.ptdf_row(l)),
            FlowCase::Contingency(c) => self.contingency_ptdf_row(l, c).ok(),
        }
    }

    /// Line flows for a balanced injection vector. The outaged line of a
    /// contingency carries zero flow.
    pub fn line_flows(&self, injections: &[f64], case: FlowCase) -> Result<Vec<f64>, NetworkError> {
        if injections.len() != self.n_bus {
            return Err(NetworkError::Dimension {
                expected: self.n_bus,
                got: injections.len(),
            });
        }
        let sum: f64 = injections.iter().sum();
        if sum.abs() > BALANCE_TOL {
            return Err(NetworkError::Unbalanced(sum));
        }
        if let FlowCase::Contingency(c) = case {
            if c >= self.contingency_line.len() {
                return Err(NetworkError::UnknownContingency(c));
            }
        }
        Ok((0..self.n_line)
            .map(|l| match self.row(l, case) {
                Some(row) => dot(row, injections),
                None => 0.0,
            })
            .collect())
    }

    /// Writes `line_id,bus_id,value` rows of the base PTDF, 12 significant digits.
    pub fn write_ptdf_csv<W: Write>(&self, instance: &Instance, mut out: W) -> std::io::Result<()> {
        writeln!(out, "line,bus,value")?;
        for l in 0..self.n_line {
            for b in 0..self.n_bus {
                writeln!(
                    out,
                    "{},{},{}",
                    instance.lines[l].id,
                    instance.buses[b].id,
                    format_sig(self.ptdf(l, b), 12)
                )?;
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `%.{digits}g`-style formatting.
pub fn format_sig(value: f64, digits: usize) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let exp = value.abs().log10().floor() as i32;
    if exp < -5 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits - 1, value);
        // trim mantissa zeros: 1.500000e3 -> 1.5e3
        match s.split_once('e') {
            Some((mant, e)) if mant.contains('.') => {
                let mant = mant.trim_end_matches('0').trim_end_matches('.');
                format!("{mant}e{e}")
            }
            _ => s,
        }
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, value);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

fn base_ptdf(
    n_bus: usize,
    ends: &[(usize, usize)],
    susceptance: &[f64],
    reference: usize,
) -> Result<Vec<f64>, NetworkError> {
    let n_line = ends.len();
    if n_bus == 1 {
        return Ok(vec![0.0; n_line]);
    }
    // reduced index: skip the reference bus
    let reduced = |b: usize| -> Option<usize> {
        match b.cmp(&reference) {
            std::cmp::Ordering::Less => Some(b),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(b - 1),
        }
    };
    let n = n_bus - 1;
    let mut bmat = DMatrix::<f64>::zeros(n, n);
    for (&(f, t), &s) in ends.iter().zip(susceptance) {
        let (rf, rt) = (reduced(f), reduced(t));
        if let Some(i) = rf {
            bmat[(i, i)] += s;
        }
        if let Some(j) = rt {
            bmat[(j, j)] += s;
        }
        if let (Some(i), Some(j)) = (rf, rt) {
            bmat[(i, j)] -= s;
            bmat[(j, i)] -= s;
        }
    }
    // A connected network with positive susceptances gives an SPD reduced matrix.
    let chol = bmat.cholesky().ok_or_else(|| {
        if connected(n_bus, ends) {
            NetworkError::Singular
        } else {
            NetworkError::Disconnected
        }
    })?;
    let x = chol.inverse();
    let angle = |bus: usize, col: usize| reduced(bus).map_or(0.0, |i| x[(i, col)]);
    let mut ptdf = vec![0.0; n_line * n_bus];
    for (l, (&(f, t), &s)) in ends.iter().zip(susceptance).enumerate() {
        for b in 0..n_bus {
            if let Some(col) = reduced(b) {
                ptdf[l * n_bus + b] = s * (angle(f, col) - angle(t, col));
            }
        }
    }
    Ok(ptdf)
}

fn connected(n: usize, ends: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let mut components = n;
    for &(a, b) in ends {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Bus, InstanceDocument, Line, Meta};
    use std::collections::BTreeMap;

    fn network(buses: usize, lines: &[(usize, usize, f64)]) -> Instance {
        let doc = InstanceDocument {
            meta: Meta {
                name: "net".into(),
                horizon: 1,
            },
            buses: (0..buses).map(|i| Bus { id: format!("b{i}") }).collect(),
            lines: lines
                .iter()
                .enumerate()
                .map(|(i, &(f, t, s))| Line {
                    id: format!("l{i}"),
                    from_bus: format!("b{f}"),
                    to_bus: format!("b{t}"),
                    susceptance: s,
                    limit_base: 100.0,
                    limit_contingency: None,
                })
                .collect(),
            generators: vec![],
            contingencies: vec![],
            demand: BTreeMap::new(),
            curtail_penalty: 0.0,
        };
        Instance::from_document(doc).unwrap()
    }

    #[test]
    fn two_bus_row() {
        let inst = network(2, &[(0, 1, 4.0)]);
        let s = SensitivitySet::build_default(&inst).unwrap();
        assert_eq!(s.ptdf_row(0), &[0.0, -1.0]);
        let flows = s.line_flows(&[-10.0, 10.0], FlowCase::Base).unwrap();
        assert!((flows[0] + 10.0).abs() < 1e-12);
        assert_eq!(s.bridges(), vec![0]);
    }

    #[test]
    fn zero_injection_zero_flow() {
        let inst = network(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]);
        let s = SensitivitySet::build_default(&inst).unwrap();
        let flows = s.line_flows(&[0.0; 3], FlowCase::Base).unwrap();
        assert!(flows.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn unbalanced_injection_rejected() {
        let inst = network(2, &[(0, 1, 1.0)]);
        let s = SensitivitySet::build_default(&inst).unwrap();
        assert!(matches!(
            s.line_flows(&[1.0, 0.0], FlowCase::Base),
            Err(NetworkError::Unbalanced(_))
        ));
    }

    #[test]
    fn format_sig_matches_printf_g() {
        assert_eq!(format_sig(-2.0 / 3.0, 12), "-0.666666666667");
        assert_eq!(format_sig(1.0, 12), "1");
        assert_eq!(format_sig(1.5e-7, 12), "1.5e-7");
        assert_eq!(format_sig(0.0, 12), "0");
    }
}
