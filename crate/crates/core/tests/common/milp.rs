#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scuc_core::milp::{solve_milp, CallbackError, SolveControls, SolveOutcome};
use scuc_core::model::{Constraint, ConstraintTag, Domain, ModelSpec, Sense, VarKey, VarKind};

/// Binaries with integer-coefficient rows, plus continuous variables that
/// each sit under one binary: `y ≤ a·x_j`, `0 ≤ y ≤ u`.
pub struct RandomMilp {
    pub model: ModelSpec,
    pub binaries: Vec<usize>,
    /// `(y, j, a, u, cost)`
    pub linked: Vec<(usize, usize, f64, f64, f64)>,
    /// rows only the callback knows about
    pub hidden: Vec<Constraint>,
}

fn row(rng: &mut ChaCha8Rng, vars: &[usize]) -> (Vec<(usize, f64)>, f64) {
    let mut terms = Vec::new();
    for &j in vars {
        if rng.gen_bool(0.6) {
            let a = rng.gen_range(-5i32..=5);
            if a != 0 {
                terms.push((j, a as f64));
            }
        }
    }
    if terms.is_empty() {
        terms.push((vars[0], 1.0));
    }
    let reach: f64 = terms.iter().map(|t| t.1.abs()).sum();
    (terms, rng.gen_range(-reach / 2.0..reach).round())
}

pub fn random_milp(seed: u64) -> RandomMilp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=12);
    let mut model = ModelSpec::new();
    let binaries: Vec<usize> = (0..n)
        .map(|k| {
            let c = rng.gen_range(-10i32..=10) as f64;
            model.add_variable(VarKey::new(VarKind::Commit, k, 1), Domain::Binary, 0.0, 1.0, c)
        })
        .collect();
    for _ in 0..rng.gen_range(0..=4) {
        let (terms, rhs) = row(&mut rng, &binaries);
        let sense = match rng.gen_range(0..10) {
            0 => Sense::Eq,
            1..=5 => Sense::Le,
            _ => Sense::Ge,
        };
        model.add_constraint(Constraint::new(ConstraintTag::Other, terms, sense, rhs));
    }
    let mut linked = Vec::new();
    for k in 0..rng.gen_range(0..=3) {
        let j = binaries[rng.gen_range(0..n)];
        let (a, u, cost) = (rng.gen_range(1.0..5.0), rng.gen_range(0.5..4.0), -rng.gen_range(0.1..3.0));
        let y = model.add_variable(VarKey::new(VarKind::Power, k, 1), Domain::Continuous, 0.0, u, cost);
        model.add_constraint(Constraint::new(ConstraintTag::Other, vec![(y, 1.0), (j, -a)], Sense::Le, 0.0));
        linked.push((y, j, a, u, cost));
    }
    let hidden = (0..rng.gen_range(0..=3))
        .map(|_| {
            let (terms, rhs) = row(&mut rng, &binaries);
            Constraint::new(ConstraintTag::Other, terms, Sense::Le, rhs)
        })
        .collect();
    RandomMilp {
        model,
        binaries,
        linked,
        hidden,
    }
}

impl RandomMilp {
    /// Optimum over every binary assignment; `with_hidden` adds the hidden rows.
    pub fn brute_force(&self, with_hidden: bool) -> Option<f64> {
        let n = self.binaries.len();
        let mut best: Option<f64> = None;
        for mask in 0..(1u32 << n) {
            let mut x = vec![0.0; self.model.num_variables()];
            for (k, &j) in self.binaries.iter().enumerate() {
                x[j] = (mask >> k & 1) as f64;
            }
            for &(y, j, a, u, _) in &self.linked {
                x[y] = u.min(a * x[j]);
            }
            let rows = self.model.constraints.iter().chain(if with_hidden { &self.hidden[..] } else { &[] });
            if rows.into_iter().all(|c| c.violation(&x) <= 1e-9) {
                let v = self.model.evaluate_objective(&x);
                best = Some(best.map_or(v, |b| b.min(v)));
            }
        }
        best
    }
}

pub fn is_monotone(out: &SolveOutcome) -> bool {
    let bounds = out.stats.bound_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
    let incumbents = out.stats.incumbent_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    bounds && incumbents
}

/// Solve with the hidden rows as lazy cuts. Each hidden row is handed to
/// the search at most once; afterwards the callback accepts points that
/// violate it, so only the solver's pool can keep them out. Returns the
/// outcome and whether any accepted point broke an earlier injected row.
pub fn solve_with_lazy_hidden(m: &RandomMilp, controls: &SolveControls) -> (SolveOutcome, bool) {
    let mut injected = vec![false; m.hidden.len()];
    let mut broken = false;
    let out = solve_milp(&m.model, controls, |x| {
        let mut cuts = Vec::new();
        for (k, c) in m.hidden.iter().enumerate() {
            if c.violation(x) > 1e-6 {
                if injected[k] {
                    broken = true;
                } else {
                    injected[k] = true;
                    cuts.push(c.clone());
                }
            }
        }
        Ok::<_, CallbackError>(cuts)
    })
    .unwrap();
    (out, broken)
}
