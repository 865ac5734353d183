//! Bounded-variable revised primal simplex.
//!
//! Row `i` reads `Σ_j a_ij x_j − r_i = 0` where the logical `r_i` carries
//! the row bounds, so every variable (structural or logical) is simply a
//! bounded column. Phase 1 minimizes the sum of bound infeasibilities of
//! the basic variables and phase 2 the true cost; both share one loop.
//!
//! A warm basis that is dual feasible but primal infeasible (after a bound
//! change or an appended row) is first repaired by dual simplex pivots.

use std::time::Instant;

use super::lu::LuFactor;

const PRIMAL_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-7;
const PHASE1_DUAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const BLAND_AFTER: usize = 100;
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub(crate) enum VarStatus {
    Basic = 0,
    Lower = 1,
    Upper = 2,
}

impl VarStatus {
    fn from_u8(v: u8) -> Self {
        match v {
            0 => VarStatus::Basic,
            2 => VarStatus::Upper,
            _ => VarStatus::Lower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    IterationLimit,
}

pub(crate) struct LpEngine {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    /// structural entries of each row
    rows: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    x: Vec<f64>,
    lu: Option<LuFactor>,
    pivot_tol: f64,
    pub iterations: u64,
    // scratch
    work_row: Vec<f64>,
    work_pos: Vec<f64>,
    alpha: Vec<f64>,
    duals: Vec<f64>,
    rho: Vec<f64>,
    dj: Vec<f64>,
}

enum DualEnd {
    Done,
    Infeasible,
    Stopped(LpStatus),
    GiveUp,
}

impl LpEngine {
    /// `lo`/`hi`/`cost` cover the `n` structural columns; `cols[j]` lists
    /// `(row, coefficient)` over rows added later with [`LpEngine::add_row`].
    pub fn new(cost: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>, pivot_tol: f64) -> Self {
        let n = cost.len();
        let status = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| if l.is_finite() || !h.is_finite() { VarStatus::Lower } else { VarStatus::Upper })
            .collect();
        let x = lo.iter().zip(&hi).map(|(&l, &h)| if l.is_finite() { l } else if h.is_finite() { h } else { 0.0 }).collect();
        LpEngine {
            n,
            m: 0,
            cols: vec![Vec::new(); n],
            rows: Vec::new(),
            cost,
            lo,
            hi,
            status,
            head: Vec::new(),
            x,
            lu: None,
            pivot_tol,
            iterations: 0,
            work_row: Vec::new(),
            work_pos: Vec::new(),
            alpha: Vec::new(),
            duals: Vec::new(),
            rho: Vec::new(),
            dj: Vec::new(),
        }
    }

    pub fn num_structurals(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    /// Appends `row_lo ≤ Σ a_j x_j ≤ row_hi`. The new logical enters the basis.
    pub fn add_row(&mut self, terms: &[(usize, f64)], row_lo: f64, row_hi: f64) {
        let i = self.m;
        let mut merged: Vec<(usize, f64)> = terms.to_vec();
        merged.sort_by_key(|&(j, _)| j);
        merged.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        merged.retain(|&(_, a)| a != 0.0);
        let mut activity = 0.0;
        for &(j, a) in &merged {
            self.cols[j].push((i, a));
            activity += a * self.x[j];
        }
        self.rows.push(merged);
        self.m += 1;
        self.cols.push(vec![(i, -1.0)]);
        self.cost.push(0.0);
        self.lo.push(row_lo);
        self.hi.push(row_hi);
        self.status.push(VarStatus::Basic);
        self.head.push(self.n + i);
        self.x.push(activity);
        self.lu = None;
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        match self.status[j] {
            VarStatus::Lower => self.x[j] = lo,
            VarStatus::Upper => self.x[j] = hi,
            VarStatus::Basic => {}
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        self.cost[..self.n].iter().zip(&self.x).map(|(c, v)| c * v).sum()
    }

    pub fn basis(&self) -> Vec<u8> {
        self.status.iter().map(|&s| s as u8).collect()
    }

    /// Installs a basis saved by [`LpEngine::basis`]; rows added since it was
    /// saved keep their logicals basic. Falls back to the slack basis if the
    /// saved statuses do not describe a square basis.
    pub fn load_basis(&mut self, saved: &[u8]) {
        if saved.len() > self.n + self.m {
            return self.slack_basis();
        }
        let same = saved.iter().zip(&self.status).all(|(&a, &b)| a == b as u8)
            && self.status[saved.len()..].iter().all(|&s| s == VarStatus::Basic)
            && self.lu.is_some();
        if same {
            return;
        }
        for (j, &s) in saved.iter().enumerate() {
            self.status[j] = VarStatus::from_u8(s);
        }
        for s in &mut self.status[saved.len()..] {
            *s = VarStatus::Basic;
        }
        self.rebuild_head();
    }

    pub fn slack_basis(&mut self) {
        for j in 0..self.n {
            self.status[j] = if self.lo[j].is_finite() { VarStatus::Lower } else { VarStatus::Upper };
        }
        for j in self.n..self.n + self.m {
            self.status[j] = VarStatus::Basic;
        }
        self.rebuild_head();
    }

    fn rebuild_head(&mut self) {
        self.head = (0..self.n + self.m).filter(|&j| self.status[j] == VarStatus::Basic).collect();
        if self.head.len() != self.m {
            self.slack_basis();
            return;
        }
        for j in 0..self.n + self.m {
            self.set_nonbasic_value(j);
        }
        self.lu = None;
    }

    fn set_nonbasic_value(&mut self, j: usize) {
        match self.status[j] {
            VarStatus::Lower => {
                if self.lo[j].is_finite() {
                    self.x[j] = self.lo[j];
                } else {
                    self.status[j] = VarStatus::Upper;
                    self.x[j] = self.hi[j];
                }
            }
            VarStatus::Upper => {
                if self.hi[j].is_finite() {
                    self.x[j] = self.hi[j];
                } else {
                    self.status[j] = VarStatus::Lower;
                    self.x[j] = self.lo[j];
                }
            }
            VarStatus::Basic => {}
        }
    }

    fn refactor(&mut self) {
        for _attempt in 0..=self.m {
            let cols = &self.cols;
            let head = &self.head;
            match LuFactor::factor(self.m, |p| cols[head[p]].as_slice()) {
                Ok(lu) => {
                    self.lu = Some(lu);
                    self.compute_basic_values();
                    return;
                }
                Err(sing) => {
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[pos];
                        let (lo, hi, v) = (self.lo[out], self.hi[out], self.x[out]);
                        self.status[out] = if !hi.is_finite() || (lo.is_finite() && v - lo <= hi - v) {
                            VarStatus::Lower
                        } else {
                            VarStatus::Upper
                        };
                        self.set_nonbasic_value(out);
                        let logical = self.n + row;
                        self.status[logical] = VarStatus::Basic;
                        self.head[pos] = logical;
                    }
                }
            }
        }
        unreachable!("the slack basis is always nonsingular");
    }

    fn compute_basic_values(&mut self) {
        let m = self.m;
        self.work_row.clear();
        self.work_row.resize(m, 0.0);
        for j in 0..self.n + m {
            if self.status[j] != VarStatus::Basic {
                let v = self.x[j];
                if v != 0.0 {
                    for &(i, a) in &self.cols[j] {
                        self.work_row[i] -= a * v;
                    }
                }
            }
        }
        self.work_pos.clear();
        self.work_pos.resize(m, 0.0);
        self.lu.as_ref().expect("factor").ftran(&mut self.work_row, &mut self.work_pos);
        for p in 0..m {
            self.x[self.head[p]] = self.work_pos[p];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        if self.x[j] < self.lo[j] - PRIMAL_TOL {
            -1.0
        } else if self.x[j] > self.hi[j] + PRIMAL_TOL {
            1.0
        } else {
            0.0
        }
    }

    /// Runs the simplex from the current basis.
    pub fn solve(&mut self, max_iterations: u64, deadline: Option<Instant>) -> LpStatus {
        let m = self.m;
        if self.lu.is_none() {
            self.refactor();
        } else {
            self.compute_basic_values();
        }
        if m == 0 {
            return self.solve_without_rows();
        }
        let start_iter = self.iterations;
        self.alpha.resize(m, 0.0);
        self.duals.resize(m, 0.0);
        self.rho.resize(m, 0.0);
        if (0..m).any(|p| self.infeasibility(self.head[p]) != 0.0) && self.make_dual_feasible() {
            match self.dual_simplex(max_iterations, deadline, start_iter) {
                DualEnd::Infeasible => return LpStatus::Infeasible,
                DualEnd::Stopped(s) => return s,
                DualEnd::Done | DualEnd::GiveUp => {}
            }
        }
        let mut fresh = true;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations - start_iter >= max_iterations {
                return LpStatus::IterationLimit;
            }
            if self.iterations % 64 == 0 {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        return LpStatus::TimeLimit;
                    }
                }
            }
            if self.lu.as_ref().map_or(true, |lu| lu.num_etas() >= REFACTOR_EVERY) {
                self.refactor();
                fresh = true;
            }

            let mut phase1 = false;
            self.work_pos.clear();
            self.work_pos.resize(m, 0.0);
            for p in 0..m {
                let inf = self.infeasibility(self.head[p]);
                if inf != 0.0 {
                    phase1 = true;
                }
                self.work_pos[p] = inf;
            }
            if !phase1 {
                for p in 0..m {
                    self.work_pos[p] = self.cost[self.head[p]];
                }
            }
            self.lu.as_ref().expect("factor").btran(&mut self.work_pos, &mut self.duals);
            self.price(phase1);

            let bland = degenerate_run > BLAND_AFTER;
            let dtol = if phase1 { PHASE1_DUAL_TOL } else { DUAL_TOL };
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.n + m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = self.dj[j];
                let dir = match st {
                    VarStatus::Lower if d < -dtol => 1.0,
                    VarStatus::Upper if d > dtol => -1.0,
                    _ => continue,
                };
                if bland {
                    entering = Some((j, d, dir));
                    break;
                }
                if entering.map_or(true, |(_, bd, _)| d.abs() > bd.abs()) {
                    entering = Some((j, d, dir));
                }
            }

            let Some((q, _, dir)) = entering else {
                if !fresh {
                    self.refactor();
                    fresh = true;
                    continue;
                }
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };

            self.work_row.clear();
            self.work_row.resize(m, 0.0);
            for &(i, a) in &self.cols[q] {
                self.work_row[i] = a;
            }
            self.lu.as_ref().expect("factor").ftran(&mut self.work_row, &mut self.alpha);

            let step = self.ratio_test(q, dir, bland);
            self.iterations += 1;
            match step {
                Step::Unbounded => {
                    if !fresh {
                        self.refactor();
                        fresh = true;
                        continue;
                    }
                    return LpStatus::Unbounded;
                }
                Step::Flip(theta) => {
                    self.apply_move(q, dir, theta);
                    self.status[q] = if dir > 0.0 { VarStatus::Upper } else { VarStatus::Lower };
                    self.set_nonbasic_value(q);
                    degenerate_run = 0;
                }
                Step::Pivot { pos, theta, to_upper } => {
                    self.apply_move(q, dir, theta);
                    let leaving = self.head[pos];
                    self.status[leaving] = if to_upper { VarStatus::Upper } else { VarStatus::Lower };
                    self.set_nonbasic_value(leaving);
                    self.status[q] = VarStatus::Basic;
                    self.head[pos] = q;
                    self.lu.as_mut().expect("factor").push_eta(pos, &self.alpha);
                    if theta <= DEGENERATE_STEP {
                        degenerate_run += 1;
                    } else {
                        degenerate_run = 0;
                    }
                }
            }
            fresh = false;
        }
    }

    /// `out_j = Σ_i y_i a_ij` over structurals and logicals, walking only
    /// the rows with nonzero `y_i`.
    fn transpose_product(rows: &[Vec<(usize, f64)>], n: usize, y: &[f64], out: &mut Vec<f64>) {
        let m = rows.len();
        out.clear();
        out.resize(n + m, 0.0);
        for (i, row) in rows.iter().enumerate() {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for &(j, a) in row {
                out[j] += yi * a;
            }
            out[n + i] = -yi;
        }
    }

    /// Reduced costs `c_j − (Aᵀy)_j` into `dj`, with `c = 0` in phase 1.
    fn price(&mut self, phase1: bool) {
        Self::transpose_product(&self.rows, self.n, &self.duals, &mut self.dj);
        for (j, d) in self.dj.iter_mut().enumerate() {
            let c = if phase1 { 0.0 } else { self.cost[j] };
            *d = c - *d;
        }
    }

    fn load_basic_costs(&mut self) {
        self.work_pos.clear();
        self.work_pos.resize(self.m, 0.0);
        for p in 0..self.m {
            self.work_pos[p] = self.cost[self.head[p]];
        }
        self.lu.as_ref().expect("factor").btran(&mut self.work_pos, &mut self.duals);
    }

    /// Moves boxed nonbasics to the bound their reduced cost prefers.
    /// Returns false when some nonbasic cannot be made dual feasible.
    fn make_dual_feasible(&mut self) -> bool {
        self.load_basic_costs();
        self.price(false);
        let mut flipped = false;
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.dj[j];
            match st {
                VarStatus::Lower if d < -DUAL_TOL => {
                    if !self.hi[j].is_finite() {
                        return false;
                    }
                    self.status[j] = VarStatus::Upper;
                    self.x[j] = self.hi[j];
                    flipped = true;
                }
                VarStatus::Upper if d > DUAL_TOL => {
                    if !self.lo[j].is_finite() {
                        return false;
                    }
                    self.status[j] = VarStatus::Lower;
                    self.x[j] = self.lo[j];
                    flipped = true;
                }
                _ => {}
            }
        }
        if flipped {
            self.compute_basic_values();
        }
        true
    }

    fn dual_simplex(&mut self, max_iterations: u64, deadline: Option<Instant>, start_iter: u64) -> DualEnd {
        let m = self.m;
        let cap = self.iterations + 4 * (self.n + m) as u64;
        let mut cands: Vec<(usize, f64, f64)> = Vec::new();
        loop {
            if self.iterations - start_iter >= max_iterations {
                return DualEnd::Stopped(LpStatus::IterationLimit);
            }
            if self.iterations >= cap {
                return DualEnd::GiveUp;
            }
            if self.iterations % 64 == 0 {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        return DualEnd::Stopped(LpStatus::TimeLimit);
                    }
                }
            }
            if self.lu.as_ref().map_or(true, |lu| lu.num_etas() >= REFACTOR_EVERY) {
                self.refactor();
            }

            let mut leave: Option<(usize, f64)> = None;
            for p in 0..m {
                let b = self.head[p];
                let viol = (self.lo[b] - self.x[b]).max(self.x[b] - self.hi[b]);
                if viol > PRIMAL_TOL && leave.map_or(true, |(_, v)| viol > v) {
                    leave = Some((p, viol));
                }
            }
            let Some((r, _)) = leave else { return DualEnd::Done };
            let b = self.head[r];
            let up = self.x[b] < self.lo[b];
            let target = if up { self.lo[b] } else { self.hi[b] };

            self.load_basic_costs();
            self.price(false);
            self.work_pos.clear();
            self.work_pos.resize(m, 0.0);
            self.work_pos[r] = 1.0;
            self.lu.as_ref().expect("factor").btran(&mut self.work_pos, &mut self.rho);
            let mut row_alpha = std::mem::take(&mut self.work_row);
            Self::transpose_product(&self.rows, self.n, &self.rho, &mut row_alpha);

            cands.clear();
            for j in 0..self.n + m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let a_rj = row_alpha[j];
                if a_rj.abs() < self.pivot_tol.max(1e-9) {
                    continue;
                }
                let dir = if st == VarStatus::Lower { 1.0 } else { -1.0 };
                // x_b moves by −a_rj per unit of x_j
                let moves_b = -a_rj * dir;
                if (up && moves_b <= 0.0) || (!up && moves_b >= 0.0) {
                    continue;
                }
                let slack = (self.dj[j] * dir).max(0.0);
                cands.push((j, slack, a_rj.abs()));
            }
            self.work_row = row_alpha;
            if cands.is_empty() {
                if self.lu.as_ref().map_or(0, LuFactor::num_etas) > 0 {
                    self.refactor();
                    continue;
                }
                return DualEnd::Infeasible;
            }
            let bound = cands
                .iter()
                .map(|&(_, slack, a)| (slack + DUAL_TOL) / a)
                .fold(f64::INFINITY, f64::min);
            let mut best: Option<(usize, f64)> = None;
            for &(j, slack, a) in &cands {
                if slack / a <= bound && best.map_or(true, |(_, ba)| a > ba) {
                    best = Some((j, a));
                }
            }
            let (q, _) = best.expect("the minimizer passes its own bound");

            self.work_row.clear();
            self.work_row.resize(m, 0.0);
            for &(i, a) in &self.cols[q] {
                self.work_row[i] = a;
            }
            self.lu.as_ref().expect("factor").ftran(&mut self.work_row, &mut self.alpha);
            let pivot = self.alpha[r];
            if pivot.abs() < self.pivot_tol.max(1e-9) {
                if self.lu.as_ref().map_or(0, LuFactor::num_etas) > 0 {
                    self.refactor();
                    continue;
                }
                return DualEnd::GiveUp;
            }
            let delta = (self.x[b] - target) / pivot;
            self.x[q] += delta;
            for p in 0..m {
                let a = self.alpha[p];
                if a != 0.0 {
                    self.x[self.head[p]] -= a * delta;
                }
            }
            self.x[b] = target;
            self.status[b] = if up { VarStatus::Lower } else { VarStatus::Upper };
            self.status[q] = VarStatus::Basic;
            self.head[r] = q;
            self.lu.as_mut().expect("factor").push_eta(r, &self.alpha);
            self.iterations += 1;
        }
    }

    fn solve_without_rows(&mut self) -> LpStatus {
        for j in 0..self.n {
            let c = self.cost[j];
            let target = if c < 0.0 { self.hi[j] } else { self.lo[j] };
            if !target.is_finite() {
                if c != 0.0 {
                    return LpStatus::Unbounded;
                }
                continue;
            }
            self.status[j] = if c < 0.0 { VarStatus::Upper } else { VarStatus::Lower };
            self.x[j] = target;
        }
        LpStatus::Optimal
    }

    fn apply_move(&mut self, q: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for p in 0..self.m {
            let a = self.alpha[p];
            if a != 0.0 {
                self.x[self.head[p]] -= dir * a * theta;
            }
        }
    }

    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Step {
        let range = self.hi[q] - self.lo[q];
        // candidate: (pos, dist, |rate|, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for p in 0..self.m {
            let a = self.alpha[p];
            if a.abs() < self.pivot_tol {
                continue;
            }
            let b = self.head[p];
            let rate = -dir * a;
            let (xb, lo, hi) = (self.x[b], self.lo[b], self.hi[b]);
            let hit = if xb < lo - PRIMAL_TOL {
                (rate > 0.0).then(|| (lo - xb, false))
            } else if xb > hi + PRIMAL_TOL {
                (rate < 0.0).then(|| (xb - hi, true))
            } else if rate < 0.0 {
                lo.is_finite().then(|| ((xb - lo).max(0.0), false))
            } else {
                hi.is_finite().then(|| ((hi - xb).max(0.0), true))
            };
            if let Some((dist, to_upper)) = hit {
                cands.push((p, dist, rate.abs(), to_upper));
            }
        }
        if cands.is_empty() {
            return if range.is_finite() { Step::Flip(range) } else { Step::Unbounded };
        }
        if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for &(p, dist, rate, up) in &cands {
                let t = dist / rate;
                let better = match best {
                    None => true,
                    Some((bp, bt, _)) => t < bt || (t == bt && self.head[p] < self.head[bp]),
                };
                if better {
                    best = Some((p, t, up));
                }
            }
            let (pos, theta, to_upper) = best.expect("nonempty");
            if range <= theta {
                return Step::Flip(range);
            }
            return Step::Pivot { pos, theta, to_upper };
        }
        let bound = cands
            .iter()
            .map(|&(_, dist, rate, _)| (dist + PRIMAL_TOL) / rate)
            .fold(f64::INFINITY, f64::min);
        if range <= bound {
            return Step::Flip(range);
        }
        let mut best: Option<(usize, f64, f64, bool)> = None;
        for &(p, dist, rate, up) in &cands {
            let t = dist / rate;
            if t > bound {
                continue;
            }
            let size = self.alpha[p].abs();
            if best.map_or(true, |(_, _, bs, _)| size > bs) {
                best = Some((p, t, size, up));
            }
        }
        let (pos, theta, _, to_upper) = best.expect("the minimizer passes its own bound");
        Step::Pivot {
            pos,
            theta: theta.max(0.0),
            to_upper,
        }
    }
}

enum Step {
    Unbounded,
    Flip(f64),
    Pivot { pos: usize, theta: f64, to_upper: bool },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine(cost: &[f64], bounds: &[(f64, f64)]) -> LpEngine {
        LpEngine::new(
            cost.to_vec(),
            bounds.iter().map(|b| b.0).collect(),
            bounds.iter().map(|b| b.1).collect(),
            1e-9,
        )
    }

    #[test]
    fn single_variable_bound() {
        let mut lp = engine(&[-1.0], &[(0.0, 10.0)]);
        lp.add_row(&[(0, 1.0)], f64::NEG_INFINITY, 3.0);
        assert_eq!(lp.solve(1000, None), LpStatus::Optimal);
        assert!((lp.values()[0] - 3.0).abs() < 1e-9);
        assert!((lp.objective() + 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = engine(&[1.0], &[(0.0, 10.0)]);
        lp.add_row(&[(0, 1.0)], f64::NEG_INFINITY, 1.0);
        lp.add_row(&[(0, 1.0)], 2.0, f64::INFINITY);
        assert_eq!(lp.solve(1000, None), LpStatus::Infeasible);
    }

    #[test]
    fn textbook_two_variable_lp() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = engine(&[-3.0, -5.0], &[(0.0, 100.0), (0.0, 100.0)]);
        lp.add_row(&[(0, 1.0)], f64::NEG_INFINITY, 4.0);
        lp.add_row(&[(1, 2.0)], f64::NEG_INFINITY, 12.0);
        lp.add_row(&[(0, 3.0), (1, 2.0)], f64::NEG_INFINITY, 18.0);
        assert_eq!(lp.solve(1000, None), LpStatus::Optimal);
        assert!((lp.values()[0] - 2.0).abs() < 1e-9);
        assert!((lp.values()[1] - 6.0).abs() < 1e-9);
        assert!((lp.objective() + 36.0).abs() < 1e-9);
    }

    #[test]
    fn warm_start_after_bound_change() {
        let mut lp = engine(&[-3.0, -5.0], &[(0.0, 100.0), (0.0, 100.0)]);
        lp.add_row(&[(0, 1.0)], f64::NEG_INFINITY, 4.0);
        lp.add_row(&[(1, 2.0)], f64::NEG_INFINITY, 12.0);
        lp.add_row(&[(0, 3.0), (1, 2.0)], f64::NEG_INFINITY, 18.0);
        assert_eq!(lp.solve(1000, None), LpStatus::Optimal);
        let saved = lp.basis();
        lp.set_bounds(1, 0.0, 3.0);
        assert_eq!(lp.solve(1000, None), LpStatus::Optimal);
        assert!((lp.objective() + 27.0).abs() < 1e-9);
        lp.set_bounds(1, 0.0, 100.0);
        lp.load_basis(&saved);
        assert_eq!(lp.solve(1000, None), LpStatus::Optimal);
        assert!((lp.objective() + 36.0).abs() < 1e-9);
    }
}
