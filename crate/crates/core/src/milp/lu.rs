//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! The basis is given column by column; column `pos` holds `(row, value)`
//! pairs. Elimination is right-looking: the pivot column is the active
//! column with the fewest active entries, the pivot row within it is the
//! sparsest row among entries passing a threshold test.

const THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Singular {
    /// basis positions left without a pivot
    pub positions: Vec<usize>,
    /// rows left without a pivot (same length as `positions`)
    pub rows: Vec<usize>,
}

struct Eta {
    pivot: usize,
    pivot_value: f64,
    start: usize,
    end: usize,
}

pub(crate) struct LuFactor {
    m: usize,
    l_ops: Vec<(u32, u32, f64)>,
    u_row: Vec<usize>,
    u_col: Vec<usize>,
    u_piv: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    etas: Vec<Eta>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

impl LuFactor {
    pub fn factor<'a, F>(m: usize, column: F) -> Result<Self, Singular>
    where
        F: Fn(usize) -> &'a [(usize, f64)],
    {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut colpat: Vec<Vec<usize>> = vec![Vec::new(); m];
        for pos in 0..m {
            for &(i, v) in column(pos) {
                if v != 0.0 {
                    rows[i].push((pos, v));
                    colpat[pos].push(i);
                }
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); m + 1];
        for pos in (0..m).rev() {
            buckets[colpat[pos].len()].push(pos);
        }
        let mut lowest = 0usize;
        let mut work = vec![usize::MAX; m];
        let mut singular_cols = Vec::new();

        let mut lu = LuFactor {
            m,
            l_ops: Vec::new(),
            u_row: Vec::with_capacity(m),
            u_col: Vec::with_capacity(m),
            u_piv: Vec::with_capacity(m),
            u_start: Vec::with_capacity(m + 1),
            u_idx: Vec::new(),
            u_val: Vec::new(),
            etas: Vec::new(),
            eta_idx: Vec::new(),
            eta_val: Vec::new(),
        };
        lu.u_start.push(0);

        let mut remaining = m;
        while remaining > 0 {
            let c = loop {
                if lowest > m {
                    break None;
                }
                match buckets[lowest].pop() {
                    Some(c) if col_active[c] && colpat[c].len() == lowest => break Some(c),
                    Some(_) => {}
                    None => lowest += 1,
                }
            };
            let Some(c) = c else { break };
            remaining -= 1;
            col_active[c] = false;

            let mut max_abs = 0.0f64;
            for &i in &colpat[c] {
                max_abs = max_abs.max(entry(&rows[i], c).abs());
            }
            if colpat[c].is_empty() || max_abs < SINGULAR_TOL {
                singular_cols.push(c);
                continue;
            }
            let mut best: Option<(usize, usize)> = None;
            for &i in &colpat[c] {
                if entry(&rows[i], c).abs() < THRESHOLD * max_abs {
                    continue;
                }
                let len = rows[i].len();
                if best.map_or(true, |(bl, bi)| len < bl || (len == bl && i < bi)) {
                    best = Some((len, i));
                }
            }
            let (_, r) = best.expect("threshold admits the maximum");
            let piv = entry(&rows[r], c);
            let pivot_row: Vec<(usize, f64)> = rows[r].iter().copied().filter(|&(j, _)| j != c).collect();

            let targets: Vec<usize> = colpat[c].iter().copied().filter(|&i| i != r).collect();
            for i in targets {
                let row = &mut rows[i];
                let at = row.iter().position(|&(j, _)| j == c).expect("pattern entry");
                let l = row[at].1 / piv;
                row.swap_remove(at);
                for (k, &(j, _)) in row.iter().enumerate() {
                    work[j] = k;
                }
                for &(j, v) in &pivot_row {
                    if work[j] != usize::MAX {
                        row[work[j]].1 -= l * v;
                    } else {
                        row.push((j, -l * v));
                        colpat[j].push(i);
                        buckets[colpat[j].len()].push(j);
                    }
                }
                for &(j, _) in row.iter() {
                    work[j] = usize::MAX;
                }
                lu.l_ops.push((i as u32, r as u32, l));
            }

            for &(j, v) in &pivot_row {
                let pat = &mut colpat[j];
                if let Some(at) = pat.iter().position(|&i| i == r) {
                    pat.swap_remove(at);
                }
                if col_active[j] {
                    let len = pat.len();
                    buckets[len].push(j);
                    lowest = lowest.min(len);
                }
                lu.u_idx.push(j);
                lu.u_val.push(v);
            }
            row_active[r] = false;
            lu.u_row.push(r);
            lu.u_col.push(c);
            lu.u_piv.push(piv);
            lu.u_start.push(lu.u_idx.len());
        }

        if !singular_cols.is_empty() {
            let rows: Vec<usize> = (0..m).filter(|&i| row_active[i]).collect();
            singular_cols.sort_unstable();
            debug_assert_eq!(rows.len(), singular_cols.len());
            return Err(Singular {
                positions: singular_cols,
                rows,
            });
        }
        Ok(lu)
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = b`. `b` is indexed by row and is overwritten;
    /// the result is indexed by basis position.
    pub fn ftran(&self, b: &mut [f64], out: &mut [f64]) {
        for &(i, r, l) in &self.l_ops {
            let br = b[r as usize];
            if br != 0.0 {
                b[i as usize] -= l * br;
            }
        }
        for k in (0..self.u_row.len()).rev() {
            let mut s = b[self.u_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[e] * out[self.u_idx[e]];
            }
            out[self.u_col[k]] = s / self.u_piv[k];
        }
        for eta in &self.etas {
            let vr = out[eta.pivot] / eta.pivot_value;
            out[eta.pivot] = vr;
            if vr != 0.0 {
                for e in eta.start..eta.end {
                    out[self.eta_idx[e]] -= self.eta_val[e] * vr;
                }
            }
        }
    }

    /// Solves `yᵀ B = cᵀ`. `c` is indexed by basis position and is
    /// overwritten; the result is indexed by row.
    pub fn btran(&self, c: &mut [f64], y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pivot];
            for e in eta.start..eta.end {
                s -= self.eta_val[e] * c[self.eta_idx[e]];
            }
            c[eta.pivot] = s / eta.pivot_value;
        }
        for k in 0..self.u_row.len() {
            let u = c[self.u_col[k]] / self.u_piv[k];
            y[self.u_row[k]] = u;
            if u != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[e]] -= u * self.u_val[e];
                }
            }
        }
        for &(i, r, l) in self.l_ops.iter().rev() {
            let yi = y[i as usize];
            if yi != 0.0 {
                y[r as usize] -= l * yi;
            }
        }
    }

    /// Records the replacement of basis position `pivot` by a column whose
    /// FTRAN image is `alpha`.
    pub fn push_eta(&mut self, pivot: usize, alpha: &[f64]) {
        debug_assert_eq!(alpha.len(), self.m);
        let start = self.eta_idx.len();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pivot && a != 0.0 {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.etas.push(Eta {
            pivot,
            pivot_value: alpha[pivot],
            start,
            end: self.eta_idx.len(),
        });
    }
}

fn entry(row: &[(usize, f64)], col: usize) -> f64 {
    row.iter().find(|&&(j, _)| j == col).map_or(0.0, |&(_, v)| v)
}
