//! Dense two-phase primal simplex for small LPs.

use crate::milp::{MilpBlock, Sense};

const EPS: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

/// How an original variable is written in terms of non-negative columns.
struct Substitution {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct Tableau {
    /// `m` constraint rows followed by the reduced-cost row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n: usize,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f.abs() > 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let m = self.m();
        let mut z = vec![0.0; self.n + 1];
        z[..self.n].copy_from_slice(cost);
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (zj, tj) in z.iter_mut().zip(&self.t[i]) {
                    *zj -= cb * tj;
                }
            }
        }
        self.t[m] = z;
    }

    /// Minimizes the current cost row; `false` when unbounded.
    fn optimize(&mut self, allowed: &dyn Fn(usize) -> bool) -> bool {
        let m = self.m();
        let mut stalled = 0usize;
        let mut last = f64::INFINITY;
        loop {
            let bland = stalled > 50;
            let z = &self.t[m];
            let mut enter = None;
            let mut best = -EPS;
            for j in 0..self.n {
                if z[j] < best && allowed(j) {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = z[j];
                }
            }
            let Some(c) = enter else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > EPS {
                    let ratio = self.t[i][self.n] / a;
                    let better = match leave {
                        None => true,
                        Some((l, r)) => ratio < r - EPS || (ratio <= r + EPS && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            self.pivot(r, c);
            let obj = -self.t[m][self.n];
            if obj < last - 1e-12 {
                last = obj;
                stalled = 0;
            } else {
                stalled += 1;
            }
        }
    }
}

/// Minimizes the block's objective over its rows with the given bounds,
/// ignoring integrality.
pub fn solve_lp(block: &MilpBlock, lower: &[f64], upper: &[f64]) -> LpOutcome {
    let nv = block.num_vars();
    let mut subs = Vec::with_capacity(nv);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..nv {
        let (lo, hi) = (lower[j], upper[j]);
        if lo > hi + FEAS_TOL {
            return LpOutcome::Infeasible;
        }
        let s = if lo.is_finite() {
            if hi.is_finite() {
                bound_rows.push((ncols, (hi - lo).max(0.0)));
            }
            ncols += 1;
            Substitution {
                offset: lo,
                cols: vec![(ncols - 1, 1.0)],
            }
        } else if hi.is_finite() {
            ncols += 1;
            Substitution {
                offset: hi,
                cols: vec![(ncols - 1, -1.0)],
            }
        } else {
            ncols += 2;
            Substitution {
                offset: 0.0,
                cols: vec![(ncols - 2, 1.0), (ncols - 1, -1.0)],
            }
        };
        subs.push(s);
    }

    // Rows over the substituted columns: (coefficients, sense, rhs).
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for r in block.rows() {
        let mut a = vec![0.0; ncols];
        let mut rhs = r.rhs;
        for &(v, c) in &r.terms {
            let s = &subs[v.0];
            rhs -= c * s.offset;
            for &(col, sign) in &s.cols {
                a[col] += c * sign;
            }
        }
        rows.push((a, r.sense, rhs));
    }
    for (col, ub) in bound_rows {
        let mut a = vec![0.0; ncols];
        a[col] = 1.0;
        rows.push((a, Sense::Le, ub));
    }
    let mut cost = vec![0.0; ncols];
    let mut const_obj = block.offset();
    for (j, v) in block.vars().iter().enumerate() {
        const_obj += v.cost * subs[j].offset;
        for &(col, sign) in &subs[j].cols {
            cost[col] += v.cost * sign;
        }
    }

    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|v| *v = -*v);
            row.2 = -row.2;
            row.1 = match row.1 {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let n = ncols + n_slack + n_art;
    let art_start = ncols + n_slack;
    let mut t = vec![vec![0.0; n + 1]; m + 1];
    let mut basis = vec![0; m];
    let (mut next_slack, mut next_art) = (ncols, art_start);
    for (i, (a, sense, rhs)) in rows.into_iter().enumerate() {
        t[i][..ncols].copy_from_slice(&a);
        t[i][n] = rhs;
        match sense {
            Sense::Le => {
                t[i][next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                t[i][next_slack] = -1.0;
                next_slack += 1;
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, n };

    if n_art > 0 {
        let phase1: Vec<f64> = (0..n).map(|j| if j >= art_start { 1.0 } else { 0.0 }).collect();
        tab.set_costs(&phase1);
        tab.optimize(&|_| true);
        if -tab.t[m][n] > FEAS_TOL * (1.0 + m as f64) {
            return LpOutcome::Infeasible;
        }
        for i in 0..m {
            if tab.basis[i] >= art_start {
                if let Some(c) = (0..art_start).find(|&j| tab.t[i][j].abs() > EPS) {
                    tab.pivot(i, c);
                }
            }
        }
    }
    let mut full_cost = cost.clone();
    full_cost.resize(n, 0.0);
    tab.set_costs(&full_cost);
    if !tab.optimize(&|j| j < art_start) {
        return LpOutcome::Unbounded;
    }

    let mut u = vec![0.0; n];
    for i in 0..m {
        u[tab.basis[i]] = tab.t[i][n];
    }
    let x: Vec<f64> = subs
        .iter()
        .map(|s| s.offset + s.cols.iter().map(|&(c, sign)| sign * u[c]).sum::<f64>())
        .collect();
    let objective = const_obj + cost.iter().zip(&u).map(|(c, v)| c * v).sum::<f64>();
    LpOutcome::Optimal { x, objective }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Tag;

    fn bounds(b: &MilpBlock) -> (Vec<f64>, Vec<f64>) {
        (b.vars().iter().map(|v| v.lower).collect(), b.vars().iter().map(|v| v.upper).collect())
    }

    #[test]
    fn textbook_lp() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36.
        let mut b = MilpBlock::new();
        let x = b.nonneg("x");
        let y = b.nonneg("y");
        b.le(vec![(x, 1.0)], 4.0, Tag::Fixing);
        b.le(vec![(y, 2.0)], 12.0, Tag::Fixing);
        b.le(vec![(x, 3.0), (y, 2.0)], 18.0, Tag::Fixing);
        b.set_cost(x, -3.0);
        b.set_cost(y, -5.0);
        let (lo, hi) = bounds(&b);
        match solve_lp(&b, &lo, &hi) {
            LpOutcome::Optimal { x: v, objective } => {
                assert!((objective + 36.0).abs() < 1e-9);
                assert!((v[0] - 2.0).abs() < 1e-9 && (v[1] - 6.0).abs() < 1e-9);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn free_and_upper_bounded_variables() {
        // min |x - 2| style: x free, t ≥ x − 2, t ≥ 2 − x, y ≤ −1 with cost −y.
        let mut b = MilpBlock::new();
        let x = b.free("x");
        let t = b.nonneg("t");
        let y = b.continuous("y", f64::NEG_INFINITY, -1.0);
        b.ge(vec![(t, 1.0), (x, -1.0)], -2.0, Tag::Fixing);
        b.ge(vec![(t, 1.0), (x, 1.0)], 2.0, Tag::Fixing);
        b.equal(vec![(x, 1.0), (y, 1.0)], 0.5, Tag::Fixing);
        b.set_cost(t, 1.0);
        b.set_cost(y, -1.0);
        let (lo, hi) = bounds(&b);
        let LpOutcome::Optimal { x: v, objective } = solve_lp(&b, &lo, &hi) else { panic!() };
        // y = -1 ⇒ x = 1.5, t = 0.5, objective 1.5.
        assert!((objective - 1.5).abs() < 1e-9, "{objective} {v:?}");
    }

    #[test]
    fn equality_redundancy_handled() {
        let mut b = MilpBlock::new();
        let x = b.nonneg("x");
        let y = b.nonneg("y");
        b.equal(vec![(x, 1.0), (y, 1.0)], 2.0, Tag::Fixing);
        b.equal(vec![(x, 2.0), (y, 2.0)], 4.0, Tag::Fixing);
        b.set_cost(x, 1.0);
        let (lo, hi) = bounds(&b);
        let LpOutcome::Optimal { objective, .. } = solve_lp(&b, &lo, &hi) else { panic!() };
        assert!(objective.abs() < 1e-9);
    }
}
