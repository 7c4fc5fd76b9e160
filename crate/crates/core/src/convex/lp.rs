//! Dense two-phase tableau simplex.
//!
//! Pricing is Dantzig's most-negative reduced cost; after a run of
//! degenerate pivots the solver switches to Bland's smallest-index rule until
//! the objective moves again, which rules out cycling. The leaving row is the
//! minimum ratio with ties broken towards the smallest basic index.
//!
//! The optimal basis also yields a dual point (read off the reduced costs of
//! the initial identity columns), and `Optimal` is only reported when that
//! point is dual feasible and closes the duality gap to within `tol`.

use super::{LinearProgram, SolveStatus, Status};

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-10;
const DEGENERATE_RUN: usize = 50;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lo + y`
    Shift { col: usize, lo: f64 },
    /// `x = hi - y`
    Mirror { col: usize, hi: f64 },
    /// `x = y+ - y-`
    Split { col: usize },
}

struct Tableau {
    rows: usize,
    /// Columns excluding the rhs.
    cols: usize,
    /// `rows x (cols + 1)` row-major, last column is the rhs.
    data: Vec<f64>,
    /// Reduced costs, last entry is minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.data[r * w + c];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Run simplex iterations on the current cost row. Columns with
    /// `blocked[c]` never enter.
    fn optimize(&mut self, blocked: &[bool]) -> Status {
        let mut degenerate = 0usize;
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Status::IterLimit;
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -COST_EPS;
            for c in 0..self.cols {
                if blocked[c] {
                    continue;
                }
                let d = self.cost[c];
                if d < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else {
                return Status::Optimal;
            };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, c);
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                        if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Status::Unbounded;
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
    }
}

/// Solve `lp` to optimality with duality-gap tolerance `tol`.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> SolveStatus {
    let n = lp.num_vars();
    if lp.validate().is_err() {
        return SolveStatus::failed(Status::NumericalFailure, n, 0);
    }
    if lp.lower.iter().zip(&lp.upper).any(|(lo, hi)| lo > hi) {
        return SolveStatus::failed(Status::Infeasible, n, 0);
    }

    // Map every original variable onto non-negative standard-form columns.
    let mut maps = Vec::with_capacity(n);
    let mut ny = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ny, lo });
            if hi.is_finite() {
                bound_rows.push((ny, hi - lo));
            }
            ny += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Mirror { col: ny, hi });
            ny += 1;
        } else {
            maps.push(VarMap::Split { col: ny });
            ny += 2;
        }
    }

    let transform = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; ny];
        let mut rhs = rhs;
        for (a, m) in row.iter().zip(&maps) {
            match *m {
                VarMap::Shift { col, lo } => {
                    out[col] += a;
                    rhs -= a * lo;
                }
                VarMap::Mirror { col, hi } => {
                    out[col] -= a;
                    rhs -= a * hi;
                }
                VarMap::Split { col } => {
                    out[col] += a;
                    out[col + 1] -= a;
                }
            }
        }
        (out, rhs)
    };

    // (coefficients, rhs, is_inequality)
    let mut std_rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for (row, b) in lp.ineq_rows.iter().zip(&lp.ineq_rhs) {
        let (r, b) = transform(row, *b);
        std_rows.push((r, b, true));
    }
    for &(col, width) in &bound_rows {
        let mut r = vec![0.0; ny];
        r[col] = 1.0;
        std_rows.push((r, width, true));
    }
    for (row, d) in lp.eq_rows.iter().zip(&lp.eq_rhs) {
        let (r, d) = transform(row, *d);
        std_rows.push((r, d, false));
    }
    let (cost_y, offset) = transform(&lp.objective, 0.0);
    let offset = -offset;

    let rows = std_rows.len();
    let n_slack = std_rows.iter().filter(|r| r.2).count();
    // Rows that need an artificial: equalities and negated inequalities.
    let needs_art: Vec<bool> = std_rows.iter().map(|(_, b, ineq)| !*ineq || *b < 0.0).collect();
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let cols = ny + n_slack + n_art;
    let w = cols + 1;

    let mut t = Tableau {
        rows,
        cols,
        data: vec![0.0; rows * w],
        cost: vec![0.0; w],
        basis: vec![0; rows],
        pivots: 0,
    };
    let mut identity_col = vec![0usize; rows];
    let mut sign = vec![1.0; rows];
    let mut blocked = vec![false; cols];
    let mut slack = ny;
    let mut art = ny + n_slack;
    for (i, (coefs, b, ineq)) in std_rows.iter().enumerate() {
        let s = if *b < 0.0 { -1.0 } else { 1.0 };
        sign[i] = s;
        let row = &mut t.data[i * w..(i + 1) * w];
        for (dst, a) in row.iter_mut().zip(coefs) {
            *dst = s * a;
        }
        row[cols] = s * b;
        if *ineq {
            row[slack] = s;
            if !needs_art[i] {
                t.basis[i] = slack;
                identity_col[i] = slack;
            }
            slack += 1;
        }
        if needs_art[i] {
            row[art] = 1.0;
            t.basis[i] = art;
            identity_col[i] = art;
            blocked[art] = true;
            art += 1;
        }
    }

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        for c in ny + n_slack..cols {
            t.cost[c] = 1.0;
        }
        for i in 0..rows {
            if needs_art[i] {
                for c in 0..w {
                    t.cost[c] -= t.data[i * w + c];
                }
            }
        }
        let free = vec![false; cols];
        match t.optimize(&free) {
            Status::Optimal => {}
            Status::IterLimit => return SolveStatus::failed(Status::IterLimit, n, t.pivots),
            _ => return SolveStatus::failed(Status::NumericalFailure, n, t.pivots),
        }
        let infeasibility = -t.cost[cols];
        let scale = 1.0 + (0..rows).map(|i| t.rhs(i).abs()).fold(0.0, f64::max);
        if infeasibility > 1e-9 * scale {
            return SolveStatus::failed(Status::Infeasible, n, t.pivots);
        }
        // Drive zero-level artificials out of the basis where possible. Rows
        // with no usable pivot are redundant and keep their artificial at 0.
        for r in 0..rows {
            if t.basis[r] >= ny + n_slack {
                if let Some(c) = (0..ny + n_slack).find(|&c| t.at(r, c).abs() > PIVOT_EPS) {
                    t.pivot(r, c);
                }
            }
        }
    }

    // Phase 2.
    t.cost.iter_mut().for_each(|v| *v = 0.0);
    t.cost[..ny].copy_from_slice(&cost_y);
    for r in 0..rows {
        let cb = if t.basis[r] < ny { cost_y[t.basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for c in 0..w {
                t.cost[c] -= cb * t.data[r * w + c];
            }
        }
    }
    match t.optimize(&blocked) {
        Status::Optimal => {}
        other => return SolveStatus::failed(other, n, t.pivots),
    }

    let mut y = vec![0.0; cols];
    for r in 0..rows {
        y[t.basis[r]] = t.rhs(r).max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, lo } => lo + y[col],
            VarMap::Mirror { col, hi } => hi - y[col],
            VarMap::Split { col } => y[col] - y[col + 1],
        })
        .collect();
    let objective: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    // Dual certificate of the sign-normalized system.
    let dual: Vec<f64> = (0..rows).map(|r| -t.cost[identity_col[r]]).collect();
    let dual_objective = (0..rows).map(|r| sign[r] * std_rows[r].1 * dual[r]).sum::<f64>() + offset;
    let dual_infeasibility = (0..ny + n_slack).map(|c| (-t.cost[c]).max(0.0)).fold(0.0, f64::max);
    let gap = (objective - dual_objective).abs();
    let residual = lp.primal_residual(&x);
    let kkt = gap.max(dual_infeasibility).max(residual);
    let scale = 1.0f64.max(objective.abs());
    let status = if kkt <= tol * scale {
        Status::Optimal
    } else {
        Status::NumericalFailure
    };
    SolveStatus {
        status,
        objective,
        x,
        kkt_residual: kkt,
        iterations: t.pivots,
        dual_objective: Some(dual_objective),
        stage_objectives: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_variable_bounds() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.set_bounds(0, 3.0, 10.0);
        let s = solve_lp(&lp, 1e-9);
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.x[0], 3.0);
    }

    #[test]
    fn lower_bound_as_row() {
        // min x s.t. -x <= -3, x <= 10
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_le(vec![-1.0], -3.0).add_le(vec![1.0], 10.0);
        let s = solve_lp(&lp, 1e-9);
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.x[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(s.dual_objective.unwrap(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn association_toy() {
        // vars (mu, a): min mu s.t. 2a - mu <= 0, (1 - a) - mu <= 0, a in [0,1].
        // Pure assignments give mu = 2 (a=1) or mu = 1 (a=0); the relaxation
        // balances at a = 1/3, mu = 2/3.
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.set_bounds(0, 0.0, f64::INFINITY).set_bounds(1, 0.0, 1.0);
        lp.add_le(vec![-1.0, 2.0], 0.0).add_le(vec![-1.0, -1.0], -1.0);
        let s = solve_lp(&lp, 1e-9);
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.x[0], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(s.x[1], 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.set_bounds(0, 11.0, f64::INFINITY);
        lp.add_le(vec![1.0], 10.0);
        assert_eq!(solve_lp(&lp, 1e-9).status, Status::Infeasible);

        let mut lp = LinearProgram::new(vec![1.0]);
        lp.set_bounds(0, 5.0, 4.0);
        assert_eq!(solve_lp(&lp, 1e-9).status, Status::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add_le(vec![-1.0], 0.0);
        assert_eq!(solve_lp(&lp, 1e-9).status, Status::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + 2y s.t. x + y = 1, x - y <= 3, x, y free, y >= -5 via row.
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY)
            .set_bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_eq(vec![1.0, 1.0], 1.0).add_le(vec![1.0, -1.0], 3.0);
        let s = solve_lp(&lp, 1e-9);
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.x[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(s.x[1], -1.0, max_relative = 1e-12);
        assert_relative_eq!(s.objective, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn upper_bounded_only_variable() {
        // max x (min -x) with x <= 4 and no lower bound.
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, 4.0);
        let s = solve_lp(&lp, 1e-9);
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.x[0], 4.0);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_eq(vec![1.0, 2.0], 2.0).add_eq(vec![2.0, 4.0], 4.0);
        let s = solve_lp(&lp, 1e-9);
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.objective, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn deterministic() {
        let mut lp = LinearProgram::new(vec![1.0, -1.0, 0.5]);
        lp.add_le(vec![1.0, 1.0, 1.0], 4.0)
            .add_le(vec![-1.0, 2.0, 0.0], 3.0)
            .add_eq(vec![0.0, 1.0, 1.0], 2.0);
        assert_eq!(solve_lp(&lp, 1e-9), solve_lp(&lp, 1e-9));
    }
}
