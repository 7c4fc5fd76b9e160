//! Log-barrier path following with damped Newton centering.
//!
//! For barrier parameter `t` the centering problem is
//!
//! ```text
//! min  t c.x - sum_i log(-g_i(x)) - sum_j log(x_j - lo_j) - sum_j log(hi_j - x_j)
//! ```
//!
//! solved by Newton's method with a backtracking line search that first
//! restores strict feasibility and then enforces Armijo decrease. `t` grows
//! geometrically until the duality-gap bound `m / t` drops below the
//! tolerance. A start point that violates a constraint is repaired by a
//! phase-1 program `min s  s.t.  g_i(x) <= s` run on the same machinery.

use nalgebra::{DMatrix, DVector};

use super::{ConvexProgram, SmoothConstraint, SolveStatus, Status};

/// Newton decrement below which a step that no longer lowers the barrier
/// objective beyond rounding noise ends centering.
const STALL_DECREMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierOptions {
    /// Stop once `m / t <= tol`.
    pub tol: f64,
    pub t0: f64,
    pub growth: f64,
    /// Centering stops when `lambda^2 / 2` falls below this.
    pub newton_tol: f64,
    /// Armijo fraction.
    pub alpha: f64,
    /// Backtracking factor.
    pub beta: f64,
    /// Budget of Newton steps across all stages and both phases.
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            t0: 1.0,
            growth: 10.0,
            newton_tol: 1e-10,
            alpha: 0.25,
            beta: 0.5,
            max_newton: 2_000,
        }
    }
}

/// Solve `prog` from `x0` with the default schedule, gap tolerance `tol` and
/// at most `max_newton` Newton steps.
pub fn solve_convex(prog: &ConvexProgram, x0: &[f64], tol: f64, max_newton: usize) -> SolveStatus {
    solve_convex_with(
        prog,
        x0,
        &BarrierOptions {
            tol,
            max_newton,
            ..Default::default()
        },
    )
}

pub fn solve_convex_with(prog: &ConvexProgram, x0: &[f64], opts: &BarrierOptions) -> SolveStatus {
    let n = prog.dim();
    if x0.len() != n || prog.lower.len() != n || prog.upper.len() != n || !(opts.tol > 0.0) {
        return SolveStatus::failed(Status::NumericalFailure, n, 0);
    }
    if prog.lower.iter().zip(&prog.upper).any(|(lo, hi)| lo >= hi) {
        return SolveStatus::failed(Status::Infeasible, n, 0);
    }

    let mut x = interior_start(x0, &prog.lower, &prog.upper);
    let mut newton_steps = 0usize;

    let gmax = prog.constraints.iter().map(|c| c.value(&x)).fold(f64::NEG_INFINITY, f64::max);
    if !gmax.is_finite() && !prog.constraints.is_empty() {
        return SolveStatus::failed(Status::NumericalFailure, n, 0);
    }
    if gmax >= 0.0 {
        let mut objective = vec![0.0; n + 1];
        objective[n] = 1.0;
        let mut lower = prog.lower.clone();
        let mut upper = prog.upper.clone();
        lower.push(-(1.0 + gmax.abs()));
        upper.push(f64::INFINITY);
        let phase1 = Problem {
            objective,
            constraints: &prog.constraints,
            lower,
            upper,
            slack: Some(n),
        };
        let mut xs = x.clone();
        xs.push(gmax + 1.0);
        let feasible = |z: &[f64]| prog.constraints.iter().all(|c| c.value(z) < 0.0);
        let run = follow_path(&phase1, &mut xs, opts, &mut newton_steps, Some(&feasible));
        match run {
            PathEnd::Stopped => {
                xs.truncate(n);
                x = xs;
            }
            PathEnd::Converged { .. } => return SolveStatus::failed(Status::Infeasible, n, newton_steps),
            PathEnd::Failed(status) => return SolveStatus::failed(status, n, newton_steps),
        }
    }

    let problem = Problem {
        objective: prog.objective.clone(),
        constraints: &prog.constraints,
        lower: prog.lower.clone(),
        upper: prog.upper.clone(),
        slack: None,
    };
    match follow_path(&problem, &mut x, opts, &mut newton_steps, None) {
        PathEnd::Converged { gap, stages } => {
            let objective = dot(&prog.objective, &x);
            let residual = prog.feasibility_residual(&x);
            let status = if gap <= opts.tol && residual <= opts.tol {
                Status::Optimal
            } else {
                Status::NumericalFailure
            };
            SolveStatus {
                status,
                objective,
                x,
                kkt_residual: gap,
                iterations: newton_steps,
                dual_objective: None,
                stage_objectives: stages,
            }
        }
        PathEnd::Stopped => unreachable!("no early stop in phase 2"),
        PathEnd::Failed(status) => {
            let mut out = SolveStatus::failed(status, n, newton_steps);
            out.x = x;
            out
        }
    }
}

/// Move `x0` strictly inside the box.
fn interior_start(x0: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x0.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&lo, &hi))| {
            let v = if v.is_finite() { v } else { 0.0 };
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => {
                    let margin = 1e-3 * (hi - lo);
                    if v <= lo || v >= hi {
                        v.clamp(lo + margin, hi - margin)
                    } else {
                        v
                    }
                }
                (true, false) if v <= lo => lo + 1e-3 * lo.abs().max(1.0),
                (false, true) if v >= hi => hi - 1e-3 * hi.abs().max(1.0),
                _ => v,
            }
        })
        .collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Problem<'a> {
    objective: Vec<f64>,
    constraints: &'a [Box<dyn SmoothConstraint>],
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Index of the phase-1 slack subtracted from every constraint.
    slack: Option<usize>,
}

enum PathEnd {
    Converged { gap: f64, stages: Vec<f64> },
    /// The caller's stop predicate fired.
    Stopped,
    Failed(Status),
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.objective.len()
    }

    fn num_barrier_terms(&self) -> usize {
        let bounds = self.lower.iter().filter(|v| v.is_finite()).count()
            + self.upper.iter().filter(|v| v.is_finite()).count();
        self.constraints.len() + bounds
    }

    #[inline]
    fn constraint_value(&self, c: &dyn SmoothConstraint, x: &[f64]) -> f64 {
        c.value(x) - self.slack.map_or(0.0, |s| x[s])
    }

    /// Barrier objective, or `None` outside the strict interior.
    fn value(&self, t: f64, x: &[f64]) -> Option<f64> {
        let mut phi = t * dot(&self.objective, x);
        for ((&v, &lo), &hi) in x.iter().zip(&self.lower).zip(&self.upper) {
            if lo.is_finite() {
                let d = v - lo;
                if !(d > 0.0) {
                    return None;
                }
                phi -= d.ln();
            }
            if hi.is_finite() {
                let d = hi - v;
                if !(d > 0.0) {
                    return None;
                }
                phi -= d.ln();
            }
        }
        for c in self.constraints {
            let g = self.constraint_value(c.as_ref(), x);
            if !(g < 0.0) {
                return None;
            }
            phi -= (-g).ln();
        }
        Some(phi)
    }

    fn gradient_hessian(&self, t: f64, x: &[f64], grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
        grad.fill(0.0);
        hess.fill(0.0);
        for (i, (&v, (&lo, &hi))) in x.iter().zip(self.lower.iter().zip(&self.upper)).enumerate() {
            grad[i] = t * self.objective[i];
            if lo.is_finite() {
                let d = v - lo;
                grad[i] -= 1.0 / d;
                hess[(i, i)] += 1.0 / (d * d);
            }
            if hi.is_finite() {
                let d = hi - v;
                grad[i] += 1.0 / d;
                hess[(i, i)] += 1.0 / (d * d);
            }
        }
        let mut gl = Vec::new();
        let mut hl = Vec::new();
        for c in self.constraints {
            let idx = c.support();
            let k = idx.len();
            gl.clear();
            gl.resize(k, 0.0);
            hl.clear();
            hl.resize(k * k, 0.0);
            let g = self.constraint_value(c.as_ref(), x);
            c.derivatives(x, &mut gl, &mut hl);
            let inv = -1.0 / g;
            let inv2 = inv * inv;
            for a in 0..k {
                grad[idx[a]] += inv * gl[a];
                for b in 0..k {
                    hess[(idx[a], idx[b])] += inv2 * gl[a] * gl[b] + inv * hl[a * k + b];
                }
            }
            if let Some(s) = self.slack {
                grad[s] -= inv;
                hess[(s, s)] += inv2;
                for a in 0..k {
                    hess[(idx[a], s)] -= inv2 * gl[a];
                    hess[(s, idx[a])] -= inv2 * gl[a];
                }
            }
        }
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let rhs = -grad;
    if let Some(ch) = hess.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    let scale = hess.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut shift = 1e-12 * scale;
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += shift;
        }
        if let Some(ch) = h.cholesky() {
            return Some(ch.solve(&rhs));
        }
        shift *= 10.0;
    }
    None
}

#[allow(clippy::type_complexity)]
fn follow_path(
    problem: &Problem<'_>,
    x: &mut [f64],
    opts: &BarrierOptions,
    newton_steps: &mut usize,
    stop: Option<&dyn Fn(&[f64]) -> bool>,
) -> PathEnd {
    let n = problem.dim();
    let m = problem.num_barrier_terms().max(1) as f64;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut trial = vec![0.0; n];
    let mut stages = Vec::new();
    let mut t = opts.t0;

    loop {
        // Centering.
        loop {
            problem.gradient_hessian(t, x, &mut grad, &mut hess);
            let Some(dx) = newton_direction(&hess, &grad) else {
                return PathEnd::Failed(Status::NumericalFailure);
            };
            let slope = grad.dot(&dx);
            let lambda2 = -slope;
            if !lambda2.is_finite() {
                return PathEnd::Failed(Status::NumericalFailure);
            }
            if lambda2 / 2.0 <= opts.newton_tol {
                break;
            }
            if *newton_steps >= opts.max_newton {
                return PathEnd::Failed(Status::IterLimit);
            }
            let Some(phi0) = problem.value(t, x) else {
                return PathEnd::Failed(Status::NumericalFailure);
            };
            let noise = 64.0 * f64::EPSILON * phi0.abs().max(1.0);
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-20 {
                for i in 0..n {
                    trial[i] = x[i] + step * dx[i];
                }
                if let Some(phi) = problem.value(t, &trial) {
                    if phi <= phi0 + opts.alpha * step * slope + noise {
                        accepted = Some(phi);
                        break;
                    }
                }
                step *= opts.beta;
            }
            // Without a representable decrease the iterate is as centered as
            // rounding allows, provided the decrement is already tiny.
            let stalled = accepted.is_none_or(|phi| phi > phi0 - noise);
            if stalled && lambda2 <= STALL_DECREMENT {
                break;
            }
            if accepted.is_none() {
                return PathEnd::Failed(Status::NumericalFailure);
            }
            x.copy_from_slice(&trial);
            *newton_steps += 1;
            if let Some(stop) = stop {
                if stop(x) {
                    return PathEnd::Stopped;
                }
            }
        }
        stages.push(dot(&problem.objective, x));
        let gap = m / t;
        if gap <= opts.tol {
            return PathEnd::Converged { gap, stages };
        }
        t *= opts.growth;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// `x_a^2 + x_b^2 - r^2 <= 0`
    struct Disk {
        idx: [usize; 2],
        r2: f64,
    }

    impl SmoothConstraint for Disk {
        fn support(&self) -> &[usize] {
            &self.idx
        }
        fn value(&self, x: &[f64]) -> f64 {
            x[self.idx[0]].powi(2) + x[self.idx[1]].powi(2) - self.r2
        }
        fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
            grad[0] = 2.0 * x[self.idx[0]];
            grad[1] = 2.0 * x[self.idx[1]];
            hess.copy_from_slice(&[2.0, 0.0, 0.0, 2.0]);
        }
    }

    /// `1/z - mu <= 0` with support `[mu, z]`.
    struct Reciprocal {
        idx: [usize; 2],
    }

    impl SmoothConstraint for Reciprocal {
        fn support(&self) -> &[usize] {
            &self.idx
        }
        fn value(&self, x: &[f64]) -> f64 {
            1.0 / x[self.idx[1]] - x[self.idx[0]]
        }
        fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
            let z = x[self.idx[1]];
            grad[0] = -1.0;
            grad[1] = -1.0 / (z * z);
            hess.copy_from_slice(&[0.0, 0.0, 0.0, 2.0 / (z * z * z)]);
        }
    }

    #[test]
    fn unit_disk() {
        let mut p = ConvexProgram::new(vec![1.0, 0.0]);
        p.push(Disk { idx: [0, 1], r2: 1.0 });
        p.set_bounds(0, -2.0, 2.0).set_bounds(1, -2.0, 2.0);
        let s = solve_convex(&p, &[0.0, 0.0], 1e-8, 500);
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.x[0], -1.0, epsilon = 1e-7);
        assert!(s.x[1].abs() < 1e-4);
        assert!(s.kkt_residual <= 1e-8);
    }

    #[test]
    fn reciprocal_epigraph() {
        // min mu s.t. mu >= 1/z, z <= 5, z > 0
        let mut p = ConvexProgram::new(vec![1.0, 0.0]);
        p.push(Reciprocal { idx: [0, 1] });
        p.set_bounds(1, 0.0, 5.0);
        let s = solve_convex(&p, &[2.0, 1.0], 1e-8, 500);
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.x[0], 0.2, epsilon = 1e-7);
        assert_relative_eq!(s.x[1], 5.0, epsilon = 1e-6);
    }

    #[test]
    fn phase1_repairs_infeasible_start() {
        let mut p = ConvexProgram::new(vec![1.0, 0.0]);
        p.push(Disk { idx: [0, 1], r2: 1.0 });
        p.set_bounds(0, -2.0, 2.0).set_bounds(1, -2.0, 2.0);
        let s = solve_convex(&p, &[1.9, 1.9], 1e-8, 500);
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.x[0], -1.0, epsilon = 1e-7);
    }

    #[test]
    fn detects_infeasibility() {
        // Disk of radius 1 inside the box [1.5, 2]^2: empty.
        let mut p = ConvexProgram::new(vec![1.0, 0.0]);
        p.push(Disk { idx: [0, 1], r2: 1.0 });
        p.set_bounds(0, 1.5, 2.0).set_bounds(1, 1.5, 2.0);
        assert_eq!(solve_convex(&p, &[1.7, 1.7], 1e-8, 500).status, Status::Infeasible);
    }

    #[test]
    fn iteration_limit() {
        let mut p = ConvexProgram::new(vec![1.0, 0.0]);
        p.push(Disk { idx: [0, 1], r2: 1.0 });
        assert_eq!(solve_convex(&p, &[0.0, 0.0], 1e-8, 3).status, Status::IterLimit);
    }

    #[test]
    fn stage_objectives_non_increasing() {
        let mut p = ConvexProgram::new(vec![1.0, 0.5]);
        p.push(Disk { idx: [0, 1], r2: 4.0 });
        p.set_bounds(0, -3.0, 3.0).set_bounds(1, -3.0, 3.0);
        let s = solve_convex(&p, &[0.1, -0.2], 1e-8, 500);
        assert_eq!(s.status, Status::Optimal);
        for w in s.stage_objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", s.stage_objectives);
        }
    }

    #[test]
    fn deterministic() {
        let mut p = ConvexProgram::new(vec![1.0, 0.0]);
        p.push(Disk { idx: [0, 1], r2: 1.0 });
        let a = solve_convex(&p, &[0.3, 0.1], 1e-8, 500);
        let b = solve_convex(&p, &[0.3, 0.1], 1e-8, 500);
        assert_eq!(a, b);
    }
}
