//! Self-contained solvers for the two kinds of subproblem the optimizer
//! produces: a dense two-phase simplex for the association LP and a
//! log-barrier Newton method for the smooth convex placement programs.

mod barrier;
mod lp;

pub use barrier::{solve_convex, solve_convex_with, BarrierOptions};
pub use lp::solve_lp;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    NumericalFailure,
}

/// Outcome of either solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveStatus {
    pub status: Status,
    pub objective: f64,
    pub x: Vec<f64>,
    /// LP: max of duality gap, dual infeasibility and primal residual.
    /// Barrier: the duality-gap bound `m / t` of the final stage.
    pub kkt_residual: f64,
    /// Simplex pivots or total Newton steps.
    pub iterations: usize,
    /// Objective of the dual certificate (LP only).
    pub dual_objective: Option<f64>,
    /// Objective at the end of every barrier centering stage.
    pub stage_objectives: Vec<f64>,
}

impl SolveStatus {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub(crate) fn failed(status: Status, n: usize, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            x: vec![f64::NAN; n],
            kkt_residual: f64::INFINITY,
            iterations,
            dual_objective: None,
            stage_objectives: Vec::new(),
        }
    }
}

/// `min c.x  s.t.  A x <= b,  E x = d,  lower <= x <= upper`.
///
/// Bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub ineq_rows: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// An LP with objective `c` and every variable in `[0, +inf)`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
        self
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let rows_ok = self.ineq_rows.iter().chain(&self.eq_rows).all(|r| r.len() == n);
        if !rows_ok || self.ineq_rows.len() != self.ineq_rhs.len() || self.eq_rows.len() != self.eq_rhs.len() {
            return Err(Error::invalid("lp", "inconsistent dimensions"));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::invalid("lp.bounds", "bound vectors must match the variable count"));
        }
        let finite = self
            .objective
            .iter()
            .chain(self.ineq_rows.iter().flatten())
            .chain(self.eq_rows.iter().flatten())
            .chain(&self.ineq_rhs)
            .chain(&self.eq_rhs)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("lp", "coefficients must be finite"));
        }
        if self.lower.iter().chain(&self.upper).any(|v| v.is_nan()) {
            return Err(Error::invalid("lp.bounds", "NaN bound"));
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let ineq = self
            .ineq_rows
            .iter()
            .zip(&self.ineq_rhs)
            .map(|(r, b)| (dot(r) - b).max(0.0));
        let eq = self.eq_rows.iter().zip(&self.eq_rhs).map(|(r, d)| (dot(r) - d).abs());
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0));
        ineq.chain(eq).chain(bounds).fold(0.0, f64::max)
    }
}

/// A smooth convex inequality `g(x) <= 0` that depends on a few variables.
///
/// Derivatives are reported in local coordinates: entry `k` of the gradient
/// is the partial with respect to `x[support()[k]]`, and the Hessian is a
/// row-major `k x k` block.
pub trait SmoothConstraint: Send + Sync {
    fn support(&self) -> &[usize];
    fn value(&self, x: &[f64]) -> f64;
    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]);
}

/// `min c.x  s.t.  g_i(x) <= 0,  lower <= x <= upper` with every `g_i`
/// convex on the box.
pub struct ConvexProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Box<dyn SmoothConstraint>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ConvexProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, c: impl SmoothConstraint + 'static) -> &mut Self {
        self.constraints.push(Box::new(c));
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    /// Largest constraint or bound violation at `x` (0 when feasible).
    pub fn feasibility_residual(&self, x: &[f64]) -> f64 {
        let cons = self.constraints.iter().map(|c| c.value(x).max(0.0));
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0));
        cons.chain(bounds).fold(0.0, f64::max)
    }
}
