//! Brute-force and numerical references used to check the optimizer and
//! the placement bounds: grid search, exhaustive association enumeration,
//! finite-difference gradients, sampled bound domination and a Hessian
//! check of the exact elevation constraint.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::association::{Association, TimeMatrix};
use crate::channel::{ChannelParams, Geometry, RateModel};
use crate::optimizer::{Deployment, UavPosition};
use crate::placement::{
    elevation_constraint_hessian, r_lb_horizontal, r_lb_vertical, taylor_coefficients, v_lb, LinkExpansion,
    ServedUe, V_MIN,
};
use crate::scenario::{MotionBox, Scenario};
use crate::{Error, Point2, Result};

/// Largest association count `grid_search` will enumerate.
pub const MAX_GRID_ASSOCIATIONS: f64 = 1e5;
/// Largest number of grid nodes `grid_search` will evaluate.
pub const MAX_GRID_NODES: usize = 10_000_000;
/// Largest association count `enumerate_associations` will enumerate.
pub const MAX_ENUMERATION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub horizontal_step_m: f64,
    pub vertical_step_m: f64,
    pub bounds: MotionBox,
}

impl GridSpec {
    pub fn new(horizontal_step_m: f64, vertical_step_m: f64, bounds: MotionBox) -> Result<Self> {
        let g = Self {
            horizontal_step_m,
            vertical_step_m,
            bounds,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, step) in [
            ("grid.horizontal_step_m", self.horizontal_step_m),
            ("grid.vertical_step_m", self.vertical_step_m),
        ] {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::invalid(field, "step must be positive"));
            }
        }
        self.bounds.validate()
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| lo + k as f64 * step).collect()
    }

    /// Grid nodes, x-major, then y, then altitude.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let b = &self.bounds;
        (
            Self::axis(b.x_min, b.x_max, self.horizontal_step_m),
            Self::axis(b.y_min, b.y_max, self.horizontal_step_m),
            Self::axis(b.h_min, b.h_max, self.vertical_step_m),
        )
    }

    pub fn num_nodes(&self) -> usize {
        let (x, y, h) = self.nodes();
        x.len() * y.len() * h.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub mu: f64,
    pub deployment: Deployment,
    pub association: Association,
    pub nodes_evaluated: usize,
}

/// Exhaustive minimum of the completion time over every association and
/// every grid position of every UAV.
///
/// Given an association the UAVs decouple, and since all UAVs share the
/// same limits the best position of a UAV depends only on the set of UEs it
/// serves. Each UE's service time is tabulated once per node; the best node
/// per UE subset is then memoized across associations.
pub fn grid_search(scenario: &Scenario, grid: &GridSpec) -> Result<OracleResult> {
    scenario.validate()?;
    grid.validate()?;
    let (n, m) = (scenario.num_ues(), scenario.num_uavs());
    if (m as f64).powi(n as i32) > MAX_GRID_ASSOCIATIONS || n > 63 {
        return Err(Error::TooLarge(format!("{m}^{n} associations exceed {MAX_GRID_ASSOCIATIONS}")));
    }
    let (xs, ys, hs) = grid.nodes();
    let num_nodes = xs.len() * ys.len() * hs.len();
    if num_nodes > MAX_GRID_NODES {
        return Err(Error::TooLarge(format!("{num_nodes} grid nodes exceed {MAX_GRID_NODES}")));
    }
    let node = |k: usize| {
        let (ix, rest) = (k / (ys.len() * hs.len()), k % (ys.len() * hs.len()));
        UavPosition {
            q: Point2::new(xs[ix], ys[rest / hs.len()]),
            h: hs[rest % hs.len()],
        }
    };

    let ues: Vec<ServedUe> = (0..n).map(|i| ServedUe::from_scenario(scenario, i)).collect();
    let cpu = scenario.fleet.cpu_hz;
    let table: Vec<Vec<f64>> = ues
        .iter()
        .map(|ue| {
            (0..num_nodes)
                .map(|k| {
                    let p = node(k);
                    let g = Geometry::new(p.q, p.h, ue.w);
                    let rate = RateModel::Rician.rate(&scenario.channel, g.dist_sq(), g.elev_sine, ue.gamma);
                    ue.data_bits / rate + ue.cycles / cpu
                })
                .collect()
        })
        .collect();

    // Best (time, node) for a UE subset given as a bitmask.
    let mut best_for: HashMap<u64, (f64, usize)> = HashMap::new();
    let mut subset_best = |mask: u64| -> (f64, usize) {
        *best_for.entry(mask).or_insert_with(|| {
            let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            (0..num_nodes)
                .map(|k| (members.iter().map(|&i| table[i][k]).sum::<f64>(), k))
                .fold((f64::INFINITY, 0), |best, cur| if cur.0 < best.0 { cur } else { best })
        })
    };

    let mut assignment = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut masks = vec![0u64; m];
        for (i, &j) in assignment.iter().enumerate() {
            masks[j] |= 1 << i;
        }
        let mu = masks
            .iter()
            .map(|&mask| if mask == 0 { 0.0 } else { subset_best(mask).0 })
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|b| mu < b.0) {
            best = Some((mu, assignment.clone()));
        }
        if !advance(&mut assignment, m) {
            break;
        }
    }

    let (mu, assignment) = best.expect("at least one association");
    let association = Association::new(assignment, m)?;
    let idle = UavPosition {
        q: Point2::new(grid.bounds.x_min, grid.bounds.y_min),
        h: grid.bounds.h_min,
    };
    let uavs = (0..m)
        .map(|j| {
            let mask = association.served_by(j).iter().fold(0u64, |acc, &i| acc | 1 << i);
            if mask == 0 {
                idle
            } else {
                node(subset_best(mask).1)
            }
        })
        .collect();
    Ok(OracleResult {
        mu,
        deployment: Deployment::new(uavs),
        association,
        nodes_evaluated: num_nodes,
    })
}

/// Odometer step over `{0..m}^n`; false after the last assignment.
fn advance(assignment: &mut [usize], m: usize) -> bool {
    for a in assignment.iter_mut() {
        *a += 1;
        if *a < m {
            return true;
        }
        *a = 0;
    }
    false
}

/// Exact integer optimum of the fixed-deployment assignment problem.
/// Ties keep the first association in odometer order.
pub fn enumerate_associations(times: &TimeMatrix) -> Result<(f64, Association)> {
    let (n, m) = (times.num_ues(), times.num_uavs());
    if (m as f64).powi(n as i32) > MAX_ENUMERATION {
        return Err(Error::TooLarge(format!("{m}^{n} associations exceed {MAX_ENUMERATION}")));
    }
    let mut assignment = vec![0usize; n];
    let mut best = (f64::INFINITY, assignment.clone());
    loop {
        let mut loads = vec![0.0; m];
        for (i, &j) in assignment.iter().enumerate() {
            loads[j] += times.get(i, j);
        }
        let mu = loads.iter().copied().fold(0.0, f64::max);
        if mu < best.0 {
            best = (mu, assignment.clone());
        }
        if !advance(&mut assignment, m) {
            break;
        }
    }
    Ok((best.0, Association::new(best.1, m)?))
}

/// Largest relative error between `grad` and central differences of `f`
/// at `point`, with per-coordinate step `step * |x_k|` (`step` when
/// `x_k = 0`).
///
/// Errors are relative to `|grad_k|`, floored at `1e-12` of the largest
/// gradient entry so that vanishing components do not divide by zero.
pub fn finite_diff_check(f: impl Fn(&[f64]) -> f64, grad: &[f64], point: &[f64], step: f64) -> f64 {
    let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    let floor = (1e-12 * scale).max(f64::MIN_POSITIVE);
    let mut x = point.to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..point.len() {
        let h = if point[k] == 0.0 { step } else { step * point[k].abs() };
        x[k] = point[k] + h;
        let up = f(&x);
        x[k] = point[k] - h;
        let down = f(&x);
        x[k] = point[k];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / grad[k].abs().max(floor));
    }
    worst
}

/// Finite-difference error of the Taylor coefficients at one expansion
/// point, checked in the coordinates they multiply: the exponential term
/// `u = exp(-(K3 + K4 v))` and the squared distance `s`.
pub fn coefficient_fd_error(channel: &ChannelParams, gamma: f64, v_hat: f64, d_hat_sq: f64, step: f64) -> f64 {
    let c = taylor_coefficients(channel, RateModel::Rician, gamma, v_hat, d_hat_sq);
    let rate = |p: &[f64]| {
        let factor = channel.k1 + channel.k2 / (1.0 + p[0]);
        channel.bandwidth_hz * (factor * gamma / p[1].powf(0.5 * channel.pathloss_exp)).ln_1p() / std::f64::consts::LN_2
    };
    finite_diff_check(rate, &[-c.x, -c.y], &[channel.exp_term(v_hat), d_hat_sq], step)
}

/// Deliberate defects for self-testing the checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Negate the horizontal-step coefficients.
    FlipPsiSign,
}

/// Worst violations found by [`bound_domination_sample`]. Rate entries are
/// relative to the true rate; elevation entries are absolute.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Domination {
    pub horizontal_rate: f64,
    pub elevation: f64,
    pub vertical_rate: f64,
    /// Largest mismatch of any bound at its own expansion point.
    pub at_expansion: f64,
}

impl Domination {
    pub fn worst_violation(&self) -> f64 {
        self.horizontal_rate.max(self.elevation).max(self.vertical_rate)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst_violation() <= tol && self.at_expansion <= tol
    }
}

fn random_point(b: &MotionBox, rng: &mut ChaCha8Rng) -> (Point2, f64) {
    (
        Point2::new(rng.gen_range(b.x_min..=b.x_max), rng.gen_range(b.y_min..=b.y_max)),
        rng.gen_range(b.h_min..=b.h_max),
    )
}

/// Sample `(UE, expansion point, evaluation point, v)` tuples and record how
/// far each lower bound ever rises above its true value. With `expansion`
/// set, every sample expands there instead of at a random point.
pub fn bound_domination_sample(
    scenario: &Scenario,
    expansion: Option<(Point2, f64)>,
    n_samples: usize,
    seed: u64,
    fault: Fault,
) -> Domination {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = scenario.bounds();
    let ch = &scenario.channel;
    let mut out = Domination {
        horizontal_rate: f64::NEG_INFINITY,
        elevation: f64::NEG_INFINITY,
        vertical_rate: f64::NEG_INFINITY,
        at_expansion: 0.0,
    };
    for _ in 0..n_samples.max(1) {
        let ue = ServedUe::from_scenario(scenario, rng.gen_range(0..scenario.num_ues()));
        let (q_hat, h_hat) = expansion.unwrap_or_else(|| random_point(b, &mut rng));
        let (q, h) = random_point(b, &mut rng);
        let v = rng.gen_range(V_MIN..=1.0);

        let link = LinkExpansion::new(q_hat, h_hat, &ue, ch, RateModel::Rician);
        let mut h_link = link;
        if fault == Fault::FlipPsiSign {
            h_link.coeffs.x = -h_link.coeffs.x;
            h_link.coeffs.y = -h_link.coeffs.y;
        }
        let rate = |q: Point2, h: f64, v: f64| RateModel::Rician.rate(ch, q.dist_sq(&ue.w) + h * h, v, ue.gamma);

        let true_h = rate(q, h_hat, v);
        out.horizontal_rate = out
            .horizontal_rate
            .max((r_lb_horizontal(&h_link, ch, q, v) - true_h) / true_h);
        let sine = Geometry::new(q, h_hat, ue.w).elev_sine;
        out.elevation = out.elevation.max(v_lb(q, ue.w, q_hat, h_hat) - sine);
        let true_v = rate(q_hat, h, v);
        out.vertical_rate = out.vertical_rate.max((r_lb_vertical(&link, ch, h, v) - true_v) / true_v);

        let r_hat = rate(q_hat, h_hat, link.v_hat);
        let exact = [
            (r_lb_horizontal(&h_link, ch, q_hat, link.v_hat) - r_hat).abs() / r_hat,
            (r_lb_vertical(&link, ch, h_hat, link.v_hat) - r_hat).abs() / r_hat,
            (v_lb(q_hat, ue.w, q_hat, h_hat) - link.v_hat).abs(),
        ];
        out.at_expansion = exact.iter().fold(out.at_expansion, |a, &e| a.max(e));
    }
    out
}

/// Outcome of the Hessian check of `g(v, H) = v - H / sqrt(a3 + H^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianCheck {
    /// Smallest eigenvalue of the numerically differentiated Hessian.
    pub min_eigenvalue: f64,
    /// Largest relative disagreement between the numerical and the
    /// closed-form Hessian.
    pub max_rel_error: f64,
}

fn sym_eigenvalues(m: [[f64; 2]; 2]) -> (f64, f64) {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let r = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[0][1]).sqrt();
    (mean - r, mean + r)
}

/// Differentiate the exact gradient of `g` by central differences at
/// `n_samples` random `(v, H, a3)` with `H` in `[h_min, h_max]` and `a3` in
/// `[0, a3_max]`, and report the smallest eigenvalue found.
pub fn elevation_hessian_check(n_samples: usize, seed: u64, h_min: f64, h_max: f64, a3_max: f64) -> HessianCheck {
    let grad = |_v: f64, h: f64, a3: f64| [1.0, -a3 / (a3 + h * h).powf(1.5)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = HessianCheck {
        min_eigenvalue: f64::INFINITY,
        max_rel_error: 0.0,
    };
    for _ in 0..n_samples {
        let v = rng.gen_range(V_MIN..=1.0);
        let h = rng.gen_range(h_min..=h_max);
        let a3 = rng.gen_range(0.0..=a3_max);
        let (dv, dh) = (1e-6, 1e-6 * h);
        let gv = [grad(v + dv, h, a3), grad(v - dv, h, a3)];
        let gh = [grad(v, h + dh, a3), grad(v, h - dh, a3)];
        let mut m = [[0.0; 2]; 2];
        for k in 0..2 {
            m[k][0] = (gv[0][k] - gv[1][k]) / (2.0 * dv);
            m[k][1] = (gh[0][k] - gh[1][k]) / (2.0 * dh);
        }
        let off = 0.5 * (m[0][1] + m[1][0]);
        m[0][1] = off;
        m[1][0] = off;
        out.min_eigenvalue = out.min_eigenvalue.min(sym_eigenvalues(m).0);

        let exact = elevation_constraint_hessian(h, a3);
        let scale = exact[1][1].abs().max(1e-300);
        let err = (0..2)
            .flat_map(|r| (0..2).map(move |c| (r, c)))
            .map(|(r, c)| (m[r][c] - exact[r][c]).abs())
            .fold(0.0, f64::max);
        out.max_rel_error = out.max_rel_error.max(if exact[1][1] == 0.0 { err } else { err / scale });
    }
    out
}
