//! Per-UAV placement subproblems.
//!
//! With the association fixed, each UAV only affects its own load, so the
//! horizontal step and the altitude step are solved one UAV at a time. The
//! rate is jointly convex in `(exp(-(K3 + K4 v)), d^2)`, so its first-order
//! expansion at the current point is a global under-estimator; the same
//! holds for the elevation sine as a function of `||q - w||^2`. Replacing the
//! non-convex constraints by these bounds gives a convex program whose
//! optimum can only improve on the expansion point.
//!
//! Rates enter the programs scaled by their value at the expansion point
//! (`z~ = z / r^`), which keeps every variable of order one.

use crate::channel::{ChannelParams, Geometry, RateModel};
use crate::convex::{solve_convex, ConvexProgram, SmoothConstraint, Status};
use crate::scenario::{MotionBox, Scenario};
use crate::Point2;

/// Lower limit on `v`; keeps the exponential term and geometry well
/// conditioned.
pub const V_MIN: f64 = 1e-6;
/// Smallest admissible rate variable, bits/s.
pub const Z_MIN: f64 = 1.0;
/// Newton-step budget of one subproblem solve.
const MAX_NEWTON: usize = 2_000;

/// A UE as seen by the placement step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServedUe {
    pub w: Point2,
    pub data_bits: f64,
    pub cycles: f64,
    /// Reference SNR `p beta0 / (sigma^2 Gamma)`.
    pub gamma: f64,
}

impl ServedUe {
    pub fn from_scenario(scenario: &Scenario, ue: usize) -> Self {
        let u = &scenario.ues[ue];
        Self {
            w: u.position(),
            data_bits: u.data_bits,
            cycles: u.cycles,
            gamma: scenario.channel.snr_scale(u.tx_power_w),
        }
    }
}

/// Everything a subproblem needs besides the expansion point.
#[derive(Debug, Clone, Copy)]
pub struct UavContext<'a> {
    pub ues: &'a [ServedUe],
    pub channel: &'a ChannelParams,
    pub model: RateModel,
    pub cpu_hz: f64,
    pub bounds: &'a MotionBox,
}

impl UavContext<'_> {
    /// True completion time of the UAV at `(q, h)`: upload plus compute time
    /// of every served UE.
    pub fn true_time(&self, q: Point2, h: f64) -> f64 {
        self.ues
            .iter()
            .map(|ue| {
                let g = Geometry::new(q, h, ue.w);
                let rate = self.model.rate(self.channel, g.dist_sq(), g.elev_sine, ue.gamma);
                ue.data_bits / rate + ue.cycles / self.cpu_hz
            })
            .sum()
    }

    fn true_rate(&self, ue: &ServedUe, q: Point2, h: f64, v: f64) -> f64 {
        let dist_sq = q.dist_sq(&ue.w) + h * h;
        self.model.rate(self.channel, dist_sq, v, ue.gamma)
    }
}

/// Taylor coefficients of the rate at an expansion point, stored positive.
///
/// `x` multiplies the exponential term `exp(-(K3 + K4 v)) - exp(-(K3 + K4 v^))`
/// and `y` the squared-distance change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCoefficients {
    pub x: f64,
    pub y: f64,
}

/// Magnitudes of the partials of
/// `f(x, y) = B log2(1 + (K1 + K2 / (x + X)) gamma / (y + Y)^(a0/2))`
/// at the origin, with `X = 1 + exp(-(K3 + K4 v^))` and `Y = d^^2`.
///
/// Under the line-of-sight model the factor is 1, so `x` vanishes.
pub fn taylor_coefficients(
    channel: &ChannelParams,
    model: RateModel,
    gamma: f64,
    v_hat: f64,
    d_hat_sq: f64,
) -> BoundCoefficients {
    let b = channel.bandwidth_hz;
    let a0 = channel.pathloss_exp;
    let y_pow = d_hat_sq.powf(0.5 * a0);
    match model {
        RateModel::Rician => {
            let big_x = 1.0 + channel.exp_term(v_hat);
            let num = channel.k1 * big_x + channel.k2;
            let denom = gamma * num + big_x * y_pow;
            BoundCoefficients {
                x: gamma * channel.k2 * b / (std::f64::consts::LN_2 * big_x * denom),
                y: gamma * a0 * b * num / (4f64.ln() * d_hat_sq * denom),
            }
        }
        RateModel::LineOfSight => BoundCoefficients {
            x: 0.0,
            y: gamma * a0 * b / (4f64.ln() * d_hat_sq * (gamma + y_pow)),
        },
    }
}

/// Coefficients for the horizontal step, expanded at `(q^, H)`.
pub fn psi_coefficients(link: &LinkExpansion) -> BoundCoefficients {
    link.coeffs
}

/// Coefficients for the altitude step, expanded at `(q, H^)`.
///
/// Same partials as [`psi_coefficients`]; only the expansion point and the
/// variable they multiply (`H^2 - H^^2` instead of `||q - w||^2`) differ.
pub fn phi_coefficients(link: &LinkExpansion) -> BoundCoefficients {
    link.coeffs
}

/// Cached quantities of one served UE at the expansion point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkExpansion {
    pub w: Point2,
    pub horiz_sq_hat: f64,
    pub h_hat: f64,
    pub d_hat_sq: f64,
    pub v_hat: f64,
    pub exp_hat: f64,
    pub r_hat: f64,
    pub coeffs: BoundCoefficients,
    pub model: RateModel,
}

impl LinkExpansion {
    pub fn new(q_hat: Point2, h_hat: f64, ue: &ServedUe, channel: &ChannelParams, model: RateModel) -> Self {
        let g = Geometry::new(q_hat, h_hat, ue.w);
        let d_hat_sq = g.dist_sq();
        Self {
            w: ue.w,
            horiz_sq_hat: g.horiz_dist_sq,
            h_hat,
            d_hat_sq,
            v_hat: g.elev_sine,
            exp_hat: channel.exp_term(g.elev_sine),
            r_hat: model.rate(channel, d_hat_sq, g.elev_sine, ue.gamma),
            coeffs: taylor_coefficients(channel, model, ue.gamma, g.elev_sine, d_hat_sq),
            model,
        }
    }

    fn exp_change(&self, channel: &ChannelParams, v: f64) -> f64 {
        match self.model {
            RateModel::Rician => channel.exp_term(v) - self.exp_hat,
            RateModel::LineOfSight => 0.0,
        }
    }
}

/// Expansion point of one UAV's subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPoint {
    pub q_hat: Point2,
    pub h_hat: f64,
    pub links: Vec<LinkExpansion>,
}

impl ExpansionPoint {
    pub fn new(q_hat: Point2, h_hat: f64, ctx: &UavContext) -> Self {
        let links = ctx
            .ues
            .iter()
            .map(|ue| LinkExpansion::new(q_hat, h_hat, ue, ctx.channel, ctx.model))
            .collect();
        Self { q_hat, h_hat, links }
    }
}

/// Lower bound on the rate for a horizontal move to `q` at the fixed
/// expansion altitude, given elevation variable `v`.
pub fn r_lb_horizontal(link: &LinkExpansion, channel: &ChannelParams, q: Point2, v: f64) -> f64 {
    link.r_hat - link.coeffs.x * link.exp_change(channel, v) - link.coeffs.y * (q.dist_sq(&link.w) - link.horiz_sq_hat)
}

/// Lower bound on the elevation sine `H / sqrt(||q - w||^2 + H^2)` at the
/// fixed altitude `h`, expanded at `q_hat` in the variable `||q - w||^2`.
pub fn v_lb(q: Point2, w: Point2, q_hat: Point2, h: f64) -> f64 {
    let s_hat = q_hat.dist_sq(&w);
    let d_hat_sq = s_hat + h * h;
    let v_hat = h / d_hat_sq.sqrt();
    v_hat - h / (2.0 * d_hat_sq.powf(1.5)) * (q.dist_sq(&w) - s_hat)
}

/// Lower bound on the rate for an altitude change to `h` at the fixed
/// expansion position, given elevation variable `v`.
pub fn r_lb_vertical(link: &LinkExpansion, channel: &ChannelParams, h: f64, v: f64) -> f64 {
    link.r_hat - link.coeffs.x * link.exp_change(channel, v) - link.coeffs.y * (h * h - link.h_hat * link.h_hat)
}

/// Hessian of `g(v, H) = v - H / sqrt(a3 + H^2)` in the order `(v, H)`.
pub fn elevation_constraint_hessian(h: f64, a3: f64) -> [[f64; 2]; 2] {
    [[0.0, 0.0], [0.0, 3.0 * a3 * h / (a3 + h * h).powf(2.5)]]
}

/// Result of one per-UAV subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub position: Point2,
    pub altitude: f64,
    /// Elevation variable per served UE, pushed onto its bound.
    pub v: Vec<f64>,
    /// Rate variable per served UE (bits/s), pushed onto its bound.
    pub z: Vec<f64>,
    /// Completion time implied by `z`, seconds.
    pub mu: f64,
    pub status: Status,
    /// False when the solver failed or the step would have increased the
    /// true completion time; the expansion point is then returned.
    pub accepted: bool,
    /// True completion time at the returned position.
    pub true_time: f64,
    /// Slack of the raw solver output before `v` and `z` were pushed onto
    /// their bounds: largest absolute elevation slack and largest rate
    /// slack relative to its bound. Zero when the solver failed.
    pub solver_slack: (f64, f64),
}

impl SubproblemSolution {
    pub fn status_ok(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Largest `|v_i - true elevation sine|` over served UEs.
    pub fn elevation_gap(&self, ctx: &UavContext) -> f64 {
        ctx.ues
            .iter()
            .zip(&self.v)
            .map(|(ue, &v)| match ctx.model {
                RateModel::Rician => (v - Geometry::new(self.position, self.altitude, ue.w).elev_sine).abs(),
                RateModel::LineOfSight => 0.0,
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|z_i - r_i| / r_i`, with `r_i` the true rate at the returned
    /// position and elevation variable `v_i`.
    pub fn rate_gap(&self, ctx: &UavContext) -> f64 {
        ctx.ues
            .iter()
            .zip(self.v.iter().zip(&self.z))
            .map(|(ue, (&v, &z))| {
                let r = ctx.true_rate(ue, self.position, self.altitude, v);
                (z - r).abs() / r
            })
            .fold(0.0, f64::max)
    }

    fn at_expansion(ctx: &UavContext, exp: &ExpansionPoint, status: Status) -> Self {
        let v: Vec<f64> = exp.links.iter().map(|l| l.v_hat).collect();
        let z: Vec<f64> = exp.links.iter().map(|l| l.r_hat).collect();
        let time = ctx.true_time(exp.q_hat, exp.h_hat);
        Self {
            position: exp.q_hat,
            altitude: exp.h_hat,
            v,
            z,
            mu: time,
            status,
            accepted: false,
            true_time: time,
            solver_slack: (0.0, 0.0),
        }
    }
}

/// `sum_k (x[k] - center[k])^2` over the geometry variables `x[0..]`.
#[inline]
fn sq_dist(x: &[f64], center: &[f64]) -> f64 {
    center.iter().enumerate().map(|(k, c)| (x[k] - c) * (x[k] - c)).sum()
}

/// `v + c (sum_k (x_k - w_k)^2 - s^) - v^ <= 0`: the horizontal elevation
/// bound `v <= v_lb(q)`.
struct ElevationBound {
    support: [usize; 3],
    center: [f64; 2],
    c: f64,
    s_hat: f64,
    v_hat: f64,
}

impl SmoothConstraint for ElevationBound {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn value(&self, x: &[f64]) -> f64 {
        x[self.support[2]] + self.c * (sq_dist(x, &self.center) - self.s_hat) - self.v_hat
    }

    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        hess.fill(0.0);
        for k in 0..2 {
            grad[k] = 2.0 * self.c * (x[k] - self.center[k]);
            hess[k * 3 + k] = 2.0 * self.c;
        }
        grad[2] = 1.0;
    }
}

/// `z~ - 1 + ax (exp(-(K3 + K4 v)) - e^) + ay (sum_k (x_k - c_k)^2 - s^) <= 0`:
/// the scaled rate bound. The geometry variables are `(qx, qy)` in the
/// horizontal step and `H` (with center 0) in the vertical one; `v` is absent
/// under the line-of-sight model.
struct RateBound {
    /// Geometry variables, then `v` if present, then `z~`.
    support: Vec<usize>,
    center: Vec<f64>,
    has_v: bool,
    ax: f64,
    ay: f64,
    k3: f64,
    k4: f64,
    exp_hat: f64,
    s_hat: f64,
}

impl RateBound {
    fn exp_term(&self, v: f64) -> f64 {
        (-(self.k3 + self.k4 * v)).exp()
    }
}

impl SmoothConstraint for RateBound {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn value(&self, x: &[f64]) -> f64 {
        let z = x[*self.support.last().unwrap()];
        let exp_part = if self.has_v {
            self.ax * (self.exp_term(x[self.support[self.center.len()]]) - self.exp_hat)
        } else {
            0.0
        };
        z - 1.0 + exp_part + self.ay * (sq_dist(x, &self.center) - self.s_hat)
    }

    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let k = self.support.len();
        let ng = self.center.len();
        hess.fill(0.0);
        for g in 0..ng {
            grad[g] = 2.0 * self.ay * (x[g] - self.center[g]);
            hess[g * k + g] = 2.0 * self.ay;
        }
        if self.has_v {
            let e = self.exp_term(x[self.support[ng]]);
            grad[ng] = -self.ax * self.k4 * e;
            hess[ng * k + ng] = self.ax * self.k4 * self.k4 * e;
        }
        grad[k - 1] = 1.0;
    }
}

/// `v - H / sqrt(a3 + H^2) <= 0`, convex for `H > 0`.
struct ElevationExact {
    /// `[H, v]`.
    support: [usize; 2],
    a3: f64,
}

impl SmoothConstraint for ElevationExact {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn value(&self, x: &[f64]) -> f64 {
        let h = x[self.support[0]];
        x[self.support[1]] - h / (self.a3 + h * h).sqrt()
    }

    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let h = x[self.support[0]];
        let s = self.a3 + h * h;
        grad[0] = -self.a3 / s.powf(1.5);
        grad[1] = 1.0;
        let [[_, _], [_, hh]] = elevation_constraint_hessian(h, self.a3);
        hess.copy_from_slice(&[hh, 0.0, 0.0, 0.0]);
    }
}

/// `sum_i D_i / (r^_i z~_i) + sum_i F_i / f - mu <= 0`.
struct LoadEpigraph {
    /// `[mu, z~_1, ..]`.
    support: Vec<usize>,
    /// `D_i / r^_i`, seconds.
    upload: Vec<f64>,
    compute: f64,
}

impl SmoothConstraint for LoadEpigraph {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn value(&self, x: &[f64]) -> f64 {
        let upload: f64 = self.support[1..].iter().zip(&self.upload).map(|(&i, u)| u / x[i]).sum();
        upload + self.compute - x[self.support[0]]
    }

    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let k = self.support.len();
        hess.fill(0.0);
        grad[0] = -1.0;
        for (j, (&i, u)) in self.support[1..].iter().zip(&self.upload).enumerate() {
            let z = x[i];
            grad[j + 1] = -u / (z * z);
            hess[(j + 1) * k + j + 1] = 2.0 * u / (z * z * z);
        }
    }
}

/// Move `v` strictly inside `(lo, hi)` by a small fraction of the width.
fn inside(v: f64, lo: f64, hi: f64) -> f64 {
    let margin = 1e-6 * (hi - lo);
    v.clamp(lo + margin, hi - margin)
}

/// Indices of the per-UE variables after the `first` shared ones.
fn ue_vars(first: usize, i: usize, has_v: bool) -> (Option<usize>, usize) {
    if has_v {
        (Some(first + 2 * i), first + 2 * i + 1)
    } else {
        (None, first + i)
    }
}

/// Raw slack of every served pair: `v_bound - v` and `(r_bound - z) / r_bound`.
fn raw_slack(
    exp: &ExpansionPoint,
    x: &[f64],
    first: usize,
    has_v: bool,
    v_bound: impl Fn(&LinkExpansion) -> f64,
    r_bound: impl Fn(&LinkExpansion, f64) -> f64,
) -> (f64, f64) {
    exp.links.iter().enumerate().fold((0.0f64, 0.0f64), |(e, r), (i, l)| {
        let (vi, zi) = ue_vars(first, i, has_v);
        let v = vi.map_or(1.0, |vi| x[vi]);
        let ev = vi.map_or(0.0, |_| (v_bound(l) - v).abs());
        let rb = r_bound(l, v);
        (e.max(ev), r.max((rb - x[zi] * l.r_hat).abs() / rb))
    })
}

fn load_constraint(ctx: &UavContext, exp: &ExpansionPoint, mu_idx: usize, first: usize, has_v: bool) -> LoadEpigraph {
    let mut support = vec![mu_idx];
    support.extend((0..ctx.ues.len()).map(|i| ue_vars(first, i, has_v).1));
    LoadEpigraph {
        support,
        upload: ctx.ues.iter().zip(&exp.links).map(|(ue, l)| ue.data_bits / l.r_hat).collect(),
        compute: ctx.ues.iter().map(|ue| ue.cycles / ctx.cpu_hz).sum(),
    }
}

/// Fill in `z~` and `mu` of a start point whose geometry and `v` are set:
/// each `z~` sits slightly below its bound and `mu` above the load.
fn finish_start(prog: &ConvexProgram, x: &mut [f64], z_idx: &[usize], mu_idx: usize, load: &LoadEpigraph) {
    // Every constraint pushed so far whose last variable is a z~ is a rate
    // bound; evaluated at z~ = 0 it reads minus the bound.
    for &zi in z_idx {
        x[zi] = 0.0;
    }
    for c in &prog.constraints {
        let zi = *c.support().last().unwrap();
        if z_idx.contains(&zi) {
            let bound = -c.value(x);
            let lo = prog.lower[zi];
            x[zi] = if bound > lo { lo + 0.99 * (bound - lo) } else { lo * 2.0 };
        }
    }
    x[mu_idx] = 0.0;
    let load_value = load.value(x);
    x[mu_idx] = load_value + 1e-3 * load_value.abs().max(1e-3);
}

/// Horizontal step at the fixed altitude `exp.h_hat`.
///
/// Variables: `[qx, qy, mu, (v_i, z~_i)...]` (no `v_i` under line of sight).
pub fn solve_horizontal(ctx: &UavContext, exp: &ExpansionPoint, tol: f64) -> SubproblemSolution {
    let has_v = ctx.model == RateModel::Rician;
    let k = ctx.ues.len();
    let first = 3;
    let n = first + k * if has_v { 2 } else { 1 };
    let b = ctx.bounds;
    let mut prog = ConvexProgram::new({
        let mut c = vec![0.0; n];
        c[2] = 1.0;
        c
    });
    prog.set_bounds(0, b.x_min, b.x_max).set_bounds(1, b.y_min, b.y_max).set_bounds(2, 0.0, f64::INFINITY);

    let mut x0 = vec![0.0; n];
    x0[0] = inside(exp.q_hat.x, b.x_min, b.x_max);
    x0[1] = inside(exp.q_hat.y, b.y_min, b.y_max);
    let q0 = Point2::new(x0[0], x0[1]);
    let mut z_idx = Vec::with_capacity(k);
    for (i, link) in exp.links.iter().enumerate() {
        let (vi, zi) = ue_vars(first, i, has_v);
        let center = [link.w.x, link.w.y];
        if let Some(vi) = vi {
            prog.set_bounds(vi, V_MIN, 1.0);
            let c = exp.h_hat / (2.0 * link.d_hat_sq.powf(1.5));
            prog.push(ElevationBound {
                support: [0, 1, vi],
                center,
                c,
                s_hat: link.horiz_sq_hat,
                v_hat: link.v_hat,
            });
            x0[vi] = (0.99 * v_lb(q0, link.w, exp.q_hat, exp.h_hat)).clamp(2.0 * V_MIN, 0.99);
        }
        prog.set_bounds(zi, Z_MIN / link.r_hat, f64::INFINITY);
        let mut support = vec![0, 1];
        support.extend(vi);
        support.push(zi);
        prog.push(RateBound {
            support,
            center: center.to_vec(),
            has_v,
            ax: link.coeffs.x / link.r_hat,
            ay: link.coeffs.y / link.r_hat,
            k3: ctx.channel.k3,
            k4: ctx.channel.k4,
            exp_hat: link.exp_hat,
            s_hat: link.horiz_sq_hat,
        });
        z_idx.push(zi);
    }
    let load = load_constraint(ctx, exp, 2, first, has_v);
    finish_start(&prog, &mut x0, &z_idx, 2, &load);
    prog.push(load);

    let sol = solve_convex(&prog, &x0, tol, MAX_NEWTON);
    if !sol.is_optimal() {
        return SubproblemSolution::at_expansion(ctx, exp, sol.status);
    }
    let q = Point2::new(sol.x[0], sol.x[1]);
    let v: Vec<f64> = exp
        .links
        .iter()
        .map(|l| if has_v { v_lb(q, l.w, exp.q_hat, exp.h_hat).clamp(V_MIN, 1.0) } else { 1.0 })
        .collect();
    let z: Vec<f64> = exp
        .links
        .iter()
        .zip(&v)
        .map(|(l, &vi)| r_lb_horizontal(l, ctx.channel, q, vi).max(Z_MIN))
        .collect();
    let slack = raw_slack(
        exp,
        &sol.x,
        first,
        has_v,
        |l| v_lb(q, l.w, exp.q_hat, exp.h_hat),
        |l, vi| r_lb_horizontal(l, ctx.channel, q, vi),
    );
    SubproblemSolution {
        solver_slack: slack,
        ..finalize(ctx, exp, q, exp.h_hat, v, z, sol.status)
    }
}

/// Altitude step at the fixed position `exp.q_hat`.
///
/// Variables: `[H, mu, (v_i, z~_i)...]` (no `v_i` under line of sight). The
/// elevation constraint is kept exact since it is convex in `(v, H)`.
pub fn solve_vertical(ctx: &UavContext, exp: &ExpansionPoint, tol: f64) -> SubproblemSolution {
    let has_v = ctx.model == RateModel::Rician;
    let k = ctx.ues.len();
    let first = 2;
    let n = first + k * if has_v { 2 } else { 1 };
    let b = ctx.bounds;
    let mut prog = ConvexProgram::new({
        let mut c = vec![0.0; n];
        c[1] = 1.0;
        c
    });
    prog.set_bounds(0, b.h_min, b.h_max).set_bounds(1, 0.0, f64::INFINITY);

    let mut x0 = vec![0.0; n];
    x0[0] = inside(exp.h_hat, b.h_min, b.h_max);
    let mut z_idx = Vec::with_capacity(k);
    for (i, link) in exp.links.iter().enumerate() {
        let (vi, zi) = ue_vars(first, i, has_v);
        if let Some(vi) = vi {
            prog.set_bounds(vi, V_MIN, 1.0);
            prog.push(ElevationExact {
                support: [0, vi],
                a3: link.horiz_sq_hat,
            });
            let sine = x0[0] / (link.horiz_sq_hat + x0[0] * x0[0]).sqrt();
            x0[vi] = (0.99 * sine).clamp(2.0 * V_MIN, 0.99);
        }
        prog.set_bounds(zi, Z_MIN / link.r_hat, f64::INFINITY);
        let mut support = vec![0];
        support.extend(vi);
        support.push(zi);
        prog.push(RateBound {
            support,
            center: vec![0.0],
            has_v,
            ax: link.coeffs.x / link.r_hat,
            ay: link.coeffs.y / link.r_hat,
            k3: ctx.channel.k3,
            k4: ctx.channel.k4,
            exp_hat: link.exp_hat,
            s_hat: link.h_hat * link.h_hat,
        });
        z_idx.push(zi);
    }
    let load = load_constraint(ctx, exp, 1, first, has_v);
    finish_start(&prog, &mut x0, &z_idx, 1, &load);
    prog.push(load);

    let sol = solve_convex(&prog, &x0, tol, MAX_NEWTON);
    if !sol.is_optimal() {
        return SubproblemSolution::at_expansion(ctx, exp, sol.status);
    }
    let h = sol.x[0].clamp(b.h_min, b.h_max);
    let v: Vec<f64> = exp
        .links
        .iter()
        .map(|l| if has_v { h / (l.horiz_sq_hat + h * h).sqrt() } else { 1.0 })
        .collect();
    let z: Vec<f64> = exp
        .links
        .iter()
        .zip(&v)
        .map(|(l, &vi)| r_lb_vertical(l, ctx.channel, h, vi).max(Z_MIN))
        .collect();
    let slack = raw_slack(
        exp,
        &sol.x,
        first,
        has_v,
        |l| h / (l.horiz_sq_hat + h * h).sqrt(),
        |l, vi| r_lb_vertical(l, ctx.channel, h, vi),
    );
    SubproblemSolution {
        solver_slack: slack,
        ..finalize(ctx, exp, exp.q_hat, h, v, z, sol.status)
    }
}

/// Push the interior solution onto its active bounds and apply the descent
/// safeguard against the true completion time.
fn finalize(
    ctx: &UavContext,
    exp: &ExpansionPoint,
    q: Point2,
    h: f64,
    v: Vec<f64>,
    z: Vec<f64>,
    status: Status,
) -> SubproblemSolution {
    let old_time = ctx.true_time(exp.q_hat, exp.h_hat);
    let new_time = ctx.true_time(q, h);
    if !(new_time <= old_time) {
        log::debug!("rejecting subproblem step: true time {new_time} > {old_time}");
        return SubproblemSolution::at_expansion(ctx, exp, status);
    }
    let compute: f64 = ctx.ues.iter().map(|ue| ue.cycles / ctx.cpu_hz).sum();
    let mu = ctx.ues.iter().zip(&z).map(|(ue, zi)| ue.data_bits / zi).sum::<f64>() + compute;
    SubproblemSolution {
        position: q,
        altitude: h,
        v,
        z,
        mu,
        status,
        accepted: true,
        true_time: new_time,
        solver_slack: (0.0, 0.0),
    }
}
