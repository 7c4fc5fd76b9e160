//! Self-checks of the bounds and the solver against independent oracles.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavmec_core::channel::{ChannelParams, RateModel};
use uavmec_core::optimizer::{solve_proposed, OptimizerConfig};
use uavmec_core::oracle::{
    bound_domination_sample, coefficient_fd_error, elevation_hessian_check, grid_search, Fault, GridSpec,
};
use uavmec_core::placement::{LinkExpansion, ServedUe};
use uavmec_core::scenario::{generate, FleetConfig, MotionBox, Scenario, TaskSpec};
use uavmec_core::Point2;

pub const DOMINATION_TOL: f64 = 1e-9;
pub const FD_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-6;
pub const HESSIAN_TOL: f64 = -1e-12;
pub const GRID_RATIO_TOL: f64 = 1.10;
/// Largest squared horizontal UE distance in the default area box.
pub const A3_MAX: f64 = 2e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn scenarios(count: usize, n: usize, m: usize, seed0: u64) -> Result<Vec<Scenario>> {
    let fleet = FleetConfig {
        num_uavs: m,
        ..Default::default()
    };
    (0..count as u64)
        .map(|k| Ok(generate(seed0 + k, n, &fleet, &ChannelParams::default(), &TaskSpec::default())?))
        .collect()
}

/// Relative lower-bound violations over random scenarios and samples.
pub fn check_domination(n_scenarios: usize, samples: usize, fault: Fault) -> Result<CheckResult> {
    let mut worst = f64::NEG_INFINITY;
    let mut at_exp: f64 = 0.0;
    let mut ok = true;
    for (k, s) in scenarios(n_scenarios, 20, 3, 1000)?.iter().enumerate() {
        let d = bound_domination_sample(s, None, samples, 7 + k as u64, fault);
        ok &= d.passes(DOMINATION_TOL);
        worst = worst.max(d.worst_violation());
        at_exp = at_exp.max(d.at_expansion);
    }
    Ok(CheckResult {
        name: "bound_domination",
        passed: ok,
        detail: format!(
            "{n_scenarios} scenarios x {samples} samples, worst violation {worst:e}, expansion mismatch {at_exp:e}, tol {DOMINATION_TOL:e}"
        ),
    })
}

/// Finite-difference error of the Taylor coefficients at `samples` random
/// expansion points. `vertical` restricts expansions to a UAV directly
/// above or near the UE, the regime where the vertical step moves most.
pub fn coefficient_error(samples: usize, seed: u64, vertical: bool) -> Result<f64> {
    let ch = ChannelParams::default();
    let b = MotionBox::default();
    let s = &scenarios(1, 1, 1, seed)?[0];
    let ue = ServedUe::from_scenario(s, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let h = rng.gen_range(b.h_min..=b.h_max);
        let q = if vertical {
            Point2::new(ue.w.x + rng.gen_range(-20.0..=20.0), ue.w.y + rng.gen_range(-20.0..=20.0))
        } else {
            Point2::new(rng.gen_range(b.x_min..=b.x_max), rng.gen_range(b.y_min..=b.y_max))
        };
        let link = LinkExpansion::new(q, h, &ue, &ch, RateModel::Rician);
        worst = worst.max(coefficient_fd_error(&ch, ue.gamma, link.v_hat, link.d_hat_sq, FD_STEP));
    }
    Ok(worst)
}

pub fn check_coefficients(samples: usize) -> Result<Vec<CheckResult>> {
    let psi = coefficient_error(samples, 21, false)?;
    let phi = coefficient_error(samples, 22, true)?;
    Ok(vec![
        CheckResult {
            name: "psi_coefficients_fd",
            passed: psi <= FD_TOL,
            detail: format!("{samples} points, max relative error {psi:e}, tol {FD_TOL:e}"),
        },
        CheckResult {
            name: "phi_coefficients_fd",
            passed: phi <= FD_TOL,
            detail: format!("{samples} points, max relative error {phi:e}, tol {FD_TOL:e}"),
        },
    ])
}

pub fn check_hessian(samples: usize) -> CheckResult {
    let b = MotionBox::default();
    let h = elevation_hessian_check(samples, 31, b.h_min, b.h_max, A3_MAX);
    CheckResult {
        name: "elevation_hessian_psd",
        passed: h.min_eigenvalue >= HESSIAN_TOL,
        detail: format!(
            "{samples} samples, min eigenvalue {:e}, closed-form mismatch {:e}, tol {HESSIAN_TOL:e}",
            h.min_eigenvalue, h.max_rel_error
        ),
    }
}

/// Small instances used for the grid comparison: `(seed, N, M)`.
pub fn grid_instances(count: usize) -> Vec<(u64, usize, usize)> {
    (0..count as u64).map(|k| (100 + k, 2 + (k as usize % 3), 1 + (k as usize % 2))).collect()
}

/// Ratio of the proposed solution to an exhaustive grid search on small
/// instances.
pub fn check_grid(instances: &[(u64, usize, usize)], h_step: f64, v_step: f64) -> Result<CheckResult> {
    let config = OptimizerConfig {
        restarts: 5,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for &(seed, n, m) in instances {
        let s = &scenarios(1, n, m, seed)?[0];
        let grid = grid_search(s, &GridSpec::new(h_step, v_step, *s.bounds())?)?;
        let ours = solve_proposed(s, &config)?;
        worst = worst.max(ours.mu / grid.mu);
    }
    Ok(CheckResult {
        name: "grid_ratio",
        passed: worst <= GRID_RATIO_TOL,
        detail: format!(
            "{} instances, grid {h_step} m / {v_step} m, worst ratio {worst:.6}, tol {GRID_RATIO_TOL}",
            instances.len()
        ),
    })
}

pub fn run_verify(level: Level, fault: Fault) -> Result<Vec<CheckResult>> {
    let (n_scen, samples, fd, hess, grid, hs, vs) = match level {
        Level::Fast => (3, 1_000, 200, 200, 3, 2.0, 1.0),
        Level::Full => (10, 10_000, 1_000, 1_000, 10, 1.0, 0.5),
    };
    let mut out = vec![check_domination(n_scen, samples, fault)?];
    out.extend(check_coefficients(fd)?);
    out.push(check_hessian(hess));
    out.push(check_grid(&grid_instances(grid), hs, vs)?);
    Ok(out)
}
