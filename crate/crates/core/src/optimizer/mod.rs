//! Block-coordinate descent over association, horizontal positions and
//! altitudes, plus the three reference strategies:
//!
//! * HPO: horizontal positions only, every UAV at a fixed altitude.
//! * VPO: k-means positions and nearest-centroid association, altitudes only.
//! * CLBO: the full loop under the line-of-sight rate model.

mod kmeans;

pub use kmeans::{kmeans, KMeans};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::association::{round, service_time_matrix_with, solve_relaxed, Association};
use crate::channel::RateModel;
use crate::placement::{solve_horizontal, solve_vertical, ExpansionPoint, ServedUe, SubproblemSolution, UavContext};
use crate::scenario::{MotionBox, Scenario};
use crate::{Error, Point2, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavPosition {
    pub q: Point2,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    uavs: Vec<UavPosition>,
}

impl Deployment {
    pub fn new(uavs: Vec<UavPosition>) -> Self {
        Self { uavs }
    }

    pub fn uavs(&self) -> &[UavPosition] {
        &self.uavs
    }

    pub fn len(&self) -> usize {
        self.uavs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uavs.is_empty()
    }

    pub fn get(&self, j: usize) -> UavPosition {
        self.uavs[j]
    }

    pub fn within(&self, bounds: &MotionBox) -> bool {
        self.uavs.iter().all(|u| bounds.contains(u.q, u.h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Hpo,
    Vpo,
    Clbo,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::Hpo, Method::Vpo, Method::Clbo];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Hpo => "hpo",
            Method::Vpo => "vpo",
            Method::Clbo => "clbo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid("method", format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_outer_iters: usize,
    /// Stop once `|mu_prev - mu| / mu_prev` drops below this.
    pub rel_tol: f64,
    /// Random initial deployments tried; the best final result is kept.
    pub restarts: usize,
    pub seed: u64,
    /// Altitude of every UAV under HPO, meters.
    pub hpo_altitude_m: f64,
    /// Duality-gap tolerance of the placement subproblems, seconds.
    pub inner_tol: f64,
    pub kmeans_max_iters: usize,
    /// Keep the previous association when the rounded LP solution would
    /// raise the completion time at the current deployment.
    pub keep_better_association: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 50,
            rel_tol: 1e-4,
            restarts: 3,
            seed: 0,
            hpo_altitude_m: 60.0,
            inner_tol: 1e-9,
            kmeans_max_iters: 300,
            keep_better_association: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters", "must be at least 1"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid("rel_tol", "must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts", "must be at least 1"));
        }
        if !(self.inner_tol > 0.0 && self.inner_tol.is_finite()) {
            return Err(Error::invalid("inner_tol", "must be positive"));
        }
        if !self.hpo_altitude_m.is_finite() {
            return Err(Error::invalid("hpo_altitude_m", "must be finite"));
        }
        Ok(())
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    /// Completion time after every outer iteration, under the model the
    /// method optimizes.
    pub mu_trace: Vec<f64>,
    /// Completion time of the final solution under the elevation-dependent
    /// rate model.
    pub mu: f64,
    /// Completion time under the model the method optimizes (differs from
    /// `mu` only for CLBO).
    pub mu_model: f64,
    pub deployment: Deployment,
    pub association: Association,
    pub per_uav_times: Vec<f64>,
    pub iterations: usize,
    pub wall_time_ms: u64,
    pub converged: bool,
    /// Index of the restart that produced this result.
    pub restart: usize,
    /// Largest gap between an elevation variable and the true elevation sine
    /// in the final subproblem solutions.
    pub max_elevation_gap: f64,
    /// Largest relative gap between a rate variable and the true rate in the
    /// final subproblem solutions.
    pub max_rate_gap: f64,
    /// Largest elevation slack of the raw subproblem solutions of the final
    /// block, before the variables are pushed onto their bounds.
    pub max_elevation_slack: f64,
    /// Largest relative rate slack of the same raw solutions.
    pub max_rate_slack: f64,
    /// Outer iterations whose rounded association was worse than the
    /// incumbent.
    pub association_regressions: usize,
    /// Subproblem solves that ended without an optimal status.
    pub subproblem_failures: usize,
}

/// Per-UAV completion times and their maximum under `model`. A UAV without
/// UEs has time 0.
pub fn completion_time_with(
    scenario: &Scenario,
    deployment: &Deployment,
    association: &Association,
    model: RateModel,
) -> (f64, Vec<f64>) {
    let times: Vec<f64> = (0..deployment.len())
        .map(|j| {
            let ues: Vec<ServedUe> = association
                .served_by(j)
                .into_iter()
                .map(|i| ServedUe::from_scenario(scenario, i))
                .collect();
            let uav = deployment.get(j);
            uav_context(scenario, &ues, model).true_time(uav.q, uav.h)
        })
        .collect();
    (times.iter().copied().fold(0.0, f64::max), times)
}

/// [`completion_time_with`] under the elevation-dependent rate.
pub fn completion_time(scenario: &Scenario, deployment: &Deployment, association: &Association) -> (f64, Vec<f64>) {
    completion_time_with(scenario, deployment, association, RateModel::Rician)
}

fn uav_context<'a>(scenario: &'a Scenario, ues: &'a [ServedUe], model: RateModel) -> UavContext<'a> {
    UavContext {
        ues,
        channel: &scenario.channel,
        model,
        cpu_hz: scenario.fleet.cpu_hz,
        bounds: &scenario.fleet.bounds,
    }
}

/// Which blocks the outer loop updates.
#[derive(Debug, Clone, Copy)]
struct Blocks {
    associate: bool,
    horizontal: bool,
    vertical: bool,
}

struct RunResult {
    deployment: Deployment,
    association: Association,
    mu_trace: Vec<f64>,
    converged: bool,
    last_solutions: Vec<Option<(SubproblemSolution, Vec<ServedUe>)>>,
    regressions: usize,
    failures: usize,
}

/// Association for the current deployment, or `None` when the LP fails.
fn associate(scenario: &Scenario, deployment: &Deployment, model: RateModel) -> Option<(Association, f64)> {
    let times = service_time_matrix_with(scenario, deployment, model);
    match solve_relaxed(&times) {
        Ok(frac) => {
            let a = round(&frac);
            let mu = times.evaluate(&a).0;
            Some((a, mu))
        }
        Err(e) => {
            log::warn!("association LP failed: {e}");
            None
        }
    }
}

/// Each UE to the UAV with the smallest service time.
fn nearest_association(scenario: &Scenario, deployment: &Deployment, model: RateModel) -> Association {
    let times = service_time_matrix_with(scenario, deployment, model);
    let assignment = (0..times.num_ues())
        .map(|i| {
            times
                .row(i)
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (j, &t)| if t < best.1 { (j, t) } else { best })
                .0
        })
        .collect();
    Association::new(assignment, deployment.len()).expect("indices come from the matrix")
}

fn run_bcd(
    scenario: &Scenario,
    config: &OptimizerConfig,
    model: RateModel,
    blocks: Blocks,
    mut deployment: Deployment,
    mut association: Option<Association>,
) -> RunResult {
    let m = deployment.len();
    let mut mu_trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut regressions = 0;
    let mut failures = 0;
    let mut last_solutions: Vec<Option<(SubproblemSolution, Vec<ServedUe>)>> = vec![None; m];

    for _ in 0..config.max_outer_iters {
        if blocks.associate || association.is_none() {
            let incumbent = association
                .as_ref()
                .map(|a| completion_time_with(scenario, &deployment, a, model).0);
            association = match (associate(scenario, &deployment, model), association.take()) {
                (Some((cand, mu)), Some(inc)) => {
                    let inc_mu = incumbent.unwrap();
                    if mu > inc_mu {
                        regressions += 1;
                        log::warn!("rounded association raises mu from {inc_mu} to {mu}");
                        if config.keep_better_association {
                            Some(inc)
                        } else {
                            Some(cand)
                        }
                    } else {
                        Some(cand)
                    }
                }
                (Some((cand, _)), None) => Some(cand),
                (None, Some(inc)) => Some(inc),
                (None, None) => Some(nearest_association(scenario, &deployment, model)),
            };
        }
        let assoc = association.as_ref().expect("set above");

        for j in 0..m {
            let ues: Vec<ServedUe> = assoc
                .served_by(j)
                .into_iter()
                .map(|i| ServedUe::from_scenario(scenario, i))
                .collect();
            if ues.is_empty() {
                last_solutions[j] = None;
                continue;
            }
            let ctx = uav_context(scenario, &ues, model);
            let mut pos = deployment.uavs[j];
            let mut last = None;
            if blocks.horizontal {
                let sol = solve_horizontal(&ctx, &ExpansionPoint::new(pos.q, pos.h, &ctx), config.inner_tol);
                failures += usize::from(!sol.status_ok());
                pos.q = sol.position;
                last = Some(sol);
            }
            if blocks.vertical {
                let sol = solve_vertical(&ctx, &ExpansionPoint::new(pos.q, pos.h, &ctx), config.inner_tol);
                failures += usize::from(!sol.status_ok());
                pos.h = sol.altitude;
                last = Some(sol);
            }
            deployment.uavs[j] = pos;
            last_solutions[j] = last.map(|s| (s, ues));
        }

        let mu = completion_time_with(scenario, &deployment, assoc, model).0;
        let prev = mu_trace.last().copied();
        mu_trace.push(mu);
        if let Some(prev) = prev {
            if (prev - mu).abs() <= config.rel_tol * prev.abs() {
                converged = true;
                break;
            }
        }
    }
    RunResult {
        deployment,
        association: association.expect("at least one iteration"),
        mu_trace,
        converged,
        last_solutions,
        regressions,
        failures,
    }
}

fn random_deployment(bounds: &MotionBox, m: usize, altitude: Option<f64>, rng: &mut ChaCha8Rng) -> Deployment {
    Deployment::new(
        (0..m)
            .map(|_| {
                let q = Point2::new(
                    rng.gen_range(bounds.x_min..=bounds.x_max),
                    rng.gen_range(bounds.y_min..=bounds.y_max),
                );
                let h = altitude.unwrap_or_else(|| rng.gen_range(bounds.h_min..=bounds.h_max));
                UavPosition { q, h }
            })
            .collect(),
    )
}

fn finish(
    scenario: &Scenario,
    method: Method,
    model: RateModel,
    run: RunResult,
    restart: usize,
    started: Instant,
) -> SolveReport {
    let (mu, per_uav_times) = completion_time(scenario, &run.deployment, &run.association);
    let mu_model = match model {
        RateModel::Rician => mu,
        RateModel::LineOfSight => completion_time_with(scenario, &run.deployment, &run.association, model).0,
    };
    let mut max_elevation_gap: f64 = 0.0;
    let mut max_rate_gap: f64 = 0.0;
    let (mut max_elevation_slack, mut max_rate_slack) = (0.0f64, 0.0f64);
    for (sol, ues) in run.last_solutions.iter().flatten() {
        let ctx = uav_context(scenario, ues, model);
        max_elevation_gap = max_elevation_gap.max(sol.elevation_gap(&ctx));
        max_rate_gap = max_rate_gap.max(sol.rate_gap(&ctx));
        max_elevation_slack = max_elevation_slack.max(sol.solver_slack.0);
        max_rate_slack = max_rate_slack.max(sol.solver_slack.1);
    }
    SolveReport {
        method,
        iterations: run.mu_trace.len(),
        mu_trace: run.mu_trace,
        mu,
        mu_model,
        deployment: run.deployment,
        association: run.association,
        per_uav_times,
        wall_time_ms: started.elapsed().as_millis() as u64,
        converged: run.converged,
        restart,
        max_elevation_gap,
        max_rate_gap,
        max_elevation_slack,
        max_rate_slack,
        association_regressions: run.regressions,
        subproblem_failures: run.failures,
    }
}

fn solve_with_restarts(
    scenario: &Scenario,
    config: &OptimizerConfig,
    method: Method,
    model: RateModel,
    blocks: Blocks,
    altitude: Option<f64>,
) -> Result<SolveReport> {
    scenario.validate()?;
    config.validate()?;
    let started = Instant::now();
    let mut best: Option<(RunResult, usize)> = None;
    for restart in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(restart as u64);
        let init = random_deployment(scenario.bounds(), scenario.num_uavs(), altitude, &mut rng);
        let run = run_bcd(scenario, config, model, blocks, init, None);
        let mu = *run.mu_trace.last().expect("at least one iteration");
        let better = best
            .as_ref()
            .is_none_or(|(b, _)| mu < *b.mu_trace.last().expect("non-empty"));
        if better {
            best = Some((run, restart));
        }
    }
    let (run, restart) = best.expect("restarts >= 1");
    Ok(finish(scenario, method, model, run, restart, started))
}

/// Alternate association, horizontal and altitude steps from random
/// starting deployments, keeping the best restart.
pub fn solve_proposed(scenario: &Scenario, config: &OptimizerConfig) -> Result<SolveReport> {
    let blocks = Blocks {
        associate: true,
        horizontal: true,
        vertical: true,
    };
    solve_with_restarts(scenario, config, Method::Proposed, RateModel::Rician, blocks, None)
}

/// Association and horizontal steps only, every UAV at
/// `config.hpo_altitude_m`.
pub fn solve_hpo(scenario: &Scenario, config: &OptimizerConfig) -> Result<SolveReport> {
    let b = scenario.bounds();
    if !(b.h_min..=b.h_max).contains(&config.hpo_altitude_m) {
        return Err(Error::invalid("hpo_altitude_m", "must lie inside the altitude range"));
    }
    let blocks = Blocks {
        associate: true,
        horizontal: true,
        vertical: false,
    };
    solve_with_restarts(
        scenario,
        config,
        Method::Hpo,
        RateModel::Rician,
        blocks,
        Some(config.hpo_altitude_m),
    )
}

/// The full loop under the line-of-sight model. `mu` re-evaluates the
/// resulting deployment under the elevation-dependent model; `mu_model` is
/// the line-of-sight value.
pub fn solve_clbo(scenario: &Scenario, config: &OptimizerConfig) -> Result<SolveReport> {
    let blocks = Blocks {
        associate: true,
        horizontal: true,
        vertical: true,
    };
    solve_with_restarts(scenario, config, Method::Clbo, RateModel::LineOfSight, blocks, None)
}

/// k-means centroids as horizontal positions, nearest-centroid
/// association, then altitude steps until the completion time settles.
///
/// With fewer UEs than UAVs the surplus UAVs stay idle at the box center.
pub fn solve_vpo(scenario: &Scenario, config: &OptimizerConfig) -> Result<SolveReport> {
    scenario.validate()?;
    config.validate()?;
    let started = Instant::now();
    let b = scenario.bounds();
    let points: Vec<Point2> = scenario.ues.iter().map(|u| u.position()).collect();
    let k = scenario.num_uavs().min(points.len());
    let km = kmeans(&points, k, config.seed, config.kmeans_max_iters)?;
    let h0 = 0.5 * (b.h_min + b.h_max);
    let center = Point2::new(0.5 * (b.x_min + b.x_max), 0.5 * (b.y_min + b.y_max));
    let uavs = (0..scenario.num_uavs())
        .map(|j| UavPosition {
            q: km.centroids.get(j).map_or(center, |c| b.clamp_horizontal(*c)),
            h: h0,
        })
        .collect();
    let association = Association::new(km.labels, scenario.num_uavs())?;
    let blocks = Blocks {
        associate: false,
        horizontal: false,
        vertical: true,
    };
    let run = run_bcd(
        scenario,
        config,
        RateModel::Rician,
        blocks,
        Deployment::new(uavs),
        Some(association),
    );
    Ok(finish(scenario, Method::Vpo, RateModel::Rician, run, 0, started))
}

pub fn solve(method: Method, scenario: &Scenario, config: &OptimizerConfig) -> Result<SolveReport> {
    match method {
        Method::Proposed => solve_proposed(scenario, config),
        Method::Hpo => solve_hpo(scenario, config),
        Method::Vpo => solve_vpo(scenario, config),
        Method::Clbo => solve_clbo(scenario, config),
    }
}
