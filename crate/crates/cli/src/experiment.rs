//! Parameter sweeps: every (sweep value, seed, method) combination is one
//! solve; results go to a per-run CSV, a per-iteration trace CSV, a
//! mean/std summary CSV and an SVG chart of mean completion time.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uavmec_core::channel::ChannelParams;
use uavmec_core::optimizer::{solve, Method, OptimizerConfig, SolveReport};
use uavmec_core::scenario::{generate, FleetConfig, Scenario, TaskSpec};

use crate::output::{comment_header, write_csv};
use crate::svg::{line_chart, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    NumUes,
    NumUavs,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::NumUes => "num_ues",
            SweepVar::NumUavs => "num_uavs",
        }
    }
}

/// A sweep read from TOML.
///
/// Scenarios come from `scenario` when set (its UE list is truncated for a
/// `num_ues` sweep) and are generated from `fleet`/`channel`/`task` with the
/// run seed otherwise. Generated layouts are nested: the first `n` UEs of a
/// seed are the same for every `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub methods: Vec<Method>,
    pub sweep_var: SweepVar,
    pub values: Vec<usize>,
    #[serde(default = "one")]
    pub seeds_per_point: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// UE count when sweeping UAVs.
    #[serde(default)]
    pub num_ues: Option<usize>,
    /// UAV count when sweeping UEs.
    #[serde(default)]
    pub num_uavs: Option<usize>,
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    #[serde(default)]
    pub fleet: FleetConfig,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub task: TaskSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Write measured wall time; `false` writes 0 so that reruns are
    /// byte-identical.
    #[serde(default = "yes")]
    pub record_wall_clock: bool,
}

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut spec: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(s) = &spec.scenario {
            if s.is_relative() {
                spec.scenario = Some(path.parent().unwrap_or(Path::new(".")).join(s));
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            bail!("spec: at least one method is required");
        }
        if self.values.is_empty() || self.values.windows(2).any(|w| w[0] >= w[1]) {
            bail!("spec: values must be non-empty and strictly increasing");
        }
        if self.values[0] == 0 {
            bail!("spec: values must be positive");
        }
        if self.seeds_per_point == 0 {
            bail!("spec: seeds_per_point must be at least 1");
        }
        match self.sweep_var {
            SweepVar::NumUes if self.scenario.is_none() && self.num_uavs.is_none() => {
                bail!("spec: num_uavs is required when sweeping num_ues")
            }
            SweepVar::NumUavs if self.scenario.is_none() && self.num_ues.is_none() => {
                bail!("spec: num_ues is required when sweeping num_uavs")
            }
            _ => {}
        }
        self.optimizer.validate()?;
        Ok(())
    }

    fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds_per_point).map(move |k| self.base_seed + k)
    }

    /// Scenario of one sweep point.
    pub fn scenario_for(&self, value: usize, seed: u64) -> Result<Scenario> {
        let scenario = match &self.scenario {
            Some(path) => {
                let mut base = Scenario::load(path)?;
                base.seed = seed;
                match self.sweep_var {
                    SweepVar::NumUes => base.truncated(value)?,
                    SweepVar::NumUavs => base.with_num_uavs(value)?,
                }
            }
            None => {
                let (n, m) = match self.sweep_var {
                    SweepVar::NumUes => (value, self.num_uavs.unwrap_or(self.fleet.num_uavs)),
                    SweepVar::NumUavs => (self.num_ues.unwrap_or(value), value),
                };
                let fleet = FleetConfig {
                    num_uavs: m,
                    ..self.fleet.clone()
                };
                generate(seed, n, &fleet, &self.channel, &self.task)?
            }
        };
        Ok(scenario)
    }
}

/// One solve of a sweep.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub value: usize,
    pub seed: u64,
    pub method: Method,
    pub outcome: std::result::Result<SolveReport, String>,
}

impl RunRecord {
    pub fn status(&self) -> String {
        match &self.outcome {
            Ok(r) if r.converged => "converged".into(),
            Ok(_) => "iter_limit".into(),
            Err(e) => format!("error: {e}"),
        }
    }
}

/// Result of a sweep: every run in (value, seed, method) order plus the
/// files written.
#[derive(Debug)]
pub struct SweepOutcome {
    pub runs: Vec<RunRecord>,
    pub runs_csv: PathBuf,
    pub traces_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub chart_svg: PathBuf,
}

pub const RUN_COLUMNS: [&str; 13] = [
    "sweep_var",
    "value",
    "method",
    "seed",
    "mu_s",
    "iters",
    "wall_ms",
    "status",
    "mu_model_s",
    "elev_gap",
    "rate_gap",
    "elev_slack",
    "rate_slack",
];

/// Run every combination on `jobs` threads and write the outputs into
/// `out_dir`. Failed runs are recorded with their error and do not stop
/// the sweep.
pub fn run_sweep(spec: &ExperimentSpec, out_dir: &Path, jobs: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut combos = Vec::new();
    for &value in &spec.values {
        for seed in spec.seeds() {
            for &method in &spec.methods {
                combos.push((value, seed, method));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let runs: Vec<RunRecord> = pool.install(|| {
        combos
            .par_iter()
            .map(|&(value, seed, method)| {
                let outcome = spec
                    .scenario_for(value, seed)
                    .map_err(|e| e.to_string())
                    .and_then(|s| {
                        let cfg = OptimizerConfig {
                            seed,
                            ..spec.optimizer.clone()
                        };
                        let started = Instant::now();
                        let mut report = solve(method, &s, &cfg).map_err(|e| e.to_string())?;
                        report.wall_time_ms = started.elapsed().as_millis() as u64;
                        Ok(report)
                    });
                if let Err(e) = &outcome {
                    log::warn!("{} = {value}, seed {seed}, {method}: {e}", spec.sweep_var.as_str());
                }
                RunRecord {
                    value,
                    seed,
                    method,
                    outcome,
                }
            })
            .collect()
    });

    let header = comment_header(&[
        ("base_seed", spec.base_seed.to_string()),
        ("config", serde_json::to_string(spec)?),
    ]);
    let var = spec.sweep_var.as_str();
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let mut row = vec![var.to_string(), r.value.to_string(), r.method.to_string(), r.seed.to_string()];
            match &r.outcome {
                Ok(rep) => {
                    let wall = if spec.record_wall_clock { rep.wall_time_ms } else { 0 };
                    row.extend([
                        rep.mu.to_string(),
                        rep.iterations.to_string(),
                        wall.to_string(),
                        r.status(),
                        rep.mu_model.to_string(),
                        rep.max_elevation_gap.to_string(),
                        rep.max_rate_gap.to_string(),
                        rep.max_elevation_slack.to_string(),
                        rep.max_rate_slack.to_string(),
                    ]);
                }
                Err(_) => {
                    row.extend(["", "", "0"].map(String::from));
                    row.push(r.status());
                    row.extend(["", "", "", "", ""].map(String::from));
                }
            }
            row
        })
        .collect();
    let runs_csv = out_dir.join("runs.csv");
    write_csv(&runs_csv, &header, &RUN_COLUMNS, &rows)?;

    let traces: Vec<Vec<String>> = runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|rep| (r, rep)))
        .flat_map(|(r, rep)| {
            rep.mu_trace.iter().enumerate().map(move |(k, mu)| {
                vec![
                    var.to_string(),
                    r.value.to_string(),
                    r.method.to_string(),
                    r.seed.to_string(),
                    (k + 1).to_string(),
                    mu.to_string(),
                ]
            })
        })
        .collect();
    let traces_csv = out_dir.join("traces.csv");
    write_csv(
        &traces_csv,
        &header,
        &["sweep_var", "value", "method", "seed", "iter", "mu_s"],
        &traces,
    )?;

    let summary = summarize(spec, &runs);
    let summary_rows: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            vec![
                var.to_string(),
                s.value.to_string(),
                s.method.to_string(),
                s.count.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
            ]
        })
        .collect();
    let summary_csv = out_dir.join("summary.csv");
    write_csv(
        &summary_csv,
        &header,
        &["sweep_var", "value", "method", "n", "mean_mu_s", "std_mu_s"],
        &summary_rows,
    )?;

    let series: Vec<Series> = spec
        .methods
        .iter()
        .map(|&m| Series {
            label: m.to_string(),
            points: summary
                .iter()
                .filter(|s| s.method == m && s.count > 0)
                .map(|s| (s.value as f64, s.mean))
                .collect(),
        })
        .collect();
    let chart_svg = out_dir.join("chart.svg");
    let title = format!("Mean completion time vs {var}");
    fs::write(&chart_svg, line_chart(&title, var, "mean completion time (s)", &series))
        .with_context(|| format!("writing {}", chart_svg.display()))?;

    Ok(SweepOutcome {
        runs,
        runs_csv,
        traces_csv,
        summary_csv,
        chart_svg,
    })
}

/// Mean and sample standard deviation of `mu` per (value, method).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: usize,
    pub method: Method,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(spec: &ExperimentSpec, runs: &[RunRecord]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &value in &spec.values {
        for &method in &spec.methods {
            let mus: Vec<f64> = runs
                .iter()
                .filter(|r| r.value == value && r.method == method)
                .filter_map(|r| r.outcome.as_ref().ok().map(|rep| rep.mu))
                .collect();
            let count = mus.len();
            let mean = if count > 0 { mus.iter().sum::<f64>() / count as f64 } else { f64::NAN };
            let std = if count > 1 {
                (mus.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
            } else {
                0.0
            };
            out.push(SummaryRow {
                value,
                method,
                count,
                mean,
                std,
            });
        }
    }
    out
}
