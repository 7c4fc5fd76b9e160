use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use uavmec_cli::experiment::{run_sweep, ExperimentSpec};
use uavmec_cli::output::write_solve_outputs;
use uavmec_cli::verify::{run_verify, Level};
use uavmec_core::channel::ChannelParams;
use uavmec_core::optimizer::{solve, Method, OptimizerConfig};
use uavmec_core::oracle::Fault;
use uavmec_core::scenario::{generate, FleetConfig, Scenario, TaskSpec};

const EXIT_ITER_LIMIT: u8 = 2;

#[derive(Parser)]
#[command(name = "uavmec", version, about = "UAV placement and UE association for edge computing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Proposed,
    Hpo,
    Vpo,
    Clbo,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Proposed => vec![Method::Proposed],
            MethodArg::Hpo => vec![Method::Hpo],
            MethodArg::Vpo => vec![Method::Vpo],
            MethodArg::Clbo => vec![Method::Clbo],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    PsiSign,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "proposed")]
        method: MethodArg,
        /// Seed of the random initial deployments.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Relative convergence tolerance of the outer loop.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a parameter sweep described by a TOML file.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        jobs: Option<usize>,
        /// Write 0 instead of measured wall time so reruns are byte-identical.
        #[arg(long)]
        no_wall_clock: bool,
    },
    /// Check the bounds and the solver against independent oracles.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: LevelArg,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Generate a random scenario file.
    Gen {
        #[arg(long)]
        ues: usize,
        #[arg(long)]
        uavs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            scenario,
            method,
            seed,
            max_iters,
            tol,
            restarts,
            out,
        } => {
            let s = Scenario::load(&scenario)?;
            let mut config = OptimizerConfig::default();
            if let Some(v) = seed {
                config.seed = v;
            }
            if let Some(v) = max_iters {
                config.max_outer_iters = v;
            }
            if let Some(v) = tol {
                config.rel_tol = v;
            }
            if let Some(v) = restarts {
                config.restarts = v;
            }
            config.validate()?;
            let mut all_converged = true;
            for m in method.methods() {
                let report = solve(m, &s, &config).with_context(|| format!("solving with {m}"))?;
                let files = write_solve_outputs(&out, &s, &config, &report)?;
                println!(
                    "{m}: mu = {:.6} s, iterations = {}, converged = {}, report = {}",
                    report.mu,
                    report.iterations,
                    report.converged,
                    files.report.display()
                );
                all_converged &= report.converged;
            }
            Ok(if all_converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ITER_LIMIT)
            })
        }
        Command::Sweep {
            spec,
            out,
            jobs,
            no_wall_clock,
        } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if no_wall_clock {
                spec.record_wall_clock = false;
            }
            let jobs = jobs.unwrap_or_else(rayon::current_num_threads);
            let outcome = run_sweep(&spec, &out, jobs)?;
            let failed = outcome.runs.iter().filter(|r| r.outcome.is_err()).count();
            println!(
                "{} runs ({failed} failed); wrote {}, {}, {}, {}",
                outcome.runs.len(),
                outcome.runs_csv.display(),
                outcome.traces_csv.display(),
                outcome.summary_csv.display(),
                outcome.chart_svg.display()
            );
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Verify { level, inject_fault } => {
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Full => Level::Full,
            };
            let fault = match inject_fault {
                Some(FaultArg::PsiSign) => Fault::FlipPsiSign,
                None => Fault::None,
            };
            let results = run_verify(level, fault)?;
            for r in &results {
                println!("{r}");
            }
            Ok(if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Gen { ues, uavs, seed, out } => {
            let fleet = FleetConfig {
                num_uavs: uavs,
                ..Default::default()
            };
            let s = generate(seed, ues, &fleet, &ChannelParams::default(), &TaskSpec::default())?;
            s.save(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} ({ues} UEs, {uavs} UAVs, hash {})", out.display(), s.content_hash());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
