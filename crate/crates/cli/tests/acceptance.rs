//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! gating criterion fails. Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use uavmec_cli::experiment::{run_sweep, ExperimentSpec, RunRecord, SweepVar};
use uavmec_cli::verify::{check_domination, check_grid, check_hessian, coefficient_error, grid_instances, FD_TOL};
use uavmec_core::channel::ChannelParams;
use uavmec_core::optimizer::{solve_proposed, Method, OptimizerConfig, SolveReport};
use uavmec_core::oracle::Fault;
use uavmec_core::scenario::{generate, FleetConfig, TaskSpec};

const MONOTONE_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 30;
const MIN_CONVERGED: usize = 18;
const TIGHTNESS_TOL: f64 = 1e-4;
const CLBO_TOL: f64 = 1e-6;
const ORDER_FRACTION: f64 = 0.9;
const SEEDS_SMALL: u64 = 20;
const SEEDS_TREND: u64 = 10;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, passed: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if passed { "PASS" } else { "FAIL" });
        if !passed {
            self.failed += 1;
        }
    }

    fn info(&self, id: &str, detail: String) {
        println!("INFO criterion {id}: {detail}");
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn spec(methods: Vec<Method>, var: SweepVar, values: Vec<usize>, seeds: u64, fixed: usize) -> ExperimentSpec {
    let text = format!(
        "methods = []\nsweep_var = \"{}\"\nvalues = [1]\nseeds_per_point = {seeds}\n",
        var.as_str()
    );
    let mut s: ExperimentSpec = toml::from_str(&text).expect("spec template");
    s.methods = methods;
    s.values = values;
    match var {
        SweepVar::NumUes => s.num_uavs = Some(fixed),
        SweepVar::NumUavs => s.num_ues = Some(fixed),
    }
    s.optimizer = OptimizerConfig {
        max_outer_iters: MAX_ITERS,
        ..Default::default()
    };
    s.record_wall_clock = false;
    s
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Run a sweep twice into separate directories and compare every CSV.
fn sweep_twice(spec: &ExperimentSpec, root: &Path, name: &str) -> (Vec<RunRecord>, bool, Duration) {
    let started = Instant::now();
    let a = run_sweep(spec, &root.join(format!("{name}_a")), jobs()).expect("sweep");
    let elapsed = started.elapsed();
    let b = run_sweep(spec, &root.join(format!("{name}_b")), jobs()).expect("sweep rerun");
    let same = [
        (&a.runs_csv, &b.runs_csv),
        (&a.traces_csv, &b.traces_csv),
        (&a.summary_csv, &b.summary_csv),
    ]
    .iter()
    .all(|(x, y)| std::fs::read(x).ok() == std::fs::read(y).ok());
    (a.runs, same, elapsed)
}

/// `mu[method][value][seed]`; failed runs are absent.
fn by_method(runs: &[RunRecord]) -> BTreeMap<(Method, usize), BTreeMap<u64, f64>> {
    let mut out: BTreeMap<(Method, usize), BTreeMap<u64, f64>> = BTreeMap::new();
    for r in runs {
        if let Ok(rep) = &r.outcome {
            out.entry((r.method, r.value)).or_default().insert(r.seed, rep.mu);
        }
    }
    out
}

fn mean(v: &BTreeMap<u64, f64>) -> f64 {
    v.values().sum::<f64>() / v.len().max(1) as f64
}

/// Trend of the per-method means and per-pair ordering of a sweep.
fn trend(runs: &[RunRecord], values: &[usize], increasing: bool) -> (bool, usize, usize, BTreeMap<(Method, usize), f64>) {
    let mu = by_method(runs);
    let mut means = BTreeMap::new();
    let mut monotone = true;
    for m in [Method::Proposed, Method::Hpo, Method::Vpo] {
        let ms: Vec<f64> = values.iter().map(|&v| mu.get(&(m, v)).map_or(f64::NAN, mean)).collect();
        for (v, x) in values.iter().zip(&ms) {
            means.insert((m, *v), *x);
        }
        monotone &= ms.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
    }
    let (mut ok, mut total) = (0, 0);
    for &v in values {
        let Some(p) = mu.get(&(Method::Proposed, v)) else { continue };
        for (seed, &pm) in p {
            total += 1;
            let beats = [Method::Hpo, Method::Vpo]
                .iter()
                .all(|b| mu.get(&(*b, v)).and_then(|x| x.get(seed)).is_some_and(|&bm| pm <= bm));
            ok += usize::from(beats);
        }
    }
    (monotone, ok, total, means)
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    let tmp = tempfile::tempdir().expect("tempdir");

    let t = Instant::now();
    let dom = check_domination(10, 10_000, Fault::None).expect("domination");
    let el = t.elapsed();
    report.line("1", dom.passed && el < Duration::from_secs(30), format!("{}; {:.2} s (< 30 s)", dom.detail, secs(el)));

    let t = Instant::now();
    let psi = coefficient_error(1_000, 21, false).expect("psi");
    let phi = coefficient_error(1_000, 22, true).expect("phi");
    let el = t.elapsed();
    report.line(
        "2",
        psi <= FD_TOL && phi <= FD_TOL && el < Duration::from_secs(10),
        format!("max rel error psi {psi:e}, phi {phi:e} (<= {FD_TOL:e}); {:.2} s (< 10 s)", secs(el)),
    );

    let t = Instant::now();
    let hess = check_hessian(1_000);
    let el = t.elapsed();
    report.line("3", hess.passed && el < Duration::from_secs(5), format!("{}; {:.2} s (< 5 s)", hess.detail, secs(el)));

    let small = spec(vec![Method::Proposed, Method::Clbo], SweepVar::NumUes, vec![30], SEEDS_SMALL, 3);
    let (runs, same_small, el) = sweep_twice(&small, tmp.path(), "bcd");
    let proposed: Vec<_> = runs
        .iter()
        .filter(|r| r.method == Method::Proposed)
        .filter_map(|r| r.outcome.as_ref().ok().map(|rep| (r.seed, rep)))
        .collect();
    let monotone = proposed
        .iter()
        .all(|(_, r)| r.mu_trace.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL));
    let converged: Vec<_> = proposed
        .iter()
        .filter(|(_, r)| r.converged && r.iterations <= MAX_ITERS)
        .collect();
    let max_iters = proposed.iter().map(|(_, r)| r.iterations).max().unwrap_or(0);
    report.line(
        "4",
        proposed.len() == SEEDS_SMALL as usize
            && monotone
            && converged.len() >= MIN_CONVERGED
            && el < Duration::from_secs(600),
        format!(
            "traces non-increasing within {MONOTONE_TOL:e}: {monotone}; converged within {MAX_ITERS} iterations on {}/{SEEDS_SMALL} (>= {MIN_CONVERGED}), max {max_iters}; {:.1} s (< 600 s)",
            converged.len(),
            secs(el)
        ),
    );
    let fold = |f: &dyn Fn(&SolveReport) -> f64| converged.iter().fold(0.0f64, |a, (_, rep)| a.max(f(rep)));
    let elev_slack = fold(&|r| r.max_elevation_slack);
    let rate_slack = fold(&|r| r.max_rate_slack);
    let elev_gap = fold(&|r| r.max_elevation_gap);
    let rate_gap = fold(&|r| r.max_rate_gap);
    report.line(
        "5",
        !converged.is_empty() && [elev_slack, rate_slack, elev_gap, rate_gap].iter().all(|&g| g <= TIGHTNESS_TOL),
        format!(
            "{} converged solutions; raw solver slack: elevation {elev_slack:e}, relative rate {rate_slack:e}; gap to true values: elevation {elev_gap:e}, relative rate {rate_gap:e} (all <= {TIGHTNESS_TOL:e})",
            converged.len()
        ),
    );

    let t = Instant::now();
    let grid = check_grid(&grid_instances(10), 1.0, 0.5).expect("grid");
    let el = t.elapsed();
    report.line("6", grid.passed && el < Duration::from_secs(300), format!("{}; {:.1} s (< 300 s)", grid.detail, secs(el)));

    let values7 = vec![10, 20, 40, 80];
    let fig4 = spec(vec![Method::Proposed, Method::Hpo, Method::Vpo], SweepVar::NumUes, values7.clone(), SEEDS_TREND, 5);
    let (runs7, same7, el) = sweep_twice(&fig4, tmp.path(), "fig4");
    let (mono7, ok7, total7, means7) = trend(&runs7, &values7, true);
    let gap = |m: Method, n: usize| means7[&(m, n)] - means7[&(Method::Proposed, n)];
    let growing = [Method::Hpo, Method::Vpo].iter().all(|&m| gap(m, 80) > gap(m, 10));
    report.line(
        "7",
        mono7
            && total7 == values7.len() * SEEDS_TREND as usize
            && ok7 as f64 >= ORDER_FRACTION * total7 as f64
            && growing
            && el < Duration::from_secs(1800),
        format!(
            "means strictly increasing in N: {mono7}; proposed <= HPO, VPO on {ok7}/{total7} (>= {:.0}%); gap HPO {:.4} -> {:.4} s, VPO {:.4} -> {:.4} s; {:.1} s (< 1800 s)",
            100.0 * ORDER_FRACTION,
            gap(Method::Hpo, 10),
            gap(Method::Hpo, 80),
            gap(Method::Vpo, 10),
            gap(Method::Vpo, 80),
            secs(el)
        ),
    );

    let values8: Vec<usize> = (5..=10).collect();
    let fig5 = spec(vec![Method::Proposed, Method::Hpo, Method::Vpo], SweepVar::NumUavs, values8.clone(), SEEDS_TREND, 80);
    let (runs8, same8, el) = sweep_twice(&fig5, tmp.path(), "fig5");
    let (mono8, ok8, total8, _) = trend(&runs8, &values8, false);
    report.line(
        "8",
        mono8
            && total8 == values8.len() * SEEDS_TREND as usize
            && ok8 as f64 >= ORDER_FRACTION * total8 as f64
            && el < Duration::from_secs(2700),
        format!(
            "means strictly decreasing in M: {mono8}; proposed <= HPO, VPO on {ok8}/{total8} (>= {:.0}%); {:.1} s (< 2700 s)",
            100.0 * ORDER_FRACTION,
            secs(el)
        ),
    );

    let mu = by_method(&runs);
    let (p, c) = (&mu[&(Method::Proposed, 30)], &mu[&(Method::Clbo, 30)]);
    let wins = p.iter().filter(|(s, &pm)| c.get(s).is_some_and(|&cm| pm <= cm + CLBO_TOL)).count();
    let needed = (ORDER_FRACTION * SEEDS_SMALL as f64).ceil() as usize;
    report.line(
        "9",
        wins >= needed,
        format!("proposed <= CLBO (Rician re-evaluation) + {CLBO_TOL:e} on {wins}/{SEEDS_SMALL} (>= {needed}), N=30, M=3"),
    );

    let fleet = FleetConfig {
        num_uavs: 5,
        ..Default::default()
    };
    let s = generate(0, 50, &fleet, &ChannelParams::default(), &TaskSpec::default()).expect("scenario");
    let t = Instant::now();
    let r = solve_proposed(&s, &OptimizerConfig::default()).expect("solve");
    report.info(
        "10",
        format!("N=50, M=5 solve in {:.2} s (target < 60 s), mu {:.6} s, {} iterations", secs(t.elapsed()), r.mu, r.iterations),
    );

    report.line(
        "11",
        same_small && same7 && same8,
        format!("byte-identical reruns: criterion 4 {same_small}, criterion 7 {same7}, criterion 8 {same8}"),
    );

    println!("{} criteria failed", report.failed);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
