use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use uavmec_cli::output::read_csv;

fn uavmec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavmec"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("spawn uavmec")
}

fn gen(dir: &Path, ues: usize, uavs: usize, seed: u64) -> String {
    let path = dir.join(format!("s_{ues}_{uavs}_{seed}.toml"));
    let p = path.to_str().unwrap().to_string();
    let out = uavmec(&["gen", "--ues", &ues.to_string(), "--uavs", &uavs.to_string(), "--seed", &seed.to_string(), "--out", &p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

#[test]
fn solve_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 6, 2, 3);
    let out_dir = dir.path().join("out");
    let out = uavmec(&["solve", "--scenario", &s, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("proposed: mu = "));

    let (cols, rows) = read_csv(&out_dir.join("proposed_deployment.csv")).unwrap();
    assert_eq!(cols, ["uav_id", "x_m", "y_m", "h_m"]);
    assert_eq!(rows.len(), 2);
    let (cols, rows) = read_csv(&out_dir.join("proposed_association.csv")).unwrap();
    assert_eq!(cols, ["ue_id", "uav_id"]);
    assert_eq!(rows.len(), 6);
    let text = fs::read_to_string(out_dir.join("proposed_deployment.csv")).unwrap();
    assert!(text.contains("# scenario_hash: "));
}

#[test]
fn iteration_limit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 12, 3, 5);
    let out_dir = dir.path().join("out");
    let out = uavmec(&["solve", "--scenario", &s, "--max-iters", "1", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_scenario_exits_one() {
    let out = uavmec(&["solve", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn all_methods_share_the_scenario_hash() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 5, 2, 8);
    let out_dir = dir.path().join("out");
    let out = uavmec(&["solve", "--scenario", &s, "--method", "all", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.code() == Some(0) || out.status.code() == Some(2));
    let hashes: Vec<String> = ["proposed", "hpo", "vpo", "clbo"]
        .iter()
        .map(|m| {
            let text = fs::read_to_string(out_dir.join(format!("{m}_report.json"))).unwrap();
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["report"]["method"], *m);
            v["scenario_hash"].as_str().unwrap().to_string()
        })
        .collect();
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(hashes[0].len(), 64);
}

#[test]
fn sweep_is_deterministic_without_wall_clock() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    fs::write(
        &spec,
        "methods = [\"proposed\", \"hpo\"]\nsweep_var = \"num_ues\"\nvalues = [4, 8]\nseeds_per_point = 2\nnum_uavs = 2\n\n[optimizer]\nrestarts = 1\n",
    )
    .unwrap();
    let run = |name: &str, jobs: &str| {
        let out_dir = dir.path().join(name);
        let out = uavmec(&["sweep", "--spec", spec.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--jobs", jobs, "--no-wall-clock"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let a = run("a", "1");
    let b = run("b", "4");
    for f in ["runs.csv", "traces.csv", "summary.csv", "chart.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (cols, rows) = read_csv(&a.join("runs.csv")).unwrap();
    assert_eq!(cols[..4], ["sweep_var", "value", "method", "seed"]);
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r[6] == "0"));
}

#[test]
fn bad_spec_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    fs::write(&spec, "methods = [\"proposed\"]\nsweep_var = \"num_ues\"\nvalues = [8, 4]\nnum_uavs = 2\n").unwrap();
    let out = uavmec(&["sweep", "--spec", spec.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_catches_injected_fault() {
    let out = uavmec(&["verify", "--level", "fast", "--inject-fault", "psi-sign"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL bound_domination"), "{stdout}");
}

#[test]
fn verify_fast_passes() {
    let out = uavmec(&["verify", "--level", "fast"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
