//! Output files. Every file starts with provenance: CSVs carry `#` comment
//! lines, JSON reports carry the same fields at the top level.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use uavmec_core::optimizer::{OptimizerConfig, SolveReport};
use uavmec_core::scenario::Scenario;

use crate::{CSV_SCHEMA_VERSION, GIT_DESCRIBE};

/// `# key: value` lines: schema version, git describe, then `extra`.
pub fn comment_header(extra: &[(&str, String)]) -> String {
    let mut out = format!("# schema_version: {CSV_SCHEMA_VERSION}\n# git_describe: {GIT_DESCRIBE}\n");
    for (k, v) in extra {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    out
}

/// Write a CSV file preceded by its comment header.
pub fn write_csv(path: &Path, header: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = header.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(columns)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

/// Read back a CSV written by [`write_csv`], skipping comment lines.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((headers, rows))
}

#[derive(Debug, Serialize)]
pub struct SolveArtifact<'a> {
    pub schema_version: u32,
    pub git_describe: &'a str,
    pub scenario_hash: String,
    pub scenario_seed: u64,
    pub config: &'a OptimizerConfig,
    pub report: &'a SolveReport,
}

/// Files written for one solve.
#[derive(Debug, Clone)]
pub struct SolveFiles {
    pub report: PathBuf,
    pub deployment: PathBuf,
    pub association: PathBuf,
}

/// Write `<method>_report.json`, `<method>_deployment.csv` and
/// `<method>_association.csv` into `dir`.
pub fn write_solve_outputs(
    dir: &Path,
    scenario: &Scenario,
    config: &OptimizerConfig,
    report: &SolveReport,
) -> Result<SolveFiles> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let method = report.method.as_str();
    let hash = scenario.content_hash();
    let artifact = SolveArtifact {
        schema_version: CSV_SCHEMA_VERSION,
        git_describe: GIT_DESCRIBE,
        scenario_hash: hash.clone(),
        scenario_seed: scenario.seed,
        config,
        report,
    };
    let files = SolveFiles {
        report: dir.join(format!("{method}_report.json")),
        deployment: dir.join(format!("{method}_deployment.csv")),
        association: dir.join(format!("{method}_association.csv")),
    };
    let mut f = fs::File::create(&files.report).with_context(|| format!("creating {}", files.report.display()))?;
    serde_json::to_writer_pretty(&mut f, &artifact)?;
    writeln!(f)?;

    let header = comment_header(&[
        ("scenario_seed", scenario.seed.to_string()),
        ("scenario_hash", hash),
        ("method", method.to_string()),
        ("config", serde_json::to_string(config)?),
    ]);
    let deployment: Vec<Vec<String>> = report
        .deployment
        .uavs()
        .iter()
        .enumerate()
        .map(|(j, u)| vec![j.to_string(), u.q.x.to_string(), u.q.y.to_string(), u.h.to_string()])
        .collect();
    write_csv(&files.deployment, &header, &["uav_id", "x_m", "y_m", "h_m"], &deployment)?;
    let association: Vec<Vec<String>> = report
        .association
        .assignment()
        .iter()
        .enumerate()
        .map(|(i, j)| vec![i.to_string(), j.to_string()])
        .collect();
    write_csv(&files.association, &header, &["ue_id", "uav_id"], &association)?;
    Ok(files)
}
