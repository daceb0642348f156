//! Experiment plumbing around `rsfog`: single solves, seed-averaged sweeps
//! and the self-test suite. The `rsfog` binary is a thin CLI over this.

pub mod selftest;
pub mod sweep;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rsfog::{build_scenario, solve_scheme, AoOptions, SchemeKind, Solution, SystemConfig};

pub const CSV_HEADER: [&str; 11] =
    ["scheme", "seed", "param", "value", "T_u", "T_p", "T_d", "T_total", "iterations", "status", "wall_ms"];

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad flags, config keys or sweep values; exit code 2.
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Config errors are the caller's fault, everything else is a runtime failure.
pub fn core_error(e: rsfog::Error) -> HarnessError {
    match e {
        rsfog::Error::Config(_) => HarnessError::Usage(e.to_string()),
        _ => HarnessError::Runtime(e.to_string()),
    }
}

pub fn load_config(path: &Path) -> Result<SystemConfig> {
    SystemConfig::from_file(path).map_err(|e| HarnessError::Usage(e.to_string()))
}

/// One CSV line. Mean rows carry `seed = "mean"` and the excluded-cell count
/// in `status`; detail rows carry the numeric seed and the AO status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub seed: String,
    pub param: String,
    pub value: f64,
    #[serde(rename = "T_u")]
    pub t_u: f64,
    #[serde(rename = "T_p")]
    pub t_p: f64,
    #[serde(rename = "T_d")]
    pub t_d: f64,
    #[serde(rename = "T_total")]
    pub t_total: f64,
    /// Mean rows hold the rounded mean.
    pub iterations: usize,
    pub status: String,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn from_solution(kind: SchemeKind, seed: u64, param: &str, value: f64, sol: &Solution, wall_ms: f64) -> Self {
        let t = &sol.report.times;
        ResultRow {
            scheme: kind.name().to_string(),
            seed: seed.to_string(),
            param: param.to_string(),
            value,
            t_u: t.t_u,
            t_p: t.t_p,
            t_d: t.t_d,
            t_total: t.total(),
            iterations: sol.iterations,
            status: sol.status.as_str().to_string(),
            wall_ms,
        }
    }

    /// Row for a cell whose solve returned an error.
    pub fn failed(kind: SchemeKind, seed: u64, param: &str, value: f64, wall_ms: f64) -> Self {
        ResultRow {
            scheme: kind.name().to_string(),
            seed: seed.to_string(),
            param: param.to_string(),
            value,
            t_u: f64::NAN,
            t_p: f64::NAN,
            t_d: f64::NAN,
            t_total: f64::NAN,
            iterations: 0,
            status: rsfog::Status::Infeasible.as_str().to_string(),
            wall_ms,
        }
    }

    pub fn is_mean(&self) -> bool {
        self.seed == "mean"
    }
}

pub fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct SolveDump<'a> {
    scheme: &'a str,
    seed: u64,
    config: &'a SystemConfig,
    objective: f64,
    solution: &'a Solution,
}

#[derive(Debug)]
pub struct SolveOutput {
    pub row: ResultRow,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

/// One AO run; writes `solve.csv` (header plus one row) and `solution.json`
/// into `out`. An infeasible instance is an error.
pub fn run_solve(cfg: &SystemConfig, kind: SchemeKind, seed: u64, out: &Path) -> Result<SolveOutput> {
    let scn = build_scenario(cfg, seed).map_err(core_error)?;
    let start = Instant::now();
    let sol = solve_scheme(kind, &scn, &AoOptions::from_config(&scn)).map_err(core_error)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    if sol.status == rsfog::Status::Infeasible {
        return Err(HarnessError::Runtime(format!("{kind} on seed {seed} is infeasible")));
    }
    let row = ResultRow::from_solution(kind, seed, "none", 0.0, &sol, wall_ms);

    fs::create_dir_all(out)?;
    let csv_path = out.join("solve.csv");
    let mut w = csv_writer(fs::File::create(&csv_path)?);
    w.serialize(&row)?;
    w.flush()?;

    let json_path = out.join("solution.json");
    let dump = SolveDump { scheme: kind.name(), seed, config: cfg, objective: sol.objective(), solution: &sol };
    let text = serde_json::to_string_pretty(&dump).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    fs::write(&json_path, text)?;
    Ok(SolveOutput { row, csv_path, json_path })
}
