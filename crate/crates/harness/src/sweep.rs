//! Seed-averaged parameter sweeps. Cells run on a bounded rayon pool and
//! stream to one writer thread, which emits rows in cell order so the file
//! does not depend on scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;

use rsfog::{build_scenario, solve_scheme, AoOptions, SchemeKind, Status, SystemConfig};

use crate::{core_error, csv_writer, HarnessError, ResultRow, Result};

/// Offset between the BS and user power in the coupled power sweep (dB).
pub const POWER_PAIR_OFFSET_DB: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Users,
    LMax,
    UserCpu,
    PowerPair,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Users => "K",
            SweepParam::LMax => "L_max_bit",
            SweepParam::UserCpu => "F_k_cyc_s",
            SweepParam::PowerPair => "power_pair_dBm",
        }
    }

    /// `base` with the swept value applied. The power pair sets `P_k = v`
    /// and `P_b = v + 15` dBm.
    pub fn apply(self, base: &SystemConfig, v: f64) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParam::Users => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(HarnessError::Usage(format!("K must be a positive integer, got {v}")));
                }
                cfg.users = v as usize;
            }
            SweepParam::LMax => cfg.l_max_bit = v,
            SweepParam::UserCpu => cfg.f_user_cyc_s = v,
            SweepParam::PowerPair => {
                cfg.p_user_dbm = v;
                cfg.p_bs_dbm = v + POWER_PAIR_OFFSET_DB;
            }
        }
        cfg.validate().map_err(|e| HarnessError::Usage(format!("{}={v}: {e}", self.name())))?;
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" => Ok(SweepParam::Users),
            "L_max_bit" => Ok(SweepParam::LMax),
            "F_k_cyc_s" => Ok(SweepParam::UserCpu),
            "power_pair_dBm" => Ok(SweepParam::PowerPair),
            _ => Err(HarnessError::Usage(format!(
                "unknown sweep parameter {s:?} (expected K, L_max_bit, F_k_cyc_s or power_pair_dBm)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub schemes: Vec<SchemeKind>,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: SystemConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(HarnessError::Usage("at least one scheme is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Usage("at least one seed is required".into()));
        }
        if self.values.is_empty() {
            return Err(HarnessError::Usage("at least one value is required".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::Usage("sweep values must be finite".into()));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HarnessError::Usage("sweep values must be strictly increasing".into()));
        }
        for &v in &self.values {
            self.param.apply(&self.base, v)?;
        }
        Ok(())
    }

    /// Cells in output order: scheme, then value, then seed.
    fn cells(&self) -> Vec<(SchemeKind, f64, u64)> {
        let mut out = Vec::new();
        for &s in &self.schemes {
            for &v in &self.values {
                for &seed in &self.seeds {
                    out.push((s, v, seed));
                }
            }
        }
        out
    }
}

/// Parses `a,b,c` into numbers.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| HarnessError::Usage(format!("bad sweep value {t:?}")))
        })
        .collect()
}

pub fn parse_schemes(text: &str) -> Result<Vec<SchemeKind>> {
    text.split(',')
        .map(|t| t.trim().parse::<SchemeKind>().map_err(|e| HarnessError::Usage(e.to_string())))
        .collect()
}

fn run_cell(spec: &SweepSpec, kind: SchemeKind, value: f64, seed: u64) -> ResultRow {
    let param = spec.param.name();
    let start = Instant::now();
    let result = spec
        .param
        .apply(&spec.base, value)
        .and_then(|cfg| build_scenario(&cfg, seed).map_err(core_error))
        .and_then(|scn| solve_scheme(kind, &scn, &AoOptions::from_config(&scn)).map_err(core_error));
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(sol) => ResultRow::from_solution(kind, seed, param, value, &sol, wall_ms),
        Err(e) => {
            eprintln!("{kind} {param}={value} seed {seed}: {e}");
            ResultRow::failed(kind, seed, param, value, wall_ms)
        }
    }
}

/// Mean over the converged cells of one (scheme, value) group. The status
/// column reports how many cells were left out.
pub fn mean_row(group: &[ResultRow]) -> Option<ResultRow> {
    let first = group.first()?;
    let ok: Vec<&ResultRow> = group.iter().filter(|r| r.status == Status::Converged.as_str()).collect();
    let n = ok.len() as f64;
    let mean = |f: fn(&ResultRow) -> f64| if ok.is_empty() { f64::NAN } else { ok.iter().map(|r| f(r)).sum::<f64>() / n };
    let iterations = if ok.is_empty() { 0 } else { (ok.iter().map(|r| r.iterations).sum::<usize>() as f64 / n).round() as usize };
    Some(ResultRow {
        scheme: first.scheme.clone(),
        seed: "mean".into(),
        param: first.param.clone(),
        value: first.value,
        t_u: mean(|r| r.t_u),
        t_p: mean(|r| r.t_p),
        t_d: mean(|r| r.t_d),
        t_total: mean(|r| r.t_total),
        iterations,
        status: format!("excluded={}", group.len() - ok.len()),
        wall_ms: mean(|r| r.wall_ms),
    })
}

#[derive(Debug)]
pub struct SweepOutput {
    pub csv_path: PathBuf,
    pub plot_path: PathBuf,
    pub rows: Vec<ResultRow>,
    pub means: Vec<ResultRow>,
}

/// Runs every (scheme, value, seed) cell and writes `sweep.csv` and
/// `sweep.gp` into `out`. Per-cell solver failures become `infeasible` rows.
pub fn run_sweep(spec: &SweepSpec, out: &Path, workers: usize) -> Result<SweepOutput> {
    spec.validate()?;
    fs::create_dir_all(out)?;
    let csv_path = out.join("sweep.csv");
    let file = fs::File::create(&csv_path)?;
    let cells = spec.cells();
    let total = cells.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let (tx, rx) = mpsc::channel::<(usize, ResultRow)>();
    let group_len = spec.seeds.len();

    let writer = std::thread::spawn(move || -> Result<(Vec<ResultRow>, Vec<ResultRow>)> {
        let mut w = csv_writer(file);
        let mut pending = BTreeMap::new();
        let mut next = 0;
        let mut rows = Vec::with_capacity(total);
        for (idx, row) in rx {
            pending.insert(idx, row);
            while let Some(row) = pending.remove(&next) {
                w.serialize(&row)?;
                w.flush()?;
                rows.push(row);
                next += 1;
            }
        }
        if next != total {
            return Err(HarnessError::Runtime(format!("sweep stopped after {next} of {total} cells")));
        }
        let means: Vec<ResultRow> = rows.chunks(group_len).filter_map(mean_row).collect();
        for m in &means {
            w.serialize(m)?;
        }
        w.flush()?;
        Ok((rows, means))
    });

    pool.install(|| {
        cells.par_iter().enumerate().for_each_with(tx, |tx, (idx, &(kind, value, seed))| {
            let row = run_cell(spec, kind, value, seed);
            // the writer only hangs up after an I/O error, reported below
            let _ = tx.send((idx, row));
        });
    });

    let (rows, means) = writer.join().map_err(|_| HarnessError::Runtime("writer thread panicked".into()))??;
    for m in &means {
        let excluded = m.status.trim_start_matches("excluded=");
        if excluded != "0" {
            eprintln!("{} {}={}: {excluded} non-converged cells excluded from the mean", m.scheme, m.param, m.value);
        }
    }

    let plot_path = out.join("sweep.gp");
    fs::write(&plot_path, plot_script(spec, "sweep.csv"))?;
    Ok(SweepOutput { csv_path, plot_path, rows, means })
}

/// Gnuplot script drawing mean `T_total` against the swept value, one curve
/// per scheme.
pub fn plot_script(spec: &SweepSpec, csv_name: &str) -> String {
    let names: Vec<&str> = spec.schemes.iter().map(|s| s.name()).collect();
    let mut s = String::new();
    let _ = writeln!(s, "# mean total time per scheme; run with: gnuplot -p sweep.gp");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel '{}'", spec.param.name());
    let _ = writeln!(s, "set ylabel 'mean total time (s)'");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "schemes = \"{}\"", names.join(" "));
    let _ = writeln!(
        s,
        "plot for [sc in schemes] '{csv_name}' using (strcol(1) eq sc && strcol(2) eq 'mean' ? $4 : 1/0):8 \\\n    with linespoints title sc"
    );
    s
}
