use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rsfog::{SchemeKind, SystemConfig};
use rsfog_harness::selftest::{run_selftest, tightness_gaps, AuxMode};
use rsfog_harness::sweep::{mean_row, run_sweep, SweepParam, SweepSpec};
use rsfog_harness::{read_rows, ResultRow, CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rsfog"))
}

fn small_config() -> SystemConfig {
    SystemConfig { users: 2, ..SystemConfig::default() }
}

fn write_config(dir: &Path, cfg: &SystemConfig) -> PathBuf {
    let path = dir.join("system.conf");
    std::fs::write(&path, cfg.to_kv_string()).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn strip_wall(rows: &[ResultRow]) -> Vec<ResultRow> {
    rows.iter().cloned().map(|r| ResultRow { wall_ms: 0.0, ..r }).collect()
}

#[test]
fn solve_writes_row_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), &small_config());
    let mut rows = Vec::new();
    for i in 0..2 {
        let out_dir = dir.path().join(format!("run{i}"));
        let out = run(bin().args(["solve", "--scheme", "RS_FOG", "--seed", "5", "--config"]).arg(&cfg_path).arg("--out").arg(&out_dir));
        assert!(out.status.success());
        rows.push(read_rows(&out_dir.join("solve.csv")).unwrap());
        let dump: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("solution.json")).unwrap()).unwrap();
        let trace = dump["solution"]["trace"].as_array().unwrap();
        assert!(trace.len() >= 2);
        assert_eq!(dump["scheme"], "RS_FOG");
    }
    let r = &rows[0][0];
    assert_eq!(r.status, "converged");
    assert!(r.iterations <= 30);
    assert!((r.t_total - (r.t_u + r.t_p + r.t_d)).abs() <= 1e-9);
    assert_eq!(strip_wall(&rows[0]), strip_wall(&rows[1]));

    let header = std::fs::read_to_string(dir.path().join("run0/solve.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), CSV_HEADER.join(","));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), &small_config());
    let out_dir = dir.path().join("out");

    let out = run(bin().args(["solve", "--scheme", "TDMA", "--config"]).arg(&cfg_path).arg("--out").arg(&out_dir));
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "K=4\nwarp_factor=9\n").unwrap();
    let out = run(bin().args(["solve", "--scheme", "SDMA", "--config"]).arg(&bad).arg("--out").arg(&out_dir));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warp_factor"));

    let out = run(bin().args(["solve", "--scheme", "SDMA", "--config", "/nonexistent.conf"]).arg("--out").arg(&out_dir));
    assert_eq!(out.status.code(), Some(2));

    let sweep = |param: &str, values: &str| {
        run(bin()
            .args(["sweep", "--param", param, "--values", values, "--seeds", "1", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out_dir))
    };
    assert_eq!(sweep("K", "4,2").status.code(), Some(2));
    assert_eq!(sweep("K", "2,2").status.code(), Some(2));
    assert_eq!(sweep("bandwidth_hz", "1,2").status.code(), Some(2));
    assert_eq!(sweep("K", "1,x").status.code(), Some(2));
    // L_max below L_min fails config validation
    assert_eq!(sweep("L_max_bit", "1e5,2e6").status.code(), Some(2));
    assert!(!out_dir.join("sweep.csv").exists());
}

#[test]
fn sweep_cardinality_and_means() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SweepSpec {
        schemes: vec![SchemeKind::RS_FOG, SchemeKind::SDMA],
        param: SweepParam::LMax,
        values: vec![2e6, 3e6, 4e6],
        seeds: (0..5).collect(),
        base: small_config(),
    };
    let res = run_sweep(&spec, dir.path(), 2).unwrap();
    assert_eq!(res.rows.len(), 30);
    assert_eq!(res.means.len(), 6);

    let rows = read_rows(&res.csv_path).unwrap();
    assert_eq!(rows.len(), 36);
    assert_eq!(rows.iter().filter(|r| r.is_mean()).count(), 6);
    let text = std::fs::read_to_string(&res.csv_path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert!(!text.contains('\r'));

    for (i, chunk) in res.rows.chunks(5).enumerate() {
        let m = &res.means[i];
        assert!(chunk.iter().all(|r| r.scheme == m.scheme && r.value == m.value));
        let converged: Vec<&ResultRow> = chunk.iter().filter(|r| r.status == "converged").collect();
        let want = converged.iter().map(|r| r.t_total).sum::<f64>() / converged.len() as f64;
        assert!((m.t_total - want).abs() <= 1e-12 * want);
        assert_eq!(m.status, format!("excluded={}", 5 - converged.len()));
    }
    for r in &res.rows {
        assert!((r.t_total - (r.t_u + r.t_p + r.t_d)).abs() <= 1e-9);
    }

    // a different worker count gives the same file apart from timings
    let dir2 = tempfile::tempdir().unwrap();
    let again = run_sweep(&spec, dir2.path(), 1).unwrap();
    assert_eq!(strip_wall(&res.rows), strip_wall(&again.rows));

    let plot = std::fs::read_to_string(&res.plot_path).unwrap();
    assert!(plot.contains("sweep.csv") && plot.contains("RS_FOG SDMA"));
}

#[test]
fn cloud_means_flat_over_user_cpu() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SweepSpec {
        schemes: vec![SchemeKind::RS_CLOUD],
        param: SweepParam::UserCpu,
        values: vec![1e6, 3e6, 5e6],
        seeds: (0..3).collect(),
        base: small_config(),
    };
    let res = run_sweep(&spec, dir.path(), 1).unwrap();
    let bits: Vec<u64> = res.means.iter().map(|m| m.t_total.to_bits()).collect();
    assert!(bits.windows(2).all(|w| w[0] == w[1]), "{:?}", res.means);
}

#[test]
fn power_pair_couples_user_and_bs_power() {
    let base = SystemConfig::default();
    for v in [5.0, 10.0, 15.0] {
        let cfg = SweepParam::PowerPair.apply(&base, v).unwrap();
        assert_eq!(cfg.p_user_dbm, v);
        assert_eq!(cfg.p_bs_dbm, v + 15.0);
    }
    // the abscissa 5 means 5 dBm at the users and 20 dBm at the BS
    assert_eq!(SweepParam::PowerPair.apply(&base, 5.0).unwrap().p_bs_dbm, 20.0);
    assert!(SweepParam::Users.apply(&base, 2.5).is_err());
}

#[test]
fn mean_rows_skip_unconverged_cells() {
    let row = |seed: u64, t: f64, status: &str| ResultRow {
        scheme: "SDMA".into(),
        seed: seed.to_string(),
        param: "K".into(),
        value: 4.0,
        t_u: t,
        t_p: 0.0,
        t_d: 0.0,
        t_total: t,
        iterations: 3,
        status: status.into(),
        wall_ms: 1.0,
    };
    let group = vec![row(0, 1.0, "converged"), row(1, 100.0, "max-iter"), row(2, f64::NAN, "infeasible"), row(3, 3.0, "converged")];
    let m = mean_row(&group).unwrap();
    assert_eq!(m.t_total, 2.0);
    assert_eq!(m.status, "excluded=2");
    assert!(m.is_mean());

    let none = vec![row(0, 5.0, "max-iter")];
    let m = mean_row(&none).unwrap();
    assert!(m.t_total.is_nan());
    assert_eq!(m.status, "excluded=1");
}

#[test]
fn selftest_passes_and_is_repeatable() {
    let a = run_selftest();
    assert!(a.passed(), "{a}");
    let b = run_selftest();
    assert_eq!(a.to_string(), b.to_string());
    assert!(a.checks.iter().any(|c| c.name == "mutation canary" && c.pass));
}

#[test]
fn injected_sign_error_breaks_tightness() {
    let good = tightness_gaps(AuxMode::ClosedForm).unwrap();
    assert!(good.iter().all(|&g| g < 1e-9));
    let bad = tightness_gaps(AuxMode::Negated).unwrap();
    assert!(bad[2].max(bad[3]) > 1e-3);
}

#[test]
fn selftest_command_exits_zero() {
    let out = run(bin().arg("selftest"));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0 of 7 checks failed"), "{text}");
}
