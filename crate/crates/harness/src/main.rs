use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rsfog::SchemeKind;
use rsfog_harness::sweep::{parse_schemes, parse_values, run_sweep, SweepParam, SweepSpec};
use rsfog_harness::{load_config, run_solve, selftest, HarnessError};

#[derive(Parser)]
#[command(name = "rsfog", version, about = "Rate-splitting fog computing: delay minimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and dump the solution.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// RS_FOG, SDMA, NOMA or RS_CLOUD.
        #[arg(long)]
        scheme: SchemeKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seed-averaged sweep of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// K, L_max_bit, F_k_cyc_s or power_pair_dBm.
        #[arg(long)]
        param: String,
        /// Strictly increasing, comma separated.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "RS_FOG,SDMA,NOMA,RS_CLOUD")]
        schemes: String,
        /// Number of seeds, run as 0..N.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the number of logical CPUs.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the invariant suite.
    Selftest,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Solve { config, scheme, seed, out } => {
            let cfg = load_config(&config)?;
            let res = run_solve(&cfg, scheme, seed, &out)?;
            let r = &res.row;
            println!(
                "{} seed {}: T_total {:.6} s (T_u {:.6}, T_p {:.6}, T_d {:.6}), {} iterations, {}",
                r.scheme, r.seed, r.t_total, r.t_u, r.t_p, r.t_d, r.iterations, r.status
            );
            println!("wrote {} and {}", res.csv_path.display(), res.json_path.display());
        }
        Command::Sweep { config, param, values, schemes, seeds, out, workers } => {
            let spec = SweepSpec {
                schemes: parse_schemes(&schemes)?,
                param: param.parse::<SweepParam>()?,
                values: parse_values(&values)?,
                seeds: (0..seeds).collect(),
                base: load_config(&config)?,
            };
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let res = run_sweep(&spec, &out, workers)?;
            for m in &res.means {
                println!("{} {}={}: mean T_total {:.6} s ({})", m.scheme, m.param, m.value, m.t_total, m.status);
            }
            println!("wrote {} and {}", res.csv_path.display(), res.plot_path.display());
        }
        Command::Selftest => {
            let report = selftest::run_selftest();
            println!("{report}");
            if !report.passed() {
                return Err(HarnessError::Runtime("selftest failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on its own usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rsfog: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
