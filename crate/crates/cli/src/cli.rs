//! Command-line front end. Exit codes: 0 success, 1 I/O or internal error,
//! 2 configuration error, 3 numerical abort or failed invariant, 4 oracle
//! validation failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{split_overrides, RunConfig, OUTPUT_DIR_ENV};
use crate::error::{CliError, Result};
use crate::manifest::Manifest;

#[derive(Debug, Parser)]
#[command(
    name = "qsoliton",
    version,
    about = "Quantum soliton propagation with photon-number statistics of filtered light",
    after_help = "Any configuration value can be set with --section.key VALUE, for example\n  \
                  --grid.M 256 --soliton.order 1 --run.snapshot_times_td '[0, 0.4, 0.8]'\n\
                  Precedence: defaults < --config file < $QSOLITON_OUTPUT_DIR < --section.key flags."
)]
struct Args {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate, analyze every snapshot in both domains, and run the sweep if enabled.
    Simulate,
    /// Recompute the snapshot statistics from saved snapshots.
    Analyze {
        /// Run directory or folder of .qsnap files.
        #[arg(long)]
        input: PathBuf,
    },
    /// Optimized-filter search on saved snapshots.
    Optimize {
        #[arg(long)]
        input: PathBuf,
    },
    /// Compare the moment propagator with the Fock-space oracle.
    OracleValidate,
    /// Mean-field-only evolution against a split-step reference.
    Classical,
    /// Print the resolved configuration.
    PrintConfig,
}

fn summarize(m: &Manifest) -> String {
    format!(
        "{}: status {}, {} files in {}, {:.1} s",
        m.command,
        m.status,
        m.files.len(),
        m.config.output.directory.display(),
        m.wall_time_s
    )
}

/// Invariants that fail without aborting still make the run untrustworthy.
fn check_invariants(m: &Manifest) -> Result<()> {
    if m.invariants_passed {
        return Ok(());
    }
    let first = m.failed_checks().next();
    let detail = first.map_or_else(
        || "photon-number decay off the exponential law".to_string(),
        |c| format!("{} at t = {} (value {:e})", c.name, c.t, c.value),
    );
    Err(CliError::Abort { t: first.map_or(f64::NAN, |c| c.t), reason: format!("invariant check failed: {detail}") })
}

fn dispatch(args: Args, overrides: &[(String, String)]) -> Result<()> {
    let env_output = std::env::var(OUTPUT_DIR_ENV).ok();
    let cfg = RunConfig::load(args.config.as_deref(), env_output, overrides)?;
    match args.command {
        Command::Simulate => {
            let m = crate::simulate::run_simulate(&cfg)?;
            println!("{}", summarize(&m));
            check_invariants(&m)
        }
        Command::Analyze { input } => {
            let m = crate::simulate::run_reanalysis(&cfg, &input, false)?;
            println!("{}", summarize(&m));
            check_invariants(&m)
        }
        Command::Optimize { input } => {
            let m = crate::simulate::run_reanalysis(&cfg, &input, true)?;
            println!("{}", summarize(&m));
            check_invariants(&m)
        }
        Command::OracleValidate => {
            let (m, report) = crate::oracle::run_oracle_validate(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}; worst discrepancy inside |chi_L| t <= {}: {}",
                summarize(&m),
                report.window,
                report.worst_in_window.map_or("none sampled".to_string(), |w| format!("{w:.3e}"))
            );
            Ok(())
        }
        Command::Classical => {
            let (m, rows) = crate::classical::run_classical(&cfg)?;
            for r in rows {
                println!(
                    "t = {:.4} t_d: vs initial {:.3e}, vs split-step {:.3e}",
                    r.t_over_td, r.vs_initial, r.vs_split_step
                );
            }
            println!("{}", summarize(&m));
            Ok(())
        }
        Command::PrintConfig => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let (rest, overrides) = match split_overrides(argv) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let args = match Args::try_parse_from(rest) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(args, &overrides) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
