use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fedbandit::config::{apply_preset, RunConfig};
use fedbandit::sim::run_simulation;
use fedbandit::sweep::{run_sweep, Grid};

/// Log verbosity, in `env_logger` filter syntax.
const LOG_ENV: &str = "FEDBANDIT_LOG";

#[derive(Parser)]
#[command(name = "fedbandit", version, about = "Federated linear contextual bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its per-step trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Trace CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the transfer ledger here.
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Override a config key, e.g. `--set proto.gamma=2`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a grid of configurations over several seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `key=v1,v2,…`, `key=logspace:a:b:n` or `preset=name1,name2`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        seeds: u64,
        /// Sweep CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the config with a named threshold preset applied.
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    for o in overrides {
        cfg.set_str(o)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            ledger,
            overrides,
        } => {
            let mut cfg = load(&config, &overrides)?;
            if ledger.is_some() {
                cfg.trace_ledger = true;
            }
            let trace = run_simulation(&cfg)?;
            log::info!(
                "{}: R_T = {}, C_T = {}, {:.1} ms",
                cfg.algorithm,
                trace.final_score(),
                trace.final_comm(),
                trace.wall_ms
            );
            match &out {
                Some(p) => trace.save_csv(p)?,
                None => trace
                    .write_csv(io::stdout().lock())
                    .context("writing trace to stdout")?,
            }
            if let Some(p) = ledger {
                let l = trace
                    .ledger
                    .as_ref()
                    .context("this algorithm keeps no transfer ledger")?;
                l.save_csv(&p)?;
            }
        }
        Command::Sweep {
            config,
            grid,
            seeds,
            out,
            overrides,
        } => {
            let cfg = load(&config, &overrides)?;
            let grid: Grid = grid.parse()?;
            let table = run_sweep(&cfg, &grid, seeds)?;
            match &out {
                Some(p) => table.save_csv(p)?,
                None => table
                    .write_csv(io::stdout().lock())
                    .context("writing sweep to stdout")?,
            }
            let mut err = io::stderr().lock();
            for s in table.summary() {
                writeln!(
                    err,
                    "{}={}: R_T {:.3} ± {:.3}, C_T {:.1} ± {:.1} ({} runs)",
                    grid.key, s.param_value, s.mean_r, s.std_r, s.mean_c, s.std_c, s.runs
                )?;
            }
            if !table.failures.is_empty() {
                for f in &table.failures {
                    writeln!(err, "failed: {}={} seed {}: {}", grid.key, f.param_value, f.seed, f.message)?;
                }
                bail!("{} of {} sweep cells failed", table.failures.len(), table.failures.len() + table.rows.len());
            }
        }
        Command::Preset {
            name,
            config,
            overrides,
        } => {
            let mut cfg = load(&config, &overrides)?;
            apply_preset(&mut cfg, &name)?;
            cfg.validate()?;
            print!("{}", cfg.to_toml_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
