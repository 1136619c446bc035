//! Command-line runner for the rough-surface fluid-structure-contact
//! scenarios.

use clap::{Parser, Subcommand};
use roughfsi::scenarios::{self, darcy_leak_oracle, ScenarioConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "roughfsi",
    about = "2D plane-strain fluid-structure-contact interaction with a poroelastic rough-surface layer",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a configuration file.
    Run {
        /// Path to the TOML configuration.
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Thread count for the sparse direct solver (assembly is always
        /// single-threaded and deterministic).
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Force fully sequential execution.
        #[arg(long)]
        deterministic: bool,
    },
    /// Validate a configuration file without running it.
    Validate { config: PathBuf },
    /// Print built-in oracle values.
    Oracle {
        #[command(subcommand)]
        oracle: OracleCommand,
    },
    /// Print a built-in scenario configuration ("leakage" or "stamp").
    PrintConfig { scenario: String },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// 1D Darcy leak-rate oracle: q = (K/mu)(dp/l) delta per unit depth.
    Darcy {
        #[arg(long)]
        permeability: f64,
        #[arg(long)]
        viscosity: f64,
        #[arg(long)]
        dp: f64,
        #[arg(long)]
        length: f64,
        #[arg(long)]
        height: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> roughfsi::Result<()> {
    match cli.command {
        Command::Run {
            config,
            output_dir,
            threads,
            deterministic,
        } => {
            let par = if deterministic || threads <= 1 {
                faer::Par::Seq
            } else {
                faer::Par::rayon(threads)
            };
            faer::set_global_parallelism(par);
            let mut cfg = ScenarioConfig::from_file(&config)?;
            if let Some(dir) = output_dir {
                cfg.output.dir = dir.display().to_string();
            }
            let scn = scenarios::setup(&cfg)?;
            println!(
                "running '{}': {} dofs, t_end = {}",
                cfg.scenario,
                scn.sys.n_dofs(),
                scn.scheme.t_end
            );
            let result = scenarios::run_scenario(&scn)?;
            println!(
                "done: {} steps accepted, outputs in {}",
                result.steps, cfg.output.dir
            );
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let scn = scenarios::setup(&cfg)?;
            println!(
                "ok: scenario '{}' valid, {} dofs, {} load schedules",
                cfg.scenario,
                scn.sys.n_dofs(),
                scn.sys.loads.len()
            );
            Ok(())
        }
        Command::Oracle { oracle } => {
            match oracle {
                OracleCommand::Darcy {
                    permeability,
                    viscosity,
                    dp,
                    length,
                    height,
                } => {
                    let q = darcy_leak_oracle(permeability, viscosity, dp, length, height);
                    println!("{q:.17e}");
                }
            }
            Ok(())
        }
        Command::PrintConfig { scenario } => {
            let cfg = match scenario.as_str() {
                "leakage" => scenarios::default_leakage_config(),
                "stamp" => scenarios::default_stamp_config(),
                other => {
                    return Err(roughfsi::Error::Config(format!(
                        "unknown scenario '{other}' (expected 'leakage' or 'stamp')"
                    )))
                }
            };
            println!("{}", cfg.to_toml());
            Ok(())
        }
    }
}
