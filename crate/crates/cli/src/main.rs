use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sspdsim::{default_out_dir, oracle_config, presets, CliError, Config, RunReport};

#[derive(Parser)]
#[command(name = "sspdsim", version, about = "Superconducting single-photon detector simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Override a config value; repeatable, later wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (default: $SSPDSIM_OUT or ./sspdsim-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(s) = self.seed {
            o.push(format!("seed={s}"));
        }
        o
    }

    fn out_or(&self, sub: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| default_out_dir().join(sub))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// List or run the bundled figure presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Compare every analytic model with the Monte Carlo simulator.
    CheckOracles {
        /// Reduced statistics, same tolerances.
        #[arg(long)]
        fast: bool,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Run {
        name: String,
        #[command(flatten)]
        args: RunArgs,
    },
}

fn report(r: &RunReport) {
    for f in &r.files {
        println!("{}", f.display());
    }
    if r.checks_total > 0 {
        println!("{} of {} checks passed", r.checks_total - r.checks_failed, r.checks_total);
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, args } => {
            let cfg = Config::from_file(&config, &args.overrides())?;
            let out = args.out.clone().unwrap_or_else(default_out_dir);
            report(&sspdsim::run(&cfg, &out)?);
        }
        Command::Presets {
            action: PresetAction::List,
        } => {
            for name in presets::names() {
                println!("{name}\t{}", presets::summary(name).unwrap_or(""));
            }
        }
        Command::Presets {
            action: PresetAction::Run { name, args },
        } => {
            let cfg = presets::load(&name, &args.overrides())?;
            report(&sspdsim::run(&cfg, &args.out_or(&name))?);
        }
        Command::CheckOracles { fast, args } => {
            let cfg = oracle_config(fast, &args.overrides())?;
            report(&sspdsim::run(&cfg, &args.out_or("oracles"))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
