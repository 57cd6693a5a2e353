use std::path::PathBuf;
use std::process::ExitCode;

use ahflow::config::{Overrides, RunConfig};
use ahflow::plot::plot_bundle;
use ahflow::run::execute;
use ahflow::sweep::execute_sweep;
use ahflow::verify::execute_verify;
use clap::{Args, Parser, Subcommand};

/// Normalized Ricci flow of rotationally symmetric asymptotically hyperbolic metrics.
#[derive(Debug, Parser)]
#[command(name = "ahflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve one initial datum and write its bundle.
    Run(Common),
    /// Run the verification matrix; exit 0 iff every check passes.
    Verify(Common),
    /// Run every sweep point concurrently and write summary.csv.
    Sweep(Common),
    /// Redraw the SVG plots of an existing bundle.
    Plot {
        /// Bundle directory (alternative to --out).
        bundle: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Spatial dimension n.
    #[arg(long = "n")]
    dimension: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
}

const OK: u8 = 0;
const USAGE: u8 = 1;
const TERMINATED: u8 = 2;

impl Common {
    fn load(&self) -> Result<RunConfig, ExitCode> {
        let overrides = Overrides {
            dimension: self.dimension,
            grid: self.grid,
            t_end: self.t_end,
            output: self.out.clone(),
        };
        RunConfig::load(&self.config, &overrides).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(USAGE)
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) | Err(code) => code,
    }
}

fn dispatch(command: Command) -> Result<ExitCode, ExitCode> {
    let fail = |e: &dyn std::fmt::Display| {
        eprintln!("error: {e}");
        ExitCode::from(USAGE)
    };
    match command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let outcome = execute(&cfg).map_err(|e| fail(&e))?;
            print!("{}", outcome.summary());
            println!("# output {}", outcome.bundle.dir.display());
            Ok(ExitCode::from(if outcome.verdict().is_success() {
                OK
            } else {
                TERMINATED
            }))
        }
        Command::Verify(c) => {
            let cfg = c.load()?;
            let outcome = execute_verify(&cfg).map_err(|e| fail(&e))?;
            print!("{}", outcome.report.to_text());
            Ok(ExitCode::from(if outcome.report.all_pass() {
                OK
            } else {
                TERMINATED
            }))
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let outcome = execute_sweep(&cfg).map_err(|e| fail(&e))?;
            for r in &outcome.rows {
                println!(
                    "{} = {}: {} {}",
                    cfg.sweep.parameter.name(),
                    r.value,
                    r.verdict,
                    r.message
                );
            }
            println!("# summary {}", outcome.summary.display());
            let all = outcome.rows.iter().all(|r| r.is_success());
            Ok(ExitCode::from(if all { OK } else { TERMINATED }))
        }
        Command::Plot { bundle, out } => {
            let Some(dir) = bundle.or(out) else {
                return Err(fail(&"plot needs a bundle directory"));
            };
            for p in plot_bundle(&dir).map_err(|e| fail(&e))? {
                println!("{}", p.display());
            }
            Ok(ExitCode::from(OK))
        }
    }
}
