use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use inet_cli::run::{self, Overrides, System};
use inet_cli::{CliError, RunConfig};
use inet_core::basis::BasisLibrary;
use inet_core::interpret::Mode;

#[derive(Parser)]
#[command(name = "inet", version, about = "Hypothesis search over interaction networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Differential,
    Integral,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Integral-mode window (odd).
    #[arg(long)]
    window: Option<usize>,
    /// Integral-mode polynomial degree.
    #[arg(long)]
    degree: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            mode: self.mode.map(|m| match m {
                ModeArg::Differential => Mode::Differential,
                ModeArg::Integral => Mode::Integral,
            }),
            window: self.window,
            degree: self.degree,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Pendulum,
    Wave,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate hypotheses without fitting.
    Enumerate {
        #[command(flatten)]
        common: Common,
    },
    /// Search, fit and rank hypotheses.
    Search {
        #[command(flatten)]
        common: Common,
        /// Dump the lowered evaluation plan of every fitted hypothesis.
        #[arg(long)]
        explain: bool,
    },
    /// Fit one I-net file against the configured data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// I-net JSON document.
        #[arg(long)]
        inet: PathBuf,
        #[arg(long)]
        explain: bool,
    },
    /// Write the DOT graph and symbolic equations of an I-net file.
    Emit {
        #[arg(long)]
        inet: PathBuf,
        /// Optional config supplying the basis library.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate a benchmark dataset with its sidecar and config.
    Simulate {
        #[arg(value_enum)]
        system: SystemArg,
        /// JSON fixture spec; defaults are used when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Relative Gaussian noise level.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Enumerate { common } => {
            let r = run::run_enumerate(&common.config, &common.overrides())?;
            println!("{} states, {} complete", r.states, r.ranked.len());
        }
        Command::Search { common, explain } => {
            let r = run::run_search(&common.config, &common.overrides(), explain)?;
            println!("{} states, {} complete", r.states, r.ranked.len());
            for e in r.ranked.iter().take(5) {
                println!("{:>3} {} penalty={} loss={:?} score={:.6e}", e.rank, e.id, e.penalty, e.test_loss, e.score);
                for c in &e.constraints {
                    for eq in &c.equations {
                        println!("      {eq}");
                    }
                }
            }
        }
        Command::Fit { common, inet, explain } => {
            let r = run::run_fit(&common.config, &inet, &common.overrides(), explain)?;
            println!("loss={:.6e}", r.loss);
            for c in &r.constraints {
                for eq in &c.equations {
                    println!("  {eq}");
                }
            }
        }
        Command::Emit { inet, config, out } => {
            let basis = match config {
                Some(p) => RunConfig::load(&p)?.basis,
                None => BasisLibrary::standard(),
            };
            for line in run::run_emit(&inet, &basis, &out)? {
                println!("{line}");
            }
        }
        Command::Simulate { system, spec, noise, seed, out } => {
            let system = match system {
                SystemArg::Pendulum => System::Pendulum,
                SystemArg::Wave => System::Wave,
            };
            let cfg = run::run_simulate(system, spec.as_deref(), noise, seed, &out)?;
            println!("wrote {}", cfg.display());
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
