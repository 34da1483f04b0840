//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pamsim_core::analysis::DecayLaw;

use crate::commands::{self, Context, Outcome};
use crate::config::{Config, CONFIG_HELP};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "pamsim",
    version,
    about = "Lattice and continuum stochastic heat equation experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Built-in walk `srw1`..`srw9` or a model JSON file.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Print the configuration schema and exit.
    #[arg(long)]
    pub help_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file and describe it.
    Validate {
        /// Defaults to `--model`.
        model: Option<String>,
    },
    /// Replica campaign from a point mass, with decay fits.
    Simulate {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Paired campaign over a grid of noise levels.
    Sweep {
        /// `a:b:n` (geometric) or a comma-separated list.
        #[arg(long)]
        lambdas: Option<String>,
        /// Use the built-in walk in this dimension.
        #[arg(long = "d")]
        dim: Option<usize>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Transition probabilities and the Gaussian tail-bound check.
    Kernel {
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        radius: Option<usize>,
        #[arg(long)]
        hoeffding_times: Option<String>,
    },
    /// Collision local time of two walks and the subcritical bounds.
    Greens {
        #[arg(long)]
        mc_replicas: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Membership of a sampled function in the differential-inequality class.
    Odeclass {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// One-dimensional continuum equation on a grid.
    Continuum {
        #[arg(long)]
        dx: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Decay-law fit of a trajectory CSV or a `t,f` CSV.
    Fit {
        #[arg(long)]
        input: Option<PathBuf>,
        /// `d1` or `d2`.
        #[arg(long, value_parser = parse_law)]
        law: Option<DecayLaw>,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Verify a campaign directory against its manifest.
    Report {
        /// Defaults to `--out-dir`.
        dir: Option<PathBuf>,
    },
}

fn parse_law(s: &str) -> std::result::Result<DecayLaw, String> {
    match s.to_ascii_lowercase().as_str() {
        "d1" => Ok(DecayLaw::D1),
        "d2" => Ok(DecayLaw::D2),
        _ => Err(format!("unknown law {s:?}; expected d1 or d2")),
    }
}

fn context(g: &GlobalArgs) -> Result<Context> {
    let config = match &g.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let mut ctx = Context::new(config);
    if g.model.is_some() {
        ctx.model = g.model.clone();
    }
    if let Some(s) = g.seed {
        ctx.seed = s;
    }
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        ctx.threads = t;
    }
    ctx.out_dir = g.out_dir.clone();
    Ok(ctx)
}

/// Runs a parsed command line.
pub fn execute(cli: Cli) -> Result<Outcome> {
    let g = &cli.global;
    if g.help_config {
        return Ok(Outcome {
            manifest: None,
            summary: CONFIG_HELP.into(),
            exit_code: 0,
        });
    }
    let Some(command) = cli.command else {
        return Err(CliError::config("no command given; see --help"));
    };
    match command {
        Command::Validate { model } => {
            let spec = model
                .or_else(|| g.model.clone())
                .ok_or_else(|| CliError::config("validate needs a model"))?;
            commands::validate(&spec)
        }
        Command::Report { dir } => commands::report(&dir.unwrap_or_else(|| g.out_dir.clone())),
        Command::Simulate {
            lambda,
            horizon,
            replicas,
            dt,
        } => commands::simulate(
            &context(g)?,
            &commands::SimulateArgs {
                lambda,
                horizon,
                replicas,
                dt,
            },
        ),
        Command::Sweep {
            lambdas,
            dim,
            replicas,
            horizon,
        } => commands::sweep(
            &context(g)?,
            &commands::SweepArgs {
                lambdas,
                dim,
                replicas,
                horizon,
            },
        ),
        Command::Kernel {
            t,
            radius,
            hoeffding_times,
        } => commands::kernel(
            &context(g)?,
            &commands::KernelArgs {
                t,
                radius,
                hoeffding_times,
            },
        ),
        Command::Greens {
            mc_replicas,
            lambda,
        } => commands::greens(
            &context(g)?,
            &commands::GreensArgs {
                mc_replicas,
                lambda,
            },
        ),
        Command::Odeclass {
            input,
            delta,
            gamma,
            alpha,
        } => commands::odeclass(
            &context(g)?,
            &commands::OdeClassArgs {
                input,
                delta,
                gamma,
                alpha,
            },
        ),
        Command::Continuum {
            dx,
            horizon,
            replicas,
            noise,
        } => commands::continuum(
            &context(g)?,
            &commands::ContinuumArgs {
                dx,
                horizon,
                replicas,
                noise,
            },
        ),
        Command::Fit { input, law, eta } => {
            commands::fit(&context(g)?, &commands::FitArgs { input, law, eta })
        }
    }
}

/// Parses, runs and reports. Usage errors exit 2, invalid models and
/// failed checks 1, I/O and configuration errors 2.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(out) => {
            print!("{}", out.summary);
            ExitCode::from(out.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags_after_the_subcommand() {
        let cli = Cli::try_parse_from([
            "pamsim",
            "sweep",
            "--lambdas",
            "0.5:8:6",
            "--d",
            "3",
            "--seed",
            "7",
        ])
        .unwrap();
        assert_eq!(cli.global.seed, Some(7));
        match cli.command {
            Some(Command::Sweep { lambdas, dim, .. }) => {
                assert_eq!(lambdas.as_deref(), Some("0.5:8:6"));
                assert_eq!(dim, Some(3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn law_names() {
        assert_eq!(parse_law("D1"), Ok(DecayLaw::D1));
        assert!(parse_law("d3").is_err());
    }

    #[test]
    fn help_config_prints_schema() {
        let out = execute(Cli::try_parse_from(["pamsim", "--help-config"]).unwrap()).unwrap();
        assert!(out.summary.contains("[simulate]"));
    }
}
