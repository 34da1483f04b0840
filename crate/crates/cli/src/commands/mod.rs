//! One function per subcommand. Each writes its artifacts and a manifest
//! into the output directory and returns a short text summary.

use std::path::PathBuf;

use pamsim_core::analysis::AnalysisError;
use pamsim_core::sde::SimError;

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use crate::modelfile::{load_model, LoadedModel};

mod continuum;
mod fit;
mod greens;
mod kernel;
mod odeclass;
mod report;
mod simulate;
mod sweep;
mod validate;

pub use continuum::{continuum, ContinuumArgs};
pub use fit::{fit, FitArgs};
pub use greens::{greens, GreensArgs};
pub use kernel::{kernel, KernelArgs};
pub use odeclass::{odeclass, OdeClassArgs};
pub use report::report;
pub use simulate::{simulate, SimulateArgs};
pub use sweep::{sweep, SweepArgs};
pub use validate::validate;

/// Settings shared by all commands after merging flags into the config.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: Config,
    pub model: Option<String>,
    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config: Config) -> Self {
        Self {
            model: config.model.clone(),
            seed: config.seed.unwrap_or(0),
            threads: config
                .threads
                .unwrap_or_else(crate::runner::default_threads),
            out_dir: PathBuf::from("out"),
            config,
        }
    }

    /// The `--model` flag, then the config's `model`, then `srw1`.
    pub fn load_model(&self) -> Result<LoadedModel> {
        load_model(self.model.as_deref().unwrap_or("srw1"))
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: Option<RunManifest>,
    pub summary: String,
    /// Nonzero when the command ran but its check failed.
    pub exit_code: u8,
}

impl Outcome {
    fn ok(manifest: RunManifest, summary: String) -> Self {
        Self {
            manifest: Some(manifest),
            summary,
            exit_code: 0,
        }
    }
}

pub(crate) fn sim_err(e: SimError) -> CliError {
    match e {
        SimError::Model(m) => CliError::Model(m),
        other => CliError::run(other),
    }
}

pub(crate) fn analysis_err(e: AnalysisError) -> CliError {
    CliError::run(e)
}

/// `x ± se` with four significant digits.
pub(crate) fn pm(x: f64, se: f64) -> String {
    format!("{x:.4e} ± {se:.2e}")
}
