//! TOML run configuration: top-level `model`/`seed`/`threads` and one
//! section per command.

use std::path::{Path, PathBuf};

use pamsim_core::analysis::DecayLaw;
use pamsim_core::sde::{BoxPolicy, Scheme, DEFAULT_DT, DEFAULT_SAMPLES_PER_DECADE};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub greens: GreensSection,
    #[serde(default)]
    pub odeclass: OdeClassSection,
    #[serde(default)]
    pub continuum: ContinuumSection,
    #[serde(default)]
    pub fit: FitSection,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_spd() -> usize {
    DEFAULT_SAMPLES_PER_DECADE
}
fn default_replicas() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub lambda: f64,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default, rename = "box")]
    pub box_policy: BoxPolicy,
    #[serde(default = "default_spd")]
    pub samples_per_decade: usize,
    pub extinction_floor: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Moment exponent of the decay fit.
    #[serde(default = "half")]
    pub eta: f64,
    /// Decay law to fit; by default `d1` in one dimension, `d2` in two, none above.
    pub law: Option<DecayLaw>,
    /// `c` grid of the local-decay check on the snapshots.
    #[serde(default)]
    pub local_decay_c: Vec<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            c0: 1.0,
            dt: DEFAULT_DT,
            horizon: 10.0,
            replicas: default_replicas(),
            scheme: Scheme::default(),
            box_policy: BoxPolicy::default(),
            samples_per_decade: DEFAULT_SAMPLES_PER_DECADE,
            extinction_floor: None,
            snapshot_times: Vec::new(),
            eta: 0.5,
            law: None,
            local_decay_c: Vec::new(),
        }
    }
}

/// A `λ` grid given as a list or as `"a:b:n"` (`n` geometric points from `a` to `b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Spec(String),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::List(v) => Ok(v.clone()),
            Grid::Spec(s) => parse_grid(s),
        }
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid::List(vec![0.5, 1.0, 2.0, 4.0, 8.0])
    }
}

/// Rounds to 12 significant digits.
fn round_sig(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// `"a:b:n"` → `n` geometrically spaced points from `a` to `b`; a plain
/// comma-separated list is also accepted.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || {
        CliError::config(format!(
            "bad grid {s:?}: expected a:b:n or a comma-separated list"
        ))
    };
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].parse().map_err(|_| bad())?;
        let b: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        if !(a > 0.0 && b > a && n >= 2) {
            return Err(bad());
        }
        let r = (b / a).ln();
        return Ok((0..n)
            .map(|i| match i {
                0 => a,
                _ if i == n - 1 => b,
                _ => round_sig(a * (r * i as f64 / (n - 1) as f64).exp()),
            })
            .collect());
    }
    if parts.len() != 1 {
        return Err(bad());
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub lambdas: Grid,
    /// Survival threshold on `m_T`; defaults to `c0/2`.
    pub threshold: Option<f64>,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default, rename = "box")]
    pub box_policy: BoxPolicy,
    pub extinction_floor: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            lambdas: Grid::default(),
            threshold: None,
            c0: 1.0,
            dt: DEFAULT_DT,
            horizon: 10.0,
            replicas: default_replicas(),
            scheme: Scheme::default(),
            box_policy: BoxPolicy::default(),
            extinction_floor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// Time of the exported kernel.
    pub t: f64,
    /// Box radius of the export; by default large enough for a `1e-14` tail.
    pub radius: Option<usize>,
    /// Tail-bound check over `K ∈ [0, q·t]`, `t` in `hoeffding_times`.
    #[serde(default = "one")]
    pub q: f64,
    #[serde(default)]
    pub hoeffding_times: Vec<f64>,
    /// Points per `K` range; integers `0..=qt` when absent.
    pub k_points: Option<usize>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            t: 1.0,
            radius: None,
            q: 1.0,
            hoeffding_times: Vec::new(),
            k_points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreensSection {
    pub mc_replicas: usize,
    pub mc_horizon: f64,
    /// Noise level for the subcritical second-moment bound.
    pub lambda: Option<f64>,
    #[serde(default = "one")]
    pub c0: f64,
}

impl Default for GreensSection {
    fn default() -> Self {
        Self {
            mc_replicas: pamsim_core::greens::MC_REPLICAS,
            mc_horizon: pamsim_core::greens::MC_HORIZON,
            lambda: None,
            c0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeClassSection {
    /// CSV with columns `t,f` or a moment-series JSON.
    pub input: Option<PathBuf>,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    /// Checked as given; fitted when absent.
    pub alpha: Option<f64>,
    /// Target of the `α` fit, clipped to the feasible range.
    #[serde(default = "one")]
    pub preferred_alpha: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    /// Multiplier applied to the input values and derivatives.
    #[serde(default = "one")]
    pub scale: f64,
}

impl Default for OdeClassSection {
    fn default() -> Self {
        Self {
            input: None,
            delta: 1.0,
            gamma: 1.0,
            alpha: None,
            preferred_alpha: 1.0,
            a: 1.0,
            b: 1.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumSection {
    pub dx: f64,
    /// Defaults to `dx²/2`.
    pub dt: Option<f64>,
    pub horizon: f64,
    /// Defaults to `5√T + 10`, rounded up to a multiple of `dx`.
    pub half_width: Option<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "one")]
    pub noise: f64,
    #[serde(default = "default_spd")]
    pub samples_per_decade: usize,
    #[serde(default = "half")]
    pub eta: f64,
}

impl Default for ContinuumSection {
    fn default() -> Self {
        Self {
            dx: 0.1,
            dt: None,
            horizon: 10.0,
            half_width: None,
            replicas: default_replicas(),
            noise: 1.0,
            samples_per_decade: DEFAULT_SAMPLES_PER_DECADE,
            eta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Trajectory CSV or a two-column `t,f` CSV.
    pub input: Option<PathBuf>,
    pub law: DecayLaw,
    #[serde(default = "half")]
    pub eta: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            input: None,
            law: DecayLaw::D1,
            eta: 0.5,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.message()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

/// Printed by `--help-config`.
pub const CONFIG_HELP: &str = r#"# pamsim configuration (TOML). Every section is optional; a command reads
# only its own. Command-line flags override the matching keys.

model = "srw1"            # built-in srw<d>, or a path to a model-v1 JSON file
seed = 42                 # campaign seed (default 0)
# threads = 4             # worker cap (default: all cores); never changes results

[simulate]
lambda = 2.0              # noise level λ
c0 = 1.0                  # initial mass at the origin
dt = 1e-3                 # time step (rounded down to tile [0, T])
horizon = 100.0           # T
replicas = 400
scheme = "eulerMaruyama"  # or "exactLinear" (linear σ only)
box = { kind = "auto" }   # {kind="fixed", radius=R} | {kind="formula"} | {kind="tailBound", eps=1e-12}
samples_per_decade = 60   # log-spaced sample times
# extinction_floor = 1e-12  # freeze replicas whose mass drops below this
snapshot_times = []       # times at which full fields are kept
eta = 0.5                 # exponent of the fractional moment E[m_t^η]
# law = "d1"              # decay law fitted: "d1" = exp(-v t^(1/3)), "d2" = exp(-v sqrt(log t))
local_decay_c = []        # c grid for the local-decay check (needs snapshot_times)

[sweep]
lambdas = "0.5:8:5"       # a:b:n geometric grid, or a list [0.5, 1, 2]
# threshold = 0.5         # survival means m_T > threshold (default c0/2)
c0 = 1.0
dt = 1e-3
horizon = 10.0
replicas = 100
scheme = "eulerMaruyama"
box = { kind = "auto" }
# extinction_floor = 1e-6

[kernel]
t = 1.0                   # time of the exported kernel
# radius = 20             # export box (default: tail below 1e-14)
q = 1.0                   # tail-bound range K ∈ [0, q t]
hoeffding_times = []      # e.g. [1, 2, 4, 8, 16, 32, 64]
# k_points = 200          # K grid per time (default: integers)

[greens]
mc_replicas = 100000
mc_horizon = 1000.0
# lambda = 0.3            # for the subcritical second-moment bound
c0 = 1.0

[odeclass]
# input = "series.csv"    # CSV t,f or a moment-series JSON
delta = 1.0
gamma = 1.0
# alpha = 0.1             # checked as given; fitted when absent
preferred_alpha = 1.0     # target of the fit, clipped to the feasible range
a = 1.0                   # K ranges over [a, b t]
b = 1.0
scale = 1.0

[continuum]
dx = 0.1
# dt = 0.005              # default dx^2/2
horizon = 50.0
# half_width = 45.4       # default 5 sqrt(T) + 10
replicas = 500
noise = 1.0               # multiplier on σ (0 = heat flow)
samples_per_decade = 60
eta = 0.5

[fit]
# input = "trajectories.csv"  # trajectory CSV or two-column t,f CSV
law = "d1"
eta = 0.5
"#;
