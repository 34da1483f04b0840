//! Explicit finite-difference solver for the 1-D stochastic heat equation
//! `∂_t ψ = ½∂_x²ψ + λσ(ψ)ξ` with space-time white noise on `[−L, L]`,
//! zero Dirichlet data at `±L`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::model::Nonlinearity;
use crate::rng::{replica_rng, standard_normal, ReplicaRng};
use crate::sde::{Abort, MassTrajectory, SimParams, BOUNDARY_WARNING_FRACTION, DEFAULT_SAMPLES_PER_DECADE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContinuumError {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("dt = {dt} exceeds the stability limit dx²/2 = {limit}")]
    StabilityViolated { dt: f64, limit: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("initial value {value} at x = {x} is negative or not finite")]
    InvalidInitial { x: f64, value: f64 },
    #[error("initial mass is zero")]
    ZeroMass,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Width, in grid cells, of the strip at each edge watched for boundary mass.
pub const BOUNDARY_CELLS: usize = 5;

/// `G_t(x) = (2πt)^{−1/2} exp(−x²/(2t))`.
pub fn heat_kernel(t: f64, x: f64) -> Result<f64, ContinuumError> {
    if !(t > 0.0) {
        return Err(ContinuumError::NonPositiveTime(t));
    }
    Ok(math::exp(-x * x / (2.0 * t)) / math::sqrt(2.0 * core::f64::consts::PI * t))
}

/// `(G_t * ψ_0)(x)` for `ψ_0(y) = exp(−y²)`, which is `√π·G_{t+1/2}(x)`.
pub fn gaussian_heat_flow(t: f64, x: f64) -> f64 {
    math::sqrt(core::f64::consts::PI) * heat_kernel(t + 0.5, x).expect("t + 1/2 > 0")
}

/// `(G_t * ψ_0)(x)` by the trapezoid rule with `n` intervals on `[lo, hi]`.
pub fn heat_convolution<F: Fn(f64) -> f64>(psi0: F, t: f64, x: f64, lo: f64, hi: f64, n: usize) -> Result<f64, ContinuumError> {
    if !(t > 0.0) {
        return Err(ContinuumError::NonPositiveTime(t));
    }
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let y = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += w * psi0(y) * heat_kernel(t, x - y)?;
    }
    Ok(acc * h)
}

/// Values of `ψ` at the points `x_i = −L + i·dx`, `i = 0..=2L/dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContinuumField {
    pub half_width: f64,
    pub grid_spacing: f64,
    pub values: Vec<f64>,
}

impl ContinuumField {
    pub fn zeros(half_width: f64, dx: f64) -> Result<Self, ContinuumError> {
        let cells = cell_count(half_width, dx)?;
        Ok(Self { half_width, grid_spacing: dx, values: vec![0.0; cells + 1] })
    }

    /// Samples `f` at the grid points; the boundary values are set to zero.
    pub fn from_fn<F: Fn(f64) -> f64>(half_width: f64, dx: f64, f: F) -> Result<Self, ContinuumError> {
        let mut field = Self::zeros(half_width, dx)?;
        let n = field.values.len();
        for i in 1..n - 1 {
            let x = field.x(i);
            let v = f(x);
            if !(v.is_finite() && v >= 0.0) {
                return Err(ContinuumError::InvalidInitial { x, value: v });
            }
            field.values[i] = v;
        }
        Ok(field)
    }

    pub fn points(&self) -> usize {
        self.values.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.grid_spacing
    }

    /// `𝓜 = dx·Σψ`.
    pub fn mass(&self) -> f64 {
        self.grid_spacing * self.values.iter().sum::<f64>()
    }

    /// Linear interpolation at `x`, zero outside `[−L, L]`.
    pub fn value_at(&self, x: f64) -> f64 {
        let s = (x + self.half_width) / self.grid_spacing;
        if !(s >= 0.0) || s > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let i = (math::floor(s) as usize).min(self.values.len() - 2);
        let w = s - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    fn boundary_mass(&self) -> f64 {
        let n = self.values.len();
        let k = BOUNDARY_CELLS.min(n / 2);
        self.grid_spacing * (self.values[..=k].iter().sum::<f64>() + self.values[n - 1 - k..].iter().sum::<f64>())
    }
}

fn cell_count(half_width: f64, dx: f64) -> Result<usize, ContinuumError> {
    if !(half_width > 0.0 && dx > 0.0 && half_width.is_finite()) {
        return Err(ContinuumError::InvalidGrid("L and dx must be positive".into()));
    }
    let cells = math::round(2.0 * half_width / dx);
    if (cells * dx - 2.0 * half_width).abs() > 1e-9 * half_width {
        return Err(ContinuumError::InvalidGrid("dx must divide 2L".into()));
    }
    if cells < 4.0 {
        return Err(ContinuumError::InvalidGrid("need at least 4 cells".into()));
    }
    Ok(cells as usize)
}

/// Default half-width: `5√T + 10`, rounded up to a multiple of `dx`.
pub fn default_half_width(horizon: f64, dx: f64) -> f64 {
    let l = 5.0 * math::sqrt(horizon) + 10.0;
    math::ceil(l / dx - 1e-9) * dx
}

pub fn default_initial(x: f64) -> f64 {
    math::exp(-x * x)
}

struct Stats {
    mass: f64,
    qv: f64,
    l2: f64,
    clamps: u64,
}

/// One explicit step from `u` into `out`. `z` holds one normal per interior point.
fn advance(u: &[f64], out: &mut [f64], sigma: &Nonlinearity, noise: f64, dt: f64, dx: f64, z: Option<&[f64]>) -> Stats {
    let n = u.len();
    let c = dt / (2.0 * dx * dx);
    let s = noise * math::sqrt(dt / dx);
    let mut st = Stats { mass: 0.0, qv: 0.0, l2: 0.0, clamps: 0 };
    out[0] = 0.0;
    out[n - 1] = 0.0;
    let slope = sigma.linear_slope();
    for i in 1..n - 1 {
        let v = u[i];
        let mut w = v + c * (u[i + 1] - 2.0 * v + u[i - 1]);
        if let Some(z) = z {
            let sv = match slope {
                Some(k) => k * v,
                None => sigma.eval(v),
            };
            w += s * sv * z[i - 1];
            st.qv += noise * noise * sv * sv * dx * dt;
        }
        if w < 0.0 {
            w = 0.0;
            st.clamps += 1;
        }
        out[i] = w;
        st.mass += w;
        st.l2 += v * v;
    }
    st.mass *= dx;
    st.l2 *= dx;
    st
}

fn check_step(dt: f64, dx: f64) -> Result<(), ContinuumError> {
    let limit = dx * dx / 2.0;
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(ContinuumError::StabilityViolated { dt, limit });
    }
    Ok(())
}

/// `ψ'(x) = max(0, ψ + dt·Δ_dx ψ/2 + λσ(ψ)√(dt/dx)·Z_x)` with `ψ' = 0` at `±L`;
/// returns the new field and the number of clamped points.
pub fn step_continuum(
    field: &ContinuumField,
    sigma: &Nonlinearity,
    noise: f64,
    dt: f64,
    rng: &mut ReplicaRng,
) -> Result<(ContinuumField, u64), ContinuumError> {
    check_step(dt, field.grid_spacing)?;
    let mut out = field.clone();
    let z = if noise != 0.0 {
        let mut z = vec![0.0; field.values.len() - 2];
        z.iter_mut().for_each(|v| *v = standard_normal(rng));
        Some(z)
    } else {
        None
    };
    let st = advance(&field.values, &mut out.values, sigma, noise, dt, field.grid_spacing, z.as_deref());
    Ok((out, st.clamps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContinuumParams {
    /// Multiplier on `σ`; `0` gives the deterministic heat flow.
    #[serde(default = "one")]
    pub noise: f64,
    pub dx: f64,
    /// Defaults to `dx²/2`.
    #[serde(default)]
    pub dt: Option<f64>,
    pub horizon: f64,
    /// Defaults to [`default_half_width`].
    #[serde(default)]
    pub half_width: Option<f64>,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default = "default_spd")]
    pub samples_per_decade: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_spd() -> usize {
    DEFAULT_SAMPLES_PER_DECADE
}

impl ContinuumParams {
    pub fn new(dx: f64, horizon: f64) -> Self {
        Self {
            noise: 1.0,
            dx,
            dt: None,
            horizon,
            half_width: None,
            replicas: 1,
            seed: 0,
            samples_per_decade: DEFAULT_SAMPLES_PER_DECADE,
            snapshot_times: Vec::new(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(self.dx * self.dx / 2.0)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width.unwrap_or_else(|| default_half_width(self.horizon, self.dx))
    }

    pub fn validate(&self) -> Result<(), ContinuumError> {
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(ContinuumError::InvalidParams("noise multiplier must be nonnegative".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ContinuumError::NonPositiveTime(self.horizon));
        }
        if self.replicas == 0 || self.samples_per_decade == 0 {
            return Err(ContinuumError::InvalidParams("replicas and samples per decade must be positive".into()));
        }
        if self.snapshot_times.iter().any(|&t| !(0.0..=self.horizon).contains(&t)) {
            return Err(ContinuumError::InvalidParams("snapshot times must lie in [0, T]".into()));
        }
        cell_count(self.half_width(), self.dx)?;
        check_step(self.grid_params().effective_dt(), self.dx)
    }

    /// Time grid shared with the lattice simulator.
    fn grid_params(&self) -> SimParams {
        let mut p = SimParams::new(self.noise, 1.0, self.horizon);
        p.dt = self.dt();
        p.samples_per_decade = self.samples_per_decade;
        p
    }

    pub fn steps(&self) -> usize {
        self.grid_params().steps()
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.grid_params().sample_times()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumSnapshot {
    pub time: f64,
    pub field: ContinuumField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumPath {
    /// `mass` holds `𝓜_t`; `boundary_ratio` is the largest share of the mass
    /// within [`BOUNDARY_CELLS`] cells of `±L`.
    pub trajectory: MassTrajectory,
    pub snapshots: Vec<ContinuumSnapshot>,
    /// Mass carried out through `±L` by the heat flow.
    pub boundary_loss: f64,
}

/// Replica `replica` of the campaign, from `ψ_0` sampled on the grid.
pub fn simulate_continuum<F: Fn(f64) -> f64>(
    params: &ContinuumParams,
    sigma: &Nonlinearity,
    psi0: F,
    replica: u64,
) -> Result<ContinuumPath, ContinuumError> {
    params.validate()?;
    let dx = params.dx;
    let mut u = ContinuumField::from_fn(params.half_width(), dx, psi0)?;
    let m0 = u.mass();
    if !(m0 > 0.0) {
        return Err(ContinuumError::ZeroMass);
    }
    let grid = params.grid_params();
    let n_steps = grid.steps();
    let dt = grid.effective_dt();
    let sample_steps = grid.sample_steps();
    let mut snap_steps: Vec<usize> = params.snapshot_times.iter().map(|t| math::round(t / dt) as usize).collect();
    snap_steps.sort_unstable();
    snap_steps.dedup();

    let mut rng = replica_rng(params.seed, replica);
    let mut next = u.clone();
    let mut z = vec![0.0; u.points() - 2];
    let mut traj = MassTrajectory {
        replica_id: replica,
        seed: params.seed,
        lambda: params.noise,
        times: Vec::with_capacity(sample_steps.len()),
        mass: Vec::with_capacity(sample_steps.len()),
        qv: Vec::with_capacity(sample_steps.len()),
        l2_integral: Vec::with_capacity(sample_steps.len()),
        concentration: Vec::with_capacity(sample_steps.len()),
        clamp_count: 0,
        site_steps: 0,
        boundary_ratio: 0.0,
        boundary_warning: false,
        frozen_at: None,
        aborted: None,
    };
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let (mut qv, mut l2_int, mut mass) = (0.0, 0.0, m0);
    let mut boundary_loss = 0.0;
    let (mut si, mut ni) = (0, 0);
    let c = dt / (2.0 * dx * dx);

    let mut record = |step: usize, u: &ContinuumField, mass: f64, qv: f64, l2_int: f64, traj: &mut MassTrajectory| {
        while si < sample_steps.len() && sample_steps[si] <= step {
            traj.times.push(sample_steps[si] as f64 * dt);
            traj.mass.push(mass);
            traj.qv.push(qv);
            traj.l2_integral.push(l2_int);
            if mass > 0.0 {
                let l2 = math::sqrt(dx * u.values.iter().map(|v| v * v).sum::<f64>());
                traj.concentration.push(l2 / mass);
                let ratio = u.boundary_mass() / mass;
                traj.boundary_ratio = traj.boundary_ratio.max(ratio);
                traj.boundary_warning |= ratio > BOUNDARY_WARNING_FRACTION;
            } else {
                traj.concentration.push(0.0);
            }
            si += 1;
        }
    };
    record(0, &u, mass, qv, l2_int, &mut traj);
    while ni < snap_steps.len() && snap_steps[ni] == 0 {
        snapshots.push(ContinuumSnapshot { time: 0.0, field: u.clone() });
        ni += 1;
    }
    let interior = (u.points() - 2) as u64;
    for step in 1..=n_steps {
        let noise = if params.noise != 0.0 {
            z.iter_mut().for_each(|v| *v = standard_normal(&mut rng));
            Some(&z[..])
        } else {
            None
        };
        let n = u.points();
        boundary_loss += c * dx * (u.values[1] + u.values[n - 2]);
        let st = advance(&u.values, &mut next.values, sigma, params.noise, dt, dx, noise);
        core::mem::swap(&mut u, &mut next);
        qv += st.qv;
        l2_int += st.l2 * dt;
        mass = st.mass;
        traj.clamp_count += st.clamps;
        traj.site_steps += interior;
        if !mass.is_finite() {
            traj.aborted = Some(Abort::NonFinite { step, time: step as f64 * dt });
            break;
        }
        record(step, &u, mass, qv, l2_int, &mut traj);
        while ni < snap_steps.len() && snap_steps[ni] == step {
            snapshots.push(ContinuumSnapshot { time: step as f64 * dt, field: u.clone() });
            ni += 1;
        }
    }
    Ok(ContinuumPath { trajectory: traj, snapshots, boundary_loss })
}

/// Pointwise comparison of the replica mean of `ψ_t` with a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeRow {
    pub x: f64,
    pub mean: f64,
    pub se: f64,
    pub reference: f64,
    pub z: f64,
}

pub fn mean_field_probes<R: Fn(f64) -> f64>(fields: &[&ContinuumField], probes: &[f64], reference: R) -> Vec<ProbeRow> {
    probes
        .iter()
        .map(|&x| {
            let v: Vec<f64> = fields.iter().map(|f| f.value_at(x)).collect();
            let mean = crate::stats::mean(&v);
            let se = crate::stats::standard_error(&v);
            let r = reference(x);
            let z = if se > 0.0 { (mean - r) / se } else if mean == r { 0.0 } else { f64::INFINITY };
            ProbeRow { x, mean, se, reference: r, z }
        })
        .collect()
}
