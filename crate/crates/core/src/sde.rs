//! Time stepping of `du = (Gu)dt + λσ(u)dB` on a static box, recording the
//! total mass `m_t = Σ_x u_t(x)` and its quadratic variation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kernel::{transition_kernel, transition_kernel_with_tail};
use crate::lattice::PaddedGrid;
use crate::math;
use crate::model::{LatticeField, Model, ModelError, StepDistribution};
use crate::rng::{replica_rng, standard_normal, ReplicaRng};
use crate::stats;

/// Fraction of the mass allowed within `R_0` of the box edge before a
/// trajectory is flagged.
pub const BOUNDARY_WARNING_FRACTION: f64 = 1e-6;

/// Default out-of-box mass budget for [`BoxPolicy::TailBound`] and [`BoxPolicy::Auto`].
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SAMPLES_PER_DECADE: usize = 60;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("the exact-linear scheme needs a linear σ")]
    SchemeNeedsLinearSigma,
    #[error("need at least {required} replicas, got {found}")]
    InsufficientReplicas { required: usize, found: usize },
    #[error("snapshots disagree in dimension or radius")]
    SnapshotShape,
}

/// Radius of the static simulation box.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum BoxPolicy {
    Fixed { radius: usize },
    /// `ceil(4·R_0·√Var₁·√T) + 8`.
    Formula,
    /// Smallest `K` with `Σ_j P{|X_T·e_j| > K} ≤ eps`, from the exact
    /// one-dimensional marginal kernels.
    TailBound { eps: f64 },
    /// `max(Formula, TailBound{DEFAULT_TAIL_EPS} + R_0)`.
    #[default]
    Auto,
}

impl BoxPolicy {
    pub fn radius(&self, step: &StepDistribution, horizon: f64) -> usize {
        let r0 = step.range();
        match *self {
            BoxPolicy::Fixed { radius } => radius,
            BoxPolicy::Formula => formula_radius(step, horizon),
            BoxPolicy::TailBound { eps } => tail_radius(step, horizon, eps).max(r0),
            BoxPolicy::Auto => formula_radius(step, horizon).max(tail_radius(step, horizon, DEFAULT_TAIL_EPS) + r0),
        }
    }
}

fn formula_radius(step: &StepDistribution, horizon: f64) -> usize {
    let v = step.max_coordinate_variance();
    math::ceil(4.0 * step.range() as f64 * math::sqrt(v) * math::sqrt(horizon)) as usize + 8
}

fn tail_radius(step: &StepDistribution, horizon: f64, eps: f64) -> usize {
    let d = step.dim();
    let sd = math::sqrt(horizon * step.max_coordinate_variance());
    let reach = step.range() * (8 + math::ceil(12.0 * sd) as usize);
    let mut tails: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let raw = step.marginal(j).into_iter().map(|(x, p)| (vec![x], p)).collect();
        let marginal = StepDistribution::new(raw, 1).expect("marginal of a valid law is valid");
        let kern = transition_kernel_with_tail(&marginal, horizon, reach, eps * 1e-3);
        let shells = kern.shell_masses();
        // tail[k] = P{|X| > k}
        let mut tail = vec![0.0; shells.len()];
        let mut acc = kern.truncation_error;
        for k in (0..shells.len()).rev() {
            tail[k] = acc;
            acc += shells[k];
        }
        tails.push(tail);
    }
    (0..=reach)
        .find(|&k| tails.iter().map(|t| t[k]).sum::<f64>() <= eps)
        .unwrap_or(reach)
}

/// Time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum Scheme {
    /// `u' = max(0, u + dt·Gu + λσ(u)√dt·Z)`.
    #[default]
    EulerMaruyama,
    /// Lie splitting for linear `σ(u) = s·u`: an Euler drift step
    /// `u* = u + dt·Gu` followed by the exact multiplicative noise factor
    /// `exp(λs√dt·Z − λ²s²dt/2)`. Positive without clamping.
    ExactLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimParams {
    pub lambda: f64,
    pub c0: f64,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub box_policy: BoxPolicy,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_samples_per_decade")]
    pub samples_per_decade: usize,
    /// Replicas whose mass drops below this level stop evolving; their
    /// field and mass are frozen at that value.
    #[serde(default)]
    pub extinction_floor: Option<f64>,
    /// Times at which full fields are kept (snapped to the step grid).
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

fn default_samples_per_decade() -> usize {
    DEFAULT_SAMPLES_PER_DECADE
}

impl SimParams {
    pub fn new(lambda: f64, c0: f64, horizon: f64) -> Self {
        Self {
            lambda,
            c0,
            dt: DEFAULT_DT,
            horizon,
            box_policy: BoxPolicy::Auto,
            replicas: 1,
            seed: 0,
            scheme: Scheme::EulerMaruyama,
            samples_per_decade: DEFAULT_SAMPLES_PER_DECADE,
            extinction_floor: None,
            snapshot_times: Vec::new(),
        }
    }

    pub fn validate(&self, model: &Model) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidParams(m.into()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("λ must be finite and nonnegative");
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return bad("c0 must be positive");
        }
        if !(self.dt > 0.0 && self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("dt and T must be positive");
        }
        if self.dt > self.horizon {
            return bad("dt must not exceed T");
        }
        if self.dt * (1.0 - model.step.stay_probability()) > 1.0 {
            return bad("dt·(1 − τ(0)) must be at most 1");
        }
        if self.replicas == 0 {
            return bad("replica count must be positive");
        }
        if self.samples_per_decade == 0 {
            return bad("samples per decade must be positive");
        }
        if self.snapshot_times.iter().any(|&t| !(0.0..=self.horizon).contains(&t)) {
            return bad("snapshot times must lie in [0, T]");
        }
        let radius = self.box_radius(&model.step);
        if radius < model.step.range() {
            return Err(ModelError::BoxTooSmall { radius, range: model.step.range() }.into());
        }
        if self.scheme == Scheme::ExactLinear && model.sigma.linear_slope().is_none() {
            return Err(SimError::SchemeNeedsLinearSigma);
        }
        Ok(())
    }

    pub fn box_radius(&self, step: &StepDistribution) -> usize {
        self.box_policy.radius(step, self.horizon)
    }

    /// Number of steps; `dt` is adjusted down so the steps tile `[0, T]`.
    pub fn steps(&self) -> usize {
        (math::ceil(self.horizon / self.dt - 1e-9) as usize).max(1)
    }

    pub fn effective_dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    /// Step indices of the sample times: 0 and the geometric grid
    /// `T·10^{−k/n}` (`n` per decade) down to `dt`, snapped to steps.
    pub fn sample_steps(&self) -> Vec<usize> {
        let n = self.steps();
        let dt = self.effective_dt();
        let mut idx = vec![0usize, n];
        let mut k = 1;
        loop {
            let t = self.horizon * math::powf(10.0, -(k as f64) / self.samples_per_decade as f64);
            if t < dt {
                break;
            }
            idx.push((math::round(t / dt) as usize).clamp(1, n));
            k += 1;
        }
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let dt = self.effective_dt();
        self.sample_steps().into_iter().map(|i| i as f64 * dt).collect()
    }

    fn snapshot_steps(&self) -> Vec<usize> {
        let dt = self.effective_dt();
        let mut v: Vec<usize> = self.snapshot_times.iter().map(|t| math::round(t / dt) as usize).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Why a replica stopped before the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Abort {
    NonFinite { step: usize, time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MassTrajectory {
    pub replica_id: u64,
    pub seed: u64,
    pub lambda: f64,
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    /// Running `⟨m⟩_t` estimate.
    pub qv: Vec<f64>,
    /// Running `∫_0^t ‖u_s‖²_{ℓ²} ds`.
    pub l2_integral: Vec<f64>,
    /// `‖u_t‖_{ℓ²}/‖u_t‖_{ℓ¹}` at the sample times.
    pub concentration: Vec<f64>,
    pub clamp_count: u64,
    pub site_steps: u64,
    /// Largest ratio of the mass within `R_0` of the box edge to the total.
    pub boundary_ratio: f64,
    pub boundary_warning: bool,
    /// Time at which the mass fell below the extinction floor.
    pub frozen_at: Option<f64>,
    pub aborted: Option<Abort>,
}

impl MassTrajectory {
    pub fn final_mass(&self) -> f64 {
        *self.mass.last().expect("trajectory has samples")
    }
}

/// A full field kept at a snapshot time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub field: LatticeField,
}

/// Output of a single replica.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutput {
    pub trajectory: MassTrajectory,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Default, Clone, Copy)]
struct StepStats {
    mass: f64,
    l2: f64,
    qv: f64,
    clamps: u64,
}

/// Box geometry and coefficients shared by all replicas of a campaign.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    grid: PaddedGrid,
    model: &'a Model,
    dt: f64,
    sqrt_dt: f64,
    scheme: Scheme,
    shell: Vec<usize>,
    origin: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a Model, radius: usize, dt: f64, scheme: Scheme) -> Result<Self, SimError> {
        let grid = PaddedGrid::new(&model.step, radius)?;
        if scheme == Scheme::ExactLinear && model.sigma.linear_slope().is_none() {
            return Err(SimError::SchemeNeedsLinearSigma);
        }
        let shell = grid.shell(model.step.range());
        let origin = grid.padded_index(&vec![0; model.dim()]).expect("origin is in the box");
        Ok(Self { grid, model, dt, sqrt_dt: math::sqrt(dt), scheme, shell, origin })
    }

    pub fn sites(&self) -> usize {
        self.grid.sites()
    }

    pub fn radius(&self) -> usize {
        self.grid.radius
    }

    /// Padded storage holding `c0·δ_0`.
    pub fn initial(&self, c0: f64) -> Vec<f64> {
        let mut u = self.grid.zeros();
        u[self.origin] = c0;
        u
    }

    pub fn to_field(&self, u: &[f64]) -> LatticeField {
        LatticeField::from_values(self.grid.dim, self.grid.radius, self.grid.unpack(u))
            .expect("simulation state is finite")
    }

    pub fn from_field(&self, field: &LatticeField) -> Vec<f64> {
        assert_eq!(field.radius(), self.grid.radius, "field radius must match the box");
        let mut u = self.grid.zeros();
        self.grid.pack(field.values(), &mut u);
        u
    }

    pub fn mass(&self, u: &[f64]) -> f64 {
        self.grid.sum(u)
    }

    fn boundary_mass(&self, u: &[f64]) -> f64 {
        self.shell.iter().map(|&i| u[i]).sum()
    }

    /// Fills `z` with one standard normal per box site, in row-major order.
    pub fn draw_normals(&self, rng: &mut ReplicaRng, z: &mut [f64]) {
        for v in z.iter_mut() {
            *v = standard_normal(rng);
        }
    }

    /// One step of the configured scheme with the given site normals.
    /// Returns the new mass, `‖u‖²` before the step, the quadratic
    /// variation increment and the number of clamps.
    fn advance(&self, u: &[f64], out: &mut [f64], lambda: f64, z: Option<&[f64]>) -> StepStats {
        let g = &self.grid;
        let dt = self.dt;
        let mut st = StepStats::default();
        let mut k = 0usize;
        match (self.scheme, self.model.sigma.linear_slope(), z) {
            (_, _, None) => {
                for &start in &g.line_starts {
                    for i in start..start + g.side {
                        let v = u[i];
                        let w = v + dt * g.drift_at(u, i);
                        st.l2 += v * v;
                        let w = if w < 0.0 {
                            st.clamps += 1;
                            0.0
                        } else {
                            w
                        };
                        out[i] = w;
                        st.mass += w;
                    }
                }
            }
            (Scheme::EulerMaruyama, Some(s), Some(z)) => {
                let a = lambda * s * self.sqrt_dt;
                for &start in &g.line_starts {
                    for i in start..start + g.side {
                        let v = u[i];
                        let w = v + dt * g.drift_at(u, i) + a * v * z[k];
                        k += 1;
                        st.l2 += v * v;
                        let w = if w < 0.0 {
                            st.clamps += 1;
                            0.0
                        } else {
                            w
                        };
                        out[i] = w;
                        st.mass += w;
                    }
                }
                st.qv = lambda * lambda * s * s * st.l2 * dt;
            }
            (Scheme::EulerMaruyama, None, Some(z)) => {
                let a = lambda * self.sqrt_dt;
                let sigma = &self.model.sigma;
                let mut sq = 0.0;
                for &start in &g.line_starts {
                    for i in start..start + g.side {
                        let v = u[i];
                        let sv = sigma.eval(v);
                        sq += sv * sv;
                        let w = v + dt * g.drift_at(u, i) + a * sv * z[k];
                        k += 1;
                        st.l2 += v * v;
                        let w = if w < 0.0 {
                            st.clamps += 1;
                            0.0
                        } else {
                            w
                        };
                        out[i] = w;
                        st.mass += w;
                    }
                }
                st.qv = lambda * lambda * sq * dt;
            }
            (Scheme::ExactLinear, Some(s), Some(z)) => {
                let a = lambda * s * self.sqrt_dt;
                let comp = -0.5 * a * a;
                let mut sq = 0.0;
                for &start in &g.line_starts {
                    for i in start..start + g.side {
                        let v = u[i];
                        let w = (v + dt * g.drift_at(u, i)).max(0.0);
                        st.l2 += v * v;
                        sq += w * w;
                        let w = w * math::exp(a * z[k] + comp);
                        k += 1;
                        out[i] = w;
                        st.mass += w;
                    }
                }
                st.qv = sq * math::expm1(a * a);
            }
            (Scheme::ExactLinear, None, Some(_)) => unreachable!("checked in Stepper::new"),
        }
        st
    }
}

/// One Euler–Maruyama step `u' = max(0, u + dt·Gu + λσ(u)√dt·Z)` on a field,
/// returning the new field and the number of clamped sites.
pub fn step_euler_maruyama(
    field: &LatticeField,
    model: &Model,
    lambda: f64,
    dt: f64,
    rng: &mut ReplicaRng,
) -> Result<(LatticeField, u64), SimError> {
    let stepper = Stepper::new(model, field.radius(), dt, Scheme::EulerMaruyama)?;
    let u = stepper.from_field(field);
    let mut out = stepper.grid.zeros();
    let stats = if lambda == 0.0 {
        stepper.advance(&u, &mut out, 0.0, None)
    } else {
        let mut z = vec![0.0; stepper.sites()];
        stepper.draw_normals(rng, &mut z);
        stepper.advance(&u, &mut out, lambda, Some(&z))
    };
    Ok((stepper.to_field(&out), stats.clamps))
}

struct Recorder {
    traj: MassTrajectory,
    sample_steps: Vec<usize>,
    next_sample: usize,
    qv: f64,
    l2_int: f64,
}

impl Recorder {
    fn new(params: &SimParams, lambda: f64, replica: u64) -> Self {
        let sample_steps = params.sample_steps();
        let cap = sample_steps.len();
        Self {
            traj: MassTrajectory {
                replica_id: replica,
                seed: params.seed,
                lambda,
                times: Vec::with_capacity(cap),
                mass: Vec::with_capacity(cap),
                qv: Vec::with_capacity(cap),
                l2_integral: Vec::with_capacity(cap),
                concentration: Vec::with_capacity(cap),
                clamp_count: 0,
                site_steps: 0,
                boundary_ratio: 0.0,
                boundary_warning: false,
                frozen_at: None,
                aborted: None,
            },
            sample_steps,
            next_sample: 0,
            qv: 0.0,
            l2_int: 0.0,
        }
    }

    fn record(&mut self, stepper: &Stepper, u: &[f64], mass: f64, step: usize, dt: f64) {
        while self.next_sample < self.sample_steps.len() && self.sample_steps[self.next_sample] <= step {
            let s = self.sample_steps[self.next_sample];
            self.traj.times.push(s as f64 * dt);
            self.traj.mass.push(mass);
            self.traj.qv.push(self.qv);
            self.traj.l2_integral.push(self.l2_int);
            let l2: f64 = if mass > 0.0 {
                let mut acc = 0.0;
                for &start in &stepper.grid.line_starts {
                    acc += u[start..start + stepper.grid.side].iter().map(|v| v * v).sum::<f64>();
                }
                math::sqrt(acc) / mass
            } else {
                0.0
            };
            self.traj.concentration.push(l2);
            if mass > 0.0 {
                let ratio = stepper.boundary_mass(u) / mass;
                if ratio > self.traj.boundary_ratio {
                    self.traj.boundary_ratio = ratio;
                }
                if ratio > BOUNDARY_WARNING_FRACTION {
                    self.traj.boundary_warning = true;
                }
            }
            self.next_sample += 1;
        }
    }

    /// Fills the remaining samples with the frozen state.
    fn finish(mut self, stepper: &Stepper, u: &[f64], mass: f64, dt: f64) -> MassTrajectory {
        let last = *self.sample_steps.last().expect("samples");
        self.record(stepper, u, mass, last, dt);
        self.traj
    }
}

/// Simulates replica `replica` of the campaign from `u_0 = c_0·δ_0` to the horizon.
pub fn simulate_path(params: &SimParams, model: &Model, replica: u64) -> Result<MassTrajectory, SimError> {
    Ok(simulate_path_with_snapshots(params, model, replica)?.trajectory)
}

/// As [`simulate_path`], also returning fields at `params.snapshot_times`.
pub fn simulate_path_with_snapshots(
    params: &SimParams,
    model: &Model,
    replica: u64,
) -> Result<PathOutput, SimError> {
    let mut outputs = simulate_coupled(params, model, &[params.lambda], replica)?;
    Ok(outputs.pop().expect("one output per λ"))
}

/// Runs one replica for every `λ` in `lambdas` in lockstep, driving all of
/// them with the same site normals (paired design). With a single `λ` this
/// is exactly [`simulate_path_with_snapshots`].
pub fn simulate_coupled(
    params: &SimParams,
    model: &Model,
    lambdas: &[f64],
    replica: u64,
) -> Result<Vec<PathOutput>, SimError> {
    for &l in lambdas {
        SimParams { lambda: l, ..params.clone() }.validate(model)?;
    }
    let radius = params.box_radius(&model.step);
    let n_steps = params.steps();
    let dt = params.effective_dt();
    let stepper = Stepper::new(model, radius, dt, params.scheme)?;
    let snapshot_steps = params.snapshot_steps();
    let mut rng = replica_rng(params.seed, replica);

    struct Lane {
        u: Vec<f64>,
        next: Vec<f64>,
        mass: f64,
        live: bool,
        rec: Recorder,
        snaps: Vec<Snapshot>,
    }
    let mut lanes: Vec<Lane> = lambdas
        .iter()
        .map(|&l| Lane {
            u: stepper.initial(params.c0),
            next: stepper.grid.zeros(),
            mass: params.c0,
            live: true,
            rec: Recorder::new(params, l, replica),
            snaps: Vec::new(),
        })
        .collect();
    let needs_noise = lambdas.iter().any(|&l| l != 0.0);
    let mut z = vec![0.0; stepper.sites()];
    let mut snap_idx = 0;
    let sites = stepper.sites() as u64;

    for lane in lanes.iter_mut() {
        lane.rec.record(&stepper, &lane.u, lane.mass, 0, dt);
    }
    if snap_idx < snapshot_steps.len() && snapshot_steps[snap_idx] == 0 {
        for lane in lanes.iter_mut() {
            lane.snaps.push(Snapshot { time: 0.0, field: stepper.to_field(&lane.u) });
        }
        snap_idx += 1;
    }

    for step in 1..=n_steps {
        if !lanes.iter().any(|l| l.live) {
            break;
        }
        if needs_noise {
            stepper.draw_normals(&mut rng, &mut z);
        }
        for (lane, &lambda) in lanes.iter_mut().zip(lambdas) {
            if !lane.live {
                continue;
            }
            let noise = if lambda == 0.0 { None } else { Some(&z[..]) };
            let st = stepper.advance(&lane.u, &mut lane.next, lambda, noise);
            core::mem::swap(&mut lane.u, &mut lane.next);
            lane.rec.qv += st.qv;
            lane.rec.l2_int += st.l2 * dt;
            lane.rec.traj.clamp_count += st.clamps;
            lane.rec.traj.site_steps += sites;
            lane.mass = st.mass;
            if !st.mass.is_finite() {
                lane.rec.traj.aborted = Some(Abort::NonFinite { step, time: step as f64 * dt });
                lane.live = false;
                continue;
            }
            lane.rec.record(&stepper, &lane.u, lane.mass, step, dt);
            if let Some(floor) = params.extinction_floor {
                if lane.mass < floor {
                    lane.live = false;
                    lane.rec.traj.frozen_at = Some(step as f64 * dt);
                }
            }
        }
        while snap_idx < snapshot_steps.len() && snapshot_steps[snap_idx] == step {
            for lane in lanes.iter_mut() {
                lane.snaps.push(Snapshot { time: step as f64 * dt, field: stepper.to_field(&lane.u) });
            }
            snap_idx += 1;
        }
    }

    Ok(lanes
        .into_iter()
        .map(|lane| {
            let mut snaps = lane.snaps;
            if lane.rec.traj.aborted.is_none() {
                // frozen lanes keep their last field
                while snaps.len() < snapshot_steps.len() {
                    let s = snapshot_steps[snaps.len()];
                    snaps.push(Snapshot { time: s as f64 * dt, field: stepper.to_field(&lane.u) });
                }
            }
            let trajectory = if lane.rec.traj.aborted.is_some() {
                lane.rec.traj
            } else {
                lane.rec.finish(&stepper, &lane.u, lane.mass, dt)
            };
            PathOutput { trajectory, snapshots: snaps }
        })
        .collect())
}

/// Runs all replicas sequentially, in replica order.
pub fn simulate_campaign(params: &SimParams, model: &Model) -> Result<Vec<MassTrajectory>, SimError> {
    (0..params.replicas as u64).map(|r| simulate_path(params, model, r)).collect()
}

/// Reference for [`mean_field_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum MeanReference {
    /// `c_0·p_t(−x)`.
    Continuous,
    /// `c_0·((I + dt·G)^n δ_0)(x)`, the exact mean of the unclamped Euler scheme.
    EulerSteps { dt: f64, steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeanFieldReport {
    pub replicas: usize,
    pub time: f64,
    pub sites: usize,
    pub max_abs_z: f64,
    pub max_abs_deviation: f64,
    pub worst_site: Vec<i64>,
    /// Probability mass of the reference outside the snapshot box.
    pub reference_mass_outside: f64,
}

/// Deviations below this are treated as exact when the sample variance vanishes.
pub const MEAN_FIELD_EXACT_TOL: f64 = 1e-9;

/// Compares the site-wise sample mean of `u_t(x)` with its expectation.
pub fn mean_field_check(
    snapshots: &[LatticeField],
    step: &StepDistribution,
    t: f64,
    c0: f64,
    reference: MeanReference,
) -> Result<MeanFieldReport, SimError> {
    const MIN_REPLICAS: usize = 100;
    if snapshots.len() < MIN_REPLICAS {
        return Err(SimError::InsufficientReplicas { required: MIN_REPLICAS, found: snapshots.len() });
    }
    let dim = snapshots[0].dim();
    let radius = snapshots[0].radius();
    if snapshots.iter().any(|s| s.dim() != dim || s.radius() != radius) || dim != step.dim() {
        return Err(SimError::SnapshotShape);
    }
    let outer = radius + step.range();
    let expected: LatticeField = match reference {
        MeanReference::Continuous => {
            let k = transition_kernel(step, t, outer);
            LatticeField::from_fn(dim, outer, |x| {
                let neg: Vec<i64> = x.iter().map(|c| -c).collect();
                c0 * k.get(&neg)
            })
        }
        MeanReference::EulerSteps { dt, steps } => euler_mean(step, c0, outer, dt, steps)?,
    };
    let n = snapshots.len();
    let mut report = MeanFieldReport {
        replicas: n,
        time: t,
        sites: 0,
        max_abs_z: 0.0,
        max_abs_deviation: 0.0,
        worst_site: vec![0; dim],
        reference_mass_outside: 0.0,
    };
    let mut column = vec![0.0; n];
    for (site, e) in expected.iter() {
        let inside = site.iter().all(|c| c.unsigned_abs() as usize <= radius);
        if !inside {
            report.reference_mass_outside += e;
        }
        for (r, s) in snapshots.iter().enumerate() {
            column[r] = s.get(&site);
        }
        let m = stats::mean(&column);
        let se = stats::standard_error(&column);
        let dev = m - e;
        let z = if se > 16.0 * f64::EPSILON * m.abs() {
            dev / se
        } else if dev.abs() <= MEAN_FIELD_EXACT_TOL {
            0.0
        } else {
            f64::INFINITY
        };
        report.sites += 1;
        if dev.abs() > report.max_abs_deviation {
            report.max_abs_deviation = dev.abs();
        }
        if z.abs() > report.max_abs_z {
            report.max_abs_z = z.abs();
            report.worst_site = site;
        }
    }
    Ok(report)
}

fn euler_mean(step: &StepDistribution, c0: f64, radius: usize, dt: f64, steps: usize) -> Result<LatticeField, SimError> {
    let model = Model::new(step.clone(), crate::model::Nonlinearity::identity());
    let stepper = Stepper::new(&model, radius, dt, Scheme::EulerMaruyama)?;
    let mut u = stepper.initial(c0);
    let mut next = stepper.grid.zeros();
    for _ in 0..steps {
        stepper.advance(&u, &mut next, 0.0, None);
        core::mem::swap(&mut u, &mut next);
    }
    Ok(stepper.to_field(&u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_laplacian, Nonlinearity};

    fn pam1() -> Model {
        Model::pam(1)
    }

    #[test]
    fn one_deterministic_step_from_point_mass() {
        let model = pam1();
        let field = LatticeField::point_mass(1, 3, 2.0);
        let mut rng = replica_rng(0, 0);
        let (next, clamps) = step_euler_maruyama(&field, &model, 0.0, 0.01, &mut rng).unwrap();
        assert_eq!(clamps, 0);
        assert!((next.get(&[0]) - 2.0 * (1.0 - 0.01)).abs() < 1e-15);
        assert!((next.get(&[1]) - 2.0 * 0.01 * 0.5).abs() < 1e-15);
        assert!((next.get(&[-1]) - 2.0 * 0.01 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_field_is_absorbing() {
        let model = pam1();
        let field = LatticeField::zeros(1, 5);
        let mut rng = replica_rng(3, 1);
        let (next, _) = step_euler_maruyama(&field, &model, 4.0, 0.01, &mut rng).unwrap();
        assert!(next.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn box_policies() {
        let s1 = builtin_laplacian(1);
        assert_eq!(BoxPolicy::Fixed { radius: 7 }.radius(&s1, 10.0), 7);
        // 4·1·1·√10 = 12.65
        assert_eq!(BoxPolicy::Formula.radius(&s1, 10.0), 13 + 8);
        let tail = BoxPolicy::TailBound { eps: 1e-12 }.radius(&s1, 10.0);
        let k = transition_kernel(&s1, 10.0, 80);
        assert!(k.tail_above(tail) <= 1e-12);
        assert!(k.tail_above(tail - 1) > 1e-12);
        assert_eq!(BoxPolicy::Auto.radius(&s1, 10.0), tail + 1);
    }

    #[test]
    fn sample_grid_shape() {
        let mut p = SimParams::new(1.0, 1.0, 10.0);
        p.dt = 0.01;
        let t = p.sample_times();
        assert_eq!(t[0], 0.0);
        assert!((t[t.len() - 1] - 10.0).abs() < 1e-12);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        // three decades at 60 per decade, minus steps shared at small t
        assert!(t.len() > 100 && t.len() <= 182, "{}", t.len());
    }

    #[test]
    fn lambda_zero_conserves_mass_and_matches_euler_mean() {
        let model = Model::pam(2);
        let mut p = SimParams::new(0.0, 1.5, 2.0);
        p.dt = 0.01;
        let tr = simulate_path(&p, &model, 0).unwrap();
        assert!(tr.mass.iter().all(|m| (m - 1.5).abs() < 1e-12));
        assert!(tr.qv.iter().all(|&q| q == 0.0));
        assert!(!tr.boundary_warning);
        assert_eq!(tr.clamp_count, 0);
    }

    #[test]
    fn linear_sigma_qv_is_exactly_the_l2_integral() {
        let model = Model::new(builtin_laplacian(1), Nonlinearity::linear(1.5).unwrap());
        let mut p = SimParams::new(0.7, 1.0, 1.0);
        p.dt = 0.01;
        let tr = simulate_path(&p, &model, 4).unwrap();
        for (q, i) in tr.qv.iter().zip(&tr.l2_integral) {
            let expected = 0.49 * 2.25 * i;
            assert!((q - expected).abs() <= 1e-10 * (1.0 + expected));
        }
        assert!(tr.qv.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(tr.qv[0], 0.0);
    }

    #[test]
    fn same_replica_is_reproducible() {
        let model = pam1();
        let mut p = SimParams::new(1.0, 1.0, 0.5);
        p.dt = 0.01;
        let a = simulate_path(&p, &model, 9).unwrap();
        let b = simulate_path(&p, &model, 9).unwrap();
        let c = simulate_path(&p, &model, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.mass, c.mass);
    }

    #[test]
    fn coupled_lane_equals_single_run() {
        let model = pam1();
        let mut p = SimParams::new(1.0, 1.0, 0.5);
        p.dt = 0.01;
        p.box_policy = BoxPolicy::Fixed { radius: 6 };
        let lanes = simulate_coupled(&p, &model, &[0.5, 1.0, 2.0], 2).unwrap();
        let single = simulate_path(&SimParams { lambda: 2.0, ..p.clone() }, &model, 2).unwrap();
        assert_eq!(lanes[2].trajectory, single);
    }

    #[test]
    fn exact_linear_is_positive_without_clamps() {
        let model = Model::pam(2);
        let mut p = SimParams::new(6.0, 1.0, 2.0);
        p.dt = 0.05;
        p.scheme = Scheme::ExactLinear;
        p.box_policy = BoxPolicy::Fixed { radius: 5 };
        let out = simulate_path(&p, &model, 0).unwrap();
        assert_eq!(out.clamp_count, 0);
        assert!(out.mass.iter().all(|&m| m > 0.0));
    }

    #[test]
    fn exact_linear_requires_linear_sigma() {
        let sigma = Nonlinearity::tabulated(vec![(-1.0, -1.0), (0.0, 0.0), (1.0, 2.0)], 2.0, 1.0).unwrap();
        let model = Model::new(builtin_laplacian(1), sigma);
        let mut p = SimParams::new(1.0, 1.0, 1.0);
        p.scheme = Scheme::ExactLinear;
        assert_eq!(simulate_path(&p, &model, 0), Err(SimError::SchemeNeedsLinearSigma));
    }

    #[test]
    fn extinction_floor_freezes_mass() {
        let model = pam1();
        let mut p = SimParams::new(6.0, 1.0, 5.0);
        p.dt = 0.01;
        p.scheme = Scheme::ExactLinear;
        p.extinction_floor = Some(0.5);
        p.box_policy = BoxPolicy::Fixed { radius: 10 };
        let tr = simulate_path(&p, &model, 1).unwrap();
        if let Some(t) = tr.frozen_at {
            let frozen: Vec<f64> = tr.times.iter().zip(&tr.mass).filter(|(s, _)| **s >= t).map(|(_, m)| *m).collect();
            assert!(frozen.windows(2).all(|w| w[0] == w[1]));
            assert!(frozen[0] < 0.5);
        }
    }

    #[test]
    fn validation_rejects_bad_params() {
        let model = pam1();
        let mut p = SimParams::new(1.0, 1.0, 1.0);
        p.dt = 2.0;
        assert!(p.validate(&model).is_err());
        let mut p = SimParams::new(1.0, -1.0, 1.0);
        p.dt = 0.1;
        assert!(p.validate(&model).is_err());
        let mut p = SimParams::new(1.0, 1.0, 1.0);
        p.box_policy = BoxPolicy::Fixed { radius: 0 };
        assert!(matches!(p.validate(&model), Err(SimError::Model(ModelError::BoxTooSmall { .. }))));
    }

    #[test]
    fn boundary_flag_fires_on_tiny_box() {
        let model = pam1();
        let mut p = SimParams::new(0.0, 1.0, 5.0);
        p.dt = 0.01;
        p.box_policy = BoxPolicy::Fixed { radius: 3 };
        let tr = simulate_path(&p, &model, 0).unwrap();
        assert!(tr.boundary_warning);
        assert!(tr.final_mass() < 1.0);
    }

    #[test]
    fn mean_field_exact_for_deterministic_flow() {
        let model = pam1();
        let mut p = SimParams::new(0.0, 2.0, 1.0);
        p.dt = 0.01;
        p.snapshot_times = vec![1.0];
        let snaps: Vec<LatticeField> = (0..100)
            .map(|r| simulate_path_with_snapshots(&p, &model, r).unwrap().snapshots[0].field.clone())
            .collect();
        let rep = mean_field_check(&snaps, &model.step, 1.0, 2.0, MeanReference::EulerSteps { dt: 0.01, steps: 100 })
            .unwrap();
        assert_eq!(rep.max_abs_z, 0.0);
        assert!(rep.max_abs_deviation < 1e-14);
        // against the continuous kernel the gap is the O(dt) scheme error
        let rep = mean_field_check(&snaps, &model.step, 1.0, 2.0, MeanReference::Continuous).unwrap();
        assert!(rep.max_abs_deviation < 1e-2);
        assert!(rep.reference_mass_outside < 1e-12);
    }

    #[test]
    fn mean_field_needs_replicas() {
        let snaps = vec![LatticeField::zeros(1, 3); 5];
        assert_eq!(
            mean_field_check(&snaps, &builtin_laplacian(1), 1.0, 1.0, MeanReference::Continuous),
            Err(SimError::InsufficientReplicas { required: 100, found: 5 })
        );
    }

    #[test]
    fn stochastic_mean_field_d1() {
        let model = pam1();
        let mut p = SimParams::new(1.0, 1.0, 1.0);
        p.dt = 0.01;
        p.seed = 11;
        p.snapshot_times = vec![1.0];
        let snaps: Vec<LatticeField> = (0..2000)
            .map(|r| simulate_path_with_snapshots(&p, &model, r).unwrap().snapshots[0].field.clone())
            .collect();
        let rep = mean_field_check(&snaps, &model.step, 1.0, 1.0, MeanReference::EulerSteps { dt: 0.01, steps: 100 })
            .unwrap();
        assert!(rep.max_abs_z < 4.5, "{rep:?}");
    }

    #[test]
    fn martingale_mean_and_ito_isometry() {
        let model = pam1();
        let mut p = SimParams::new(1.0, 1.0, 1.0);
        p.dt = 0.01;
        p.seed = 5;
        let trs: Vec<MassTrajectory> = (0..2000).map(|r| simulate_path(&p, &model, r).unwrap()).collect();
        let m: Vec<f64> = trs.iter().map(|t| t.final_mass()).collect();
        let q: Vec<f64> = trs.iter().map(|t| *t.qv.last().unwrap()).collect();
        assert!((stats::mean(&m) - 1.0).abs() < 4.0 * stats::standard_error(&m));
        // Var(m_T) against E⟨m⟩_T: compare E[(m_T − c0)² − qv_T] with 0
        let d: Vec<f64> = m.iter().zip(&q).map(|(a, b)| (a - 1.0) * (a - 1.0) - b).collect();
        assert!(stats::mean(&d).abs() < 5.0 * stats::standard_error(&d));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn fields_stay_nonnegative(seed in 0u64..1000, lambda in 0.0f64..5.0, d in 1usize..3) {
                let model = Model::pam(d);
                let mut p = SimParams::new(lambda, 1.0, 0.3);
                p.dt = 0.01;
                p.seed = seed;
                p.box_policy = BoxPolicy::Fixed { radius: 4 };
                p.snapshot_times = vec![0.1, 0.3];
                let out = simulate_path_with_snapshots(&p, &model, 0).unwrap();
                prop_assert!(out.trajectory.mass.iter().all(|&m| m >= 0.0));
                prop_assert!(out.snapshots.iter().all(|s| s.field.is_nonnegative()));
                prop_assert!(out.trajectory.qv.windows(2).all(|w| w[1] >= w[0]));
            }
        }
    }
}
