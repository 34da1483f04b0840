//! Post-processing of simulated trajectories: fractional moments, decay
//! fits, the two-point moment oracle, survival sweeps and bound checks.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::lattice::PaddedGrid;
use crate::math;
use crate::model::{LatticeField, Model, ModelError, StepDistribution};
use crate::sde::{simulate_coupled, MassTrajectory, SimError, SimParams};
use crate::stats;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("no input data")]
    EmptyInput,
    #[error("trajectories do not share a time grid")]
    GridMismatch,
    #[error("η = {0} is outside (0, 1]")]
    InvalidEta(f64),
    #[error("time {0} is not on the trajectory grid")]
    TimeNotOnGrid(f64),
    #[error("need at least {required} points, found {found}")]
    TooFewPoints { required: usize, found: usize },
    #[error("estimate at t = {time} is {value}; the logarithm needs positive values")]
    NonPositiveEstimates { time: f64, value: f64 },
    #[error("c = {c} must exceed λ²Lip²/2 = {min}")]
    InvalidC { c: f64, min: f64 },
    #[error("threshold {threshold} is outside (0, c0)")]
    InvalidThreshold { threshold: f64 },
    #[error("λ grid must be strictly increasing")]
    UnsortedGrid,
    #[error("need at least 3 λ values, got {0}")]
    TooFewLambdas(usize),
    #[error("the moment oracle needs σ(u) = u")]
    NotPam,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// `Ê[m_t^η]` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentSeries {
    pub eta: f64,
    pub replicas: usize,
    pub times: Vec<f64>,
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Sample mean of per-replica finite-difference derivatives of `m_t^η`.
    pub derivatives: Vec<f64>,
    pub derivative_errors: Vec<f64>,
    /// Mean of `‖u_t‖_{ℓ²}/‖u_t‖_{ℓ¹}` when the trajectories carry it.
    pub concentration: Vec<f64>,
}

/// Three-point derivative weights on a nonuniform grid.
pub(crate) fn derivative_weights(t: &[f64], i: usize) -> [(usize, f64); 3] {
    let n = t.len();
    if i == 0 {
        let h = t[1] - t[0];
        return [(0, -1.0 / h), (1, 1.0 / h), (1, 0.0)];
    }
    if i == n - 1 {
        let h = t[n - 1] - t[n - 2];
        return [(n - 2, -1.0 / h), (n - 1, 1.0 / h), (n - 1, 0.0)];
    }
    let hm = t[i] - t[i - 1];
    let hp = t[i + 1] - t[i];
    let den = hm * hp * (hm + hp);
    [(i - 1, -hp * hp / den), (i, (hp * hp - hm * hm) / den), (i + 1, hm * hm / den)]
}

fn shared_grid(trajectories: &[MassTrajectory]) -> Result<&[f64], AnalysisError> {
    let first = trajectories.first().ok_or(AnalysisError::EmptyInput)?;
    if trajectories.iter().any(|t| t.times != first.times || t.mass.len() != first.times.len()) {
        return Err(AnalysisError::GridMismatch);
    }
    Ok(&first.times)
}

fn grid_indices(times: &[f64], wanted: Option<&[f64]>) -> Result<Vec<usize>, AnalysisError> {
    match wanted {
        None => Ok((0..times.len()).collect()),
        Some(w) => w
            .iter()
            .map(|&t| {
                times
                    .iter()
                    .position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
                    .ok_or(AnalysisError::TimeNotOnGrid(t))
            })
            .collect(),
    }
}

/// Per-time sample mean of `m_t^η` with jackknife standard errors, on the
/// shared grid or the subset `t_grid` of it.
pub fn fractional_moment(
    trajectories: &[MassTrajectory],
    eta: f64,
    t_grid: Option<&[f64]>,
) -> Result<MomentSeries, AnalysisError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(AnalysisError::InvalidEta(eta));
    }
    let times = shared_grid(trajectories)?;
    let idx = grid_indices(times, t_grid)?;
    let n = trajectories.len();
    let powered: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|tr| idx.iter().map(|&i| if eta == 1.0 { tr.mass[i] } else { math::powf(tr.mass[i], eta) }).collect())
        .collect();
    let sel_times: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let mut series = MomentSeries {
        eta,
        replicas: n,
        times: sel_times.clone(),
        estimates: Vec::with_capacity(idx.len()),
        standard_errors: Vec::with_capacity(idx.len()),
        derivatives: Vec::with_capacity(idx.len()),
        derivative_errors: Vec::with_capacity(idx.len()),
        concentration: Vec::with_capacity(idx.len()),
    };
    let mut column = vec![0.0; n];
    for k in 0..idx.len() {
        for r in 0..n {
            column[r] = powered[r][k];
        }
        let (m, se) = stats::jackknife(&column, stats::mean);
        series.estimates.push(m);
        series.standard_errors.push(se);
        if idx.len() >= 2 {
            let w = derivative_weights(&sel_times, k);
            for r in 0..n {
                column[r] = w.iter().map(|&(j, c)| c * powered[r][j]).sum();
            }
            series.derivatives.push(stats::mean(&column));
            series.derivative_errors.push(stats::standard_error(&column));
        }
        let conc: Vec<f64> = trajectories
            .iter()
            .filter_map(|tr| tr.concentration.get(idx[k]).copied())
            .collect();
        series.concentration.push(if conc.is_empty() { f64::NAN } else { stats::mean(&conc) });
    }
    Ok(series)
}

impl MomentSeries {
    /// Largest standardized increase `(Ê_j − Ê_i)/√(se_i² + se_j²)` over
    /// pairs `i < j`; at most 3 for a series nonincreasing within 3 SE.
    pub fn max_standardized_increase(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for j in 1..self.times.len() {
            for i in 0..j {
                let d = self.estimates[j] - self.estimates[i];
                let s = math::sqrt(self.standard_errors[i].powi(2) + self.standard_errors[j].powi(2));
                let z = if s > 0.0 {
                    d / s
                } else if d > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                if z > worst {
                    worst = z;
                }
            }
        }
        worst
    }
}

/// Regressor of the decay law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayLaw {
    /// `exp(−v·t^{1/3})`.
    D1,
    /// `exp(−v·√log t)`.
    D2,
}

impl DecayLaw {
    pub fn regressor(&self, t: f64) -> f64 {
        match self {
            DecayLaw::D1 => math::cbrt(t),
            DecayLaw::D2 => math::sqrt(math::ln(t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayFit {
    pub law: DecayLaw,
    /// `v̂ = −slope`.
    pub v_hat: f64,
    pub intercept: f64,
    pub v_se: f64,
    /// 95% interval for `v`.
    pub ci: (f64, f64),
    pub points: usize,
}

impl DecayFit {
    pub fn ci_excludes_zero(&self) -> bool {
        self.ci.0 > 0.0 || self.ci.1 < 0.0
    }
}

pub const MIN_FIT_POINTS: usize = 10;

/// Least squares of `log Ê` on the law's regressor over the points with `t ≥ 1`.
pub fn fit_decay(series: &MomentSeries, law: DecayLaw) -> Result<DecayFit, AnalysisError> {
    let (x, y) = fit_points(&series.times, &series.estimates, law)?;
    let f = stats::ols(&x, &y);
    let q = stats::student_t_975(x.len() - 2);
    let v = -f.slope;
    Ok(DecayFit { law, v_hat: v, intercept: f.intercept, v_se: f.slope_se, ci: (v - q * f.slope_se, v + q * f.slope_se), points: x.len() })
}

fn fit_points(times: &[f64], estimates: &[f64], law: DecayLaw) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (&t, &e) in times.iter().zip(estimates) {
        if t < 1.0 {
            continue;
        }
        if !(e > 0.0) {
            return Err(AnalysisError::NonPositiveEstimates { time: t, value: e });
        }
        x.push(law.regressor(t));
        y.push(math::ln(e));
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::TooFewPoints { required: MIN_FIT_POINTS, found: x.len() });
    }
    Ok((x, y))
}

/// As [`fit_decay`] on `Ê[m_t^η]`, with the standard error of `v̂` taken
/// from the leave-one-replica-out jackknife of the whole fit. This accounts
/// for the correlation between time points that the regression residuals
/// ignore.
pub fn fit_decay_jackknife(
    trajectories: &[MassTrajectory],
    eta: f64,
    law: DecayLaw,
) -> Result<DecayFit, AnalysisError> {
    let series = fractional_moment(trajectories, eta, None)?;
    let full = fit_decay(&series, law)?;
    let n = trajectories.len();
    if n < 2 {
        return Ok(full);
    }
    let keep: Vec<usize> = (0..series.times.len()).filter(|&i| series.times[i] >= 1.0).collect();
    let x: Vec<f64> = keep.iter().map(|&i| law.regressor(series.times[i])).collect();
    let totals: Vec<f64> = keep.iter().map(|&i| series.estimates[i] * n as f64).collect();
    let mut slopes = Vec::with_capacity(n);
    let mut y = vec![0.0; keep.len()];
    for tr in trajectories {
        for (k, &i) in keep.iter().enumerate() {
            let own = if eta == 1.0 { tr.mass[i] } else { math::powf(tr.mass[i], eta) };
            let loo = (totals[k] - own) / (n - 1) as f64;
            if !(loo > 0.0) {
                return Err(AnalysisError::NonPositiveEstimates { time: series.times[i], value: loo });
            }
            y[k] = math::ln(loo);
        }
        slopes.push(stats::ols(&x, &y).slope);
    }
    let m = stats::mean(&slopes);
    let var = slopes.iter().map(|s| (s - m) * (s - m)).sum::<f64>() * (n - 1) as f64 / n as f64;
    let se = math::sqrt(var);
    let v = full.v_hat;
    Ok(DecayFit { v_se: se, ci: (v - stats::Z_975 * se, v + stats::Z_975 * se), ..full })
}

/// Default time step and box radius of the two-point moment oracle.
pub const ORACLE_DT: f64 = 1e-4;
pub const ORACLE_RADIUS: usize = 20;

/// `E[m_t²]` for `σ(u) = u` from the two-point function
/// `M_t(x, y) = E[u_t(x)u_t(y)]`, which solves
/// `dM/dt = (G⊗I + I⊗G)M + λ²·1{x=y}M` on the box (absorbing outside),
/// integrated with classical RK4. Returns the values at each of `times`.
pub fn pam_second_moment_curve(
    step: &StepDistribution,
    lambda: f64,
    c0: f64,
    radius: usize,
    times: &[f64],
    dt: f64,
) -> Result<Vec<f64>, AnalysisError> {
    let d = step.dim();
    // the product walk on Z^{2d} jumping in either factor with probability 1/2
    let mut support = Vec::with_capacity(2 * step.support().len());
    for (y, p) in step.support() {
        let mut a = y.clone();
        a.extend(core::iter::repeat(0).take(d));
        let mut b = vec![0; d];
        b.extend(y.iter().copied());
        support.push((a, 0.5 * p));
        support.push((b, 0.5 * p));
    }
    // merge the stay term
    let stay: f64 = support.iter().filter(|(s, _)| s.iter().all(|&c| c == 0)).map(|(_, p)| p).sum();
    support.retain(|(s, _)| s.iter().any(|&c| c != 0));
    if stay > 0.0 {
        support.push((vec![0; 2 * d], stay));
    }
    let pair = StepDistribution::new(support, 2 * d)?;
    let grid = PaddedGrid::new(&pair, radius)?;
    let lam2 = lambda * lambda;

    let mut diag = Vec::new();
    let side = 2 * radius as i64 + 1;
    let sites = side.pow(d as u32);
    for s in 0..sites {
        let mut x = vec![0i64; d];
        let mut rem = s;
        for j in (0..d).rev() {
            x[j] = rem % side - radius as i64;
            rem /= side;
        }
        let mut xx = x.clone();
        xx.extend_from_slice(&x);
        diag.push(grid.padded_index(&xx).expect("diagonal is in the box"));
    }

    let rhs = |m: &[f64], out: &mut [f64]| {
        grid.apply(m, out);
        for v in out.iter_mut() {
            *v *= 2.0;
        }
        for &i in &diag {
            out[i] += lam2 * m[i];
        }
    };

    let mut m = grid.zeros();
    let origin = grid.padded_index(&vec![0; 2 * d]).expect("origin");
    m[origin] = c0 * c0;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (grid.zeros(), grid.zeros(), grid.zeros(), grid.zeros(), grid.zeros());
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|a, b| times[*a].partial_cmp(&times[*b]).expect("finite times"));
    let mut results = vec![0.0; times.len()];
    for &ti in &order {
        let target = times[ti];
        let steps = math::ceil((target - t) / dt - 1e-9).max(0.0) as usize;
        if steps > 0 {
            let h = (target - t) / steps as f64;
            for _ in 0..steps {
                rhs(&m, &mut k1);
                for i in 0..m.len() {
                    tmp[i] = m[i] + 0.5 * h * k1[i];
                }
                rhs(&tmp, &mut k2);
                for i in 0..m.len() {
                    tmp[i] = m[i] + 0.5 * h * k2[i];
                }
                rhs(&tmp, &mut k3);
                for i in 0..m.len() {
                    tmp[i] = m[i] + h * k3[i];
                }
                rhs(&tmp, &mut k4);
                for i in 0..m.len() {
                    m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            t = target;
        }
        results[ti] = grid.sum(&m);
    }
    out.extend(results);
    Ok(out)
}

/// `E[m_t²]` at a single time; see [`pam_second_moment_curve`].
pub fn pam_second_moment_oracle(
    model: &Model,
    lambda: f64,
    c0: f64,
    radius: usize,
    t: f64,
) -> Result<f64, AnalysisError> {
    if model.sigma.linear_slope() != Some(1.0) {
        return Err(AnalysisError::NotPam);
    }
    Ok(pam_second_moment_curve(&model.step, lambda, c0, radius, &[t], ORACLE_DT)?[0])
}

/// Phase-transition sweep over a `λ` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepResult {
    pub lambdas: Vec<f64>,
    pub replicas: usize,
    pub horizon: f64,
    pub threshold: f64,
    pub survival_fraction: Vec<f64>,
    pub survival_se: Vec<f64>,
    /// `Ê e^{−m_T}`.
    pub laplace: Vec<f64>,
    pub laplace_se: Vec<f64>,
    pub mean_mass: Vec<f64>,
    pub mean_mass_se: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub second_moment_se: Vec<f64>,
    /// Standard errors of the replica-paired differences between
    /// consecutive grid points (length `lambdas.len() − 1`).
    pub paired_survival_se: Vec<f64>,
    pub paired_laplace_se: Vec<f64>,
    pub lambda_c_hat: Option<f64>,
}

impl SweepResult {
    /// Builds the summary from final masses, `masses[replica][k]` for `λ_k`.
    pub fn from_final_masses(
        lambdas: &[f64],
        masses: &[Vec<f64>],
        threshold: f64,
        horizon: f64,
    ) -> Result<Self, AnalysisError> {
        if masses.is_empty() {
            return Err(AnalysisError::EmptyInput);
        }
        if lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AnalysisError::UnsortedGrid);
        }
        let n = masses.len();
        let k = lambdas.len();
        let col = |f: &dyn Fn(f64) -> f64, j: usize| -> Vec<f64> { masses.iter().map(|r| f(r[j])).collect() };
        let surv = |m: f64| if m > threshold { 1.0 } else { 0.0 };
        let lap = |m: f64| math::exp(-m);
        let mut res = SweepResult {
            lambdas: lambdas.to_vec(),
            replicas: n,
            horizon,
            threshold,
            survival_fraction: Vec::new(),
            survival_se: Vec::new(),
            laplace: Vec::new(),
            laplace_se: Vec::new(),
            mean_mass: Vec::new(),
            mean_mass_se: Vec::new(),
            second_moment: Vec::new(),
            second_moment_se: Vec::new(),
            paired_survival_se: Vec::new(),
            paired_laplace_se: Vec::new(),
            lambda_c_hat: None,
        };
        for j in 0..k {
            let s = col(&surv, j);
            res.survival_fraction.push(stats::mean(&s));
            res.survival_se.push(stats::standard_error(&s));
            let l = col(&lap, j);
            res.laplace.push(stats::mean(&l));
            res.laplace_se.push(stats::standard_error(&l));
            let m = col(&|m| m, j);
            res.mean_mass.push(stats::mean(&m));
            res.mean_mass_se.push(stats::standard_error(&m));
            let m2 = col(&|m| m * m, j);
            res.second_moment.push(stats::mean(&m2));
            res.second_moment_se.push(stats::standard_error(&m2));
        }
        for j in 0..k.saturating_sub(1) {
            let ds: Vec<f64> = masses.iter().map(|r| surv(r[j + 1]) - surv(r[j])).collect();
            res.paired_survival_se.push(stats::standard_error(&ds));
            let dl: Vec<f64> = masses.iter().map(|r| lap(r[j + 1]) - lap(r[j])).collect();
            res.paired_laplace_se.push(stats::standard_error(&dl));
        }
        res.lambda_c_hat = crossing(lambdas, &res.survival_fraction, n);
        Ok(res)
    }
}

/// `λ` where the logit of the survival fraction, interpolated linearly
/// between grid points, crosses 0.
fn crossing(lambdas: &[f64], surv: &[f64], n: usize) -> Option<f64> {
    let eps = 0.5 / n as f64;
    for j in 0..surv.len().saturating_sub(1) {
        if surv[j] >= 0.5 && surv[j + 1] < 0.5 {
            let a = stats::logit(surv[j], eps);
            let b = stats::logit(surv[j + 1], eps);
            if a == b {
                return Some(lambdas[j]);
            }
            return Some(lambdas[j] + (0.0 - a) * (lambdas[j + 1] - lambdas[j]) / (b - a));
        }
    }
    None
}

/// Runs `params.replicas` paired replicas (all `λ` share each replica's
/// noise) and summarizes the final masses. `params.lambda` is ignored.
pub fn survival_sweep(
    model: &Model,
    lambdas: &[f64],
    params: &SimParams,
    threshold: f64,
) -> Result<SweepResult, AnalysisError> {
    if !(threshold > 0.0 && threshold < params.c0) {
        return Err(AnalysisError::InvalidThreshold { threshold });
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::UnsortedGrid);
    }
    let mut masses = Vec::with_capacity(params.replicas);
    for r in 0..params.replicas as u64 {
        let out = simulate_coupled(params, model, lambdas, r)?;
        masses.push(out.iter().map(|o| o.trajectory.final_mass()).collect());
    }
    SweepResult::from_final_masses(lambdas, &masses, threshold, params.horizon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonotonicityViolation {
    pub index: usize,
    pub difference: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonotonicityReport {
    pub pass: bool,
    pub violations: Vec<MonotonicityViolation>,
    /// Largest `−difference/se` over consecutive steps (0 if none decrease).
    pub max_z: f64,
}

/// Band width, in standard errors, for the monotonicity checks.
pub const MONOTONICITY_SE_BAND: f64 = 3.0;

fn monotone_report(values: &[f64], paired: &[f64], marginal: &[f64], sign: f64) -> MonotonicityReport {
    let mut rep = MonotonicityReport { pass: true, violations: Vec::new(), max_z: 0.0 };
    for j in 0..values.len() - 1 {
        // sign = +1 checks nondecreasing, −1 nonincreasing
        let diff = sign * (values[j + 1] - values[j]);
        let se = match paired.get(j) {
            Some(&s) if s > 0.0 => s,
            _ => math::sqrt(marginal[j].powi(2) + marginal[j + 1].powi(2)),
        };
        let z = if se > 0.0 {
            -diff / se
        } else if diff < 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if z > rep.max_z {
            rep.max_z = z;
        }
        if z > MONOTONICITY_SE_BAND {
            rep.pass = false;
            rep.violations.push(MonotonicityViolation { index: j, difference: values[j + 1] - values[j], se });
        }
    }
    rep
}

/// `Ê e^{−m_T(λ)}` nondecreasing in `λ` up to 3 paired standard errors.
pub fn laplace_monotonicity(sweep: &SweepResult) -> Result<MonotonicityReport, AnalysisError> {
    if sweep.lambdas.len() < 3 {
        return Err(AnalysisError::TooFewLambdas(sweep.lambdas.len()));
    }
    Ok(monotone_report(&sweep.laplace, &sweep.paired_laplace_se, &sweep.laplace_se, 1.0))
}

/// Survival fraction nonincreasing in `λ` up to 3 paired standard errors.
pub fn survival_monotonicity(sweep: &SweepResult) -> Result<MonotonicityReport, AnalysisError> {
    if sweep.lambdas.len() < 3 {
        return Err(AnalysisError::TooFewLambdas(sweep.lambdas.len()));
    }
    Ok(monotone_report(&sweep.survival_fraction, &sweep.paired_survival_se, &sweep.survival_se, -1.0))
}

/// `c_0^{1/(1−t)}[e^{−λ²Lip²/2} − e^{−c}]^{t/(t−1)}`, for `t > 1`.
pub fn lower_bound_value(c0: f64, lambda: f64, lip: f64, c: f64, t: f64) -> f64 {
    let base = math::exp(-0.5 * lambda * lambda * lip * lip) - math::exp(-c);
    math::powf(c0, 1.0 / (1.0 - t)) * math::powf(base, t / (t - 1.0))
}

/// `e^{−λ²Lip²/2} − e^{−c}`, the `t → ∞` limit of [`lower_bound_value`].
pub fn lower_bound_limit(lambda: f64, lip: f64, c: f64) -> f64 {
    math::exp(-0.5 * lambda * lambda * lip * lip) - math::exp(-c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LowerBoundRow {
    pub t: f64,
    /// `P̂{m_t ≥ e^{−ct}}`.
    pub empirical: f64,
    pub se: f64,
    pub bound: f64,
    /// `empirical + 3·se − bound`.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LowerBoundReport {
    pub c: f64,
    pub limit: f64,
    pub rows: Vec<LowerBoundRow>,
    pub pass: bool,
}

/// Compares `P̂{m_t ≥ e^{−ct}}` with the lower bound at each grid time `t > 1`
/// (all grid times when `t_grid` is `None`).
pub fn lower_bound_check(
    trajectories: &[MassTrajectory],
    lambda: f64,
    lip: f64,
    c: f64,
    t_grid: Option<&[f64]>,
) -> Result<LowerBoundReport, AnalysisError> {
    let min = 0.5 * lambda * lambda * lip * lip;
    if !(c > min) {
        return Err(AnalysisError::InvalidC { c, min });
    }
    let times = shared_grid(trajectories)?;
    let idx = grid_indices(times, t_grid)?;
    let c0 = trajectories[0].mass[0];
    let mut rows = Vec::new();
    for &i in &idx {
        let t = times[i];
        if t <= 1.0 {
            continue;
        }
        let level = math::exp(-c * t);
        let hits: Vec<f64> = trajectories.iter().map(|tr| if tr.mass[i] >= level { 1.0 } else { 0.0 }).collect();
        let p = stats::mean(&hits);
        let se = stats::standard_error(&hits);
        let bound = lower_bound_value(c0, lambda, lip, c, t);
        let margin = p + 3.0 * se - bound;
        rows.push(LowerBoundRow { t, empirical: p, se, bound, margin, pass: margin >= 0.0 });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(LowerBoundReport { c, limit: lower_bound_limit(lambda, lip, c), rows, pass })
}

/// Fields at a common time, one per replica.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub time: f64,
    pub fields: Vec<LatticeField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LocalDecayRow {
    pub c: f64,
    pub pass: bool,
    /// Time and site maximizing `p̂ − 3·se − c·e^{−t/c}`.
    pub worst_time: f64,
    pub worst_site: Vec<i64>,
    pub worst_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LocalDecayVerdict {
    Pass,
    Fail,
    NoData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LocalDecayReport {
    pub verdict: LocalDecayVerdict,
    /// Smallest passing `c`.
    pub best_c: Option<f64>,
    pub rows: Vec<LocalDecayRow>,
}

/// For every `c`, tests `sup_x P̂{u_t(x) > e^{−t/c}} − 3·se ≤ c·e^{−t/c}` at
/// every snapshot time.
pub fn local_decay_check(snapshots: &[SnapshotSet], c_grid: &[f64]) -> LocalDecayReport {
    if snapshots.iter().all(|s| s.fields.is_empty()) || c_grid.is_empty() {
        return LocalDecayReport { verdict: LocalDecayVerdict::NoData, best_c: None, rows: Vec::new() };
    }
    let mut rows = Vec::with_capacity(c_grid.len());
    for &c in c_grid {
        let mut row = LocalDecayRow { c, pass: true, worst_time: 0.0, worst_site: Vec::new(), worst_excess: f64::NEG_INFINITY };
        for set in snapshots.iter().filter(|s| !s.fields.is_empty()) {
            let level = math::exp(-set.time / c);
            let bound = c * level;
            let n = set.fields.len() as f64;
            let first = &set.fields[0];
            for idx in 0..first.values().len() {
                let hits = set.fields.iter().filter(|f| f.values()[idx] > level).count() as f64;
                let p = hits / n;
                let se = math::sqrt(p * (1.0 - p) / n);
                let excess = p - 3.0 * se - bound;
                if excess > row.worst_excess {
                    row.worst_excess = excess;
                    row.worst_time = set.time;
                    row.worst_site = first.site_of(idx);
                }
            }
        }
        row.pass = row.worst_excess <= 0.0;
        rows.push(row);
    }
    let best_c = rows.iter().filter(|r| r.pass).map(|r| r.c).fold(None, |acc: Option<f64>, c| {
        Some(acc.map_or(c, |a| a.min(c)))
    });
    let verdict = if best_c.is_some() { LocalDecayVerdict::Pass } else { LocalDecayVerdict::Fail };
    LocalDecayReport { verdict, best_c, rows }
}
