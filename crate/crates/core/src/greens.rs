//! The collision local time `Υ(0) = ∫_0^∞ P{X_t = X'_t} dt` of two
//! independent copies of the walk, and the subcritical bounds built on it.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::model::{Nonlinearity, StepDistribution};
use crate::quad::gauss_legendre;
use crate::rng::replica_rng;
use crate::stats;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GreensError {
    #[error("the symmetrized walk is recurrent in dimension {dim}; Υ(0) = ∞")]
    RecurrentWalk { dim: usize },
    #[error("the support generates a sublattice of index {index}; 1 − Re τ̂ has zeros away from 0")]
    ImprimitiveSupport { index: u64 },
    #[error("ε = λ²Lip²Υ(0) = {epsilon} is outside (0, 1)")]
    EpsilonOutOfRange { epsilon: f64 },
    #[error("second moment {second_moment} is below c0² = {c0_squared}")]
    InvalidMoment { second_moment: f64, c0_squared: f64 },
}

/// Radius of the excised ball around `θ = 0`, in whitened coordinates.
pub const EXCISION_RADIUS: f64 = 1e-3;
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
/// Upper bound on integrand evaluations in the periodic part at any level.
pub const MAX_GRID_POINTS: usize = 20_000_000;
pub const MC_HORIZON: f64 = 1e3;
pub const MC_REPLICAS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GreensConfig {
    pub excision_radius: f64,
    pub tolerance: f64,
    pub max_grid_points: usize,
    pub mc_horizon: f64,
    pub mc_replicas: usize,
    pub seed: u64,
}

impl Default for GreensConfig {
    fn default() -> Self {
        Self {
            excision_radius: EXCISION_RADIUS,
            tolerance: QUADRATURE_TOLERANCE,
            max_grid_points: MAX_GRID_POINTS,
            mc_horizon: MC_HORIZON,
            mc_replicas: MC_REPLICAS,
            seed: 0,
        }
    }
}

/// One refinement level of the quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuadratureLevel {
    pub level: usize,
    pub grid_points: usize,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub periodic_part: f64,
    pub ball_part: f64,
    pub excised_part: f64,
    pub value: f64,
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub trace: Vec<QuadratureLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonteCarloResult {
    pub estimate: f64,
    pub se: f64,
    /// Part of the estimate added for the time after the horizon.
    pub tail_correction: f64,
    /// Probability that the difference walk ever revisits 0, with the same
    /// tail extrapolation.
    pub return_probability: f64,
    pub return_probability_se: f64,
    pub replicas: usize,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GreensReport {
    pub upsilon_zero: f64,
    /// `r = 1 − 1/(2Υ(0))`.
    pub return_probability: f64,
    pub quadrature_error: f64,
    pub mc_estimate: f64,
    pub mc_se: f64,
    pub monte_carlo: MonteCarloResult,
    pub trace: Vec<QuadratureLevel>,
}

/// Quadrature value of `Υ(0)` with its Monte Carlo cross-check.
pub fn upsilon_zero(step: &StepDistribution) -> Result<GreensReport, GreensError> {
    upsilon_zero_with(step, &GreensConfig::default())
}

pub fn upsilon_zero_with(step: &StepDistribution, cfg: &GreensConfig) -> Result<GreensReport, GreensError> {
    let quad = upsilon_quadrature(step, cfg)?;
    let walk = CollisionWalk::new(step);
    let mc = walk.estimate(cfg.mc_horizon, cfg.mc_replicas, cfg.seed);
    Ok(report_from(quad, mc))
}

/// Assembles a report from separately computed parts.
pub fn report_from(quad: QuadratureResult, mc: MonteCarloResult) -> GreensReport {
    GreensReport {
        upsilon_zero: quad.value,
        return_probability: return_probability(quad.value),
        quadrature_error: quad.error,
        mc_estimate: mc.estimate,
        mc_se: mc.se,
        monte_carlo: mc,
        trace: quad.trace,
    }
}

/// `r = 1 − 1/(2Υ)`.
pub fn return_probability(upsilon: f64) -> f64 {
    1.0 - 1.0 / (2.0 * upsilon)
}

/// Index of the lattice spanned by the support in `Z^d` (1 when it is all of `Z^d`).
fn lattice_index(step: &StepDistribution) -> u64 {
    let d = step.dim();
    let mut rows: Vec<Vec<i64>> = step.support().iter().map(|(x, _)| x.clone()).filter(|x| x.iter().any(|&c| c != 0)).collect();
    // integer row reduction to echelon form
    let mut det: u64 = 1;
    let mut top = 0;
    for col in 0..d {
        loop {
            let mut pivot: Option<usize> = None;
            for r in top..rows.len() {
                if rows[r][col] != 0 && pivot.map_or(true, |p| rows[r][col].abs() < rows[p][col].abs()) {
                    pivot = Some(r);
                }
            }
            let Some(p) = pivot else { return 0 };
            rows.swap(top, p);
            let mut done = true;
            for r in top + 1..rows.len() {
                let q = rows[r][col] / rows[top][col];
                if q != 0 {
                    let pr = rows[top].clone();
                    for (a, b) in rows[r].iter_mut().zip(&pr) {
                        *a -= q * b;
                    }
                }
                if rows[r][col] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        det *= rows[top][col].unsigned_abs();
        top += 1;
    }
    det
}

/// Cholesky factor of a symmetric positive definite `d×d` row-major matrix.
fn cholesky(a: &[f64], d: usize) -> Vec<f64> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = if i == j { math::sqrt(s) } else { s / l[j * d + j] };
        }
    }
    l
}

/// Solves `Lᵀ θ = w` for lower-triangular `L`.
fn solve_lt(l: &[f64], d: usize, w: &[f64], theta: &mut [f64]) {
    for i in (0..d).rev() {
        let mut s = w[i];
        for k in i + 1..d {
            s -= l[k * d + i] * theta[k];
        }
        theta[i] = s / l[i * d + i];
    }
}

/// `(Σ^{-1})_{jj}` for each `j`.
fn inverse_diagonal(l: &[f64], d: usize) -> Vec<f64> {
    // (Σ^{-1})_jj = |L^{-1} e_j|²
    let mut out = vec![0.0; d];
    for j in 0..d {
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = if i == j { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * d + k] * y[k];
            }
            y[i] = s / l[i * d + i];
        }
        out[j] = y.iter().map(|v| v * v).sum();
    }
    out
}

/// Smooth step: 1 on `[0, a]`, 0 on `[b, ∞)`, `C^∞` in between.
fn cutoff(s: f64, a: f64, b: f64) -> f64 {
    if s <= a {
        return 1.0;
    }
    if s >= b {
        return 0.0;
    }
    let x = (b - s) / (b - a);
    let f = |x: f64| if x <= 0.0 { 0.0 } else { math::exp(-1.0 / x) };
    let fx = f(x);
    fx / (fx + f(1.0 - x))
}

fn unit_sphere_area(d: usize) -> f64 {
    2.0 * math::powf(PI, d as f64 / 2.0) / math::exp(math::lgamma(d as f64 / 2.0))
}

/// Directions and weights of a product rule on `S^{d−1}` in hyperspherical
/// angles: Gauss–Legendre in each polar angle, trapezoid in the azimuth.
fn sphere_rule(d: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    let (polar, polar_w) = gauss_legendre(n, 0.0, PI);
    let az = 2 * n;
    let mut rule = Vec::new();
    let polar_count = d - 2;
    let total = n.pow(polar_count as u32);
    for code in 0..total {
        let mut rem = code;
        let mut angles = Vec::with_capacity(polar_count);
        let mut weight = 1.0;
        for k in 0..polar_count {
            let i = rem % n;
            rem /= n;
            let phi = polar[i];
            angles.push(phi);
            weight *= polar_w[i] * math::powf(math::sin(phi), (d - 2 - k) as f64);
        }
        for a in 0..az {
            let psi = 2.0 * PI * a as f64 / az as f64;
            let mut w = vec![0.0; d];
            let mut prod = 1.0;
            for (k, &phi) in angles.iter().enumerate() {
                w[k] = prod * math::cos(phi);
                prod *= math::sin(phi);
            }
            w[d - 2] = prod * math::cos(psi);
            w[d - 1] = prod * math::sin(psi);
            rule.push((w, weight * 2.0 * PI / az as f64));
        }
    }
    rule
}

struct Symbol<'a> {
    step: &'a StepDistribution,
}

impl Symbol<'_> {
    /// `1/(2(1 − Re τ̂(θ)))`.
    fn h(&self, theta: &[f64]) -> f64 {
        1.0 / (2.0 * (1.0 - self.step.characteristic_re(theta)))
    }
}

/// `Υ(0) = (2π)^{−d} ∫_{[−π,π]^d} [2(1 − Re τ̂(θ))]^{−1} dθ`.
///
/// The integrand is split by a smooth cutoff in the whitened variable
/// `w = Lᵀθ` (`Σ = LLᵀ` the step covariance). The part away from the origin
/// is periodic and smooth and is integrated by the trapezoid rule on the
/// torus. The part near the origin is integrated in polar coordinates in
/// `w`, where `|w|²·h` is smooth; the ball `|w| < ρ` takes the leading term
/// `h ≈ 1/|w|²`. All node counts double at each level until successive
/// values agree to the tolerance.
pub fn upsilon_quadrature(step: &StepDistribution, cfg: &GreensConfig) -> Result<QuadratureResult, GreensError> {
    let d = step.dim();
    if d <= 2 {
        return Err(GreensError::RecurrentWalk { dim: d });
    }
    let index = lattice_index(step);
    if index != 1 {
        return Err(GreensError::ImprimitiveSupport { index });
    }
    let sigma = step.covariance();
    let l = cholesky(&sigma, d);
    let det_sqrt: f64 = (0..d).map(|i| l[i * d + i]).product();
    let inv_diag = inverse_diagonal(&l, d);
    let max_inv = inv_diag.iter().fold(0.0f64, |a, &b| a.max(b));
    let outer_r = 0.9 * PI / math::sqrt(max_inv);
    let inner_r = 0.5 * outer_r;
    let rho = cfg.excision_radius;
    let sym = Symbol { step };
    let norm = math::powf(2.0 * PI, -(d as f64));

    let excised = unit_sphere_area(d) * math::powf(rho, d as f64 - 2.0) / (d as f64 - 2.0) / det_sqrt;
    let mut trace: Vec<QuadratureLevel> = Vec::new();
    let mut theta = vec![0.0; d];
    let mut w = vec![0.0; d];
    for level in 0.. {
        let n_grid = 16usize << level;
        let grid_points = n_grid.pow(d as u32);
        let n_rad = 16usize << level;
        let n_ang = 8usize << level;
        if level > 0 && grid_points > cfg.max_grid_points {
            break;
        }

        // periodic part
        let hstep = 2.0 * PI / n_grid as f64;
        let mut periodic = 0.0;
        for code in 0..grid_points {
            let mut rem = code;
            for j in 0..d {
                theta[j] = -PI + (0.5 + (rem % n_grid) as f64) * hstep;
                rem /= n_grid;
            }
            // |Lᵀθ|
            let mut s2 = 0.0;
            for i in 0..d {
                let mut v = 0.0;
                for k in i..d {
                    v += l[k * d + i] * theta[k];
                }
                s2 += v * v;
            }
            let chi = cutoff(math::sqrt(s2), inner_r, outer_r);
            if chi < 1.0 {
                periodic += (1.0 - chi) * sym.h(&theta);
            }
        }
        periodic *= math::powf(hstep, d as f64);

        // ball part in whitened polar coordinates
        let (radial, radial_w) = gauss_legendre(n_rad, rho, outer_r);
        let sphere = sphere_rule(d, n_ang);
        let mut ball = 0.0;
        for (&s, &ws) in radial.iter().zip(&radial_w) {
            let chi = cutoff(s, inner_r, outer_r);
            if chi == 0.0 {
                continue;
            }
            let mut shell = 0.0;
            for (dir, wd) in &sphere {
                for j in 0..d {
                    w[j] = s * dir[j];
                }
                solve_lt(&l, d, &w, &mut theta);
                shell += wd * sym.h(&theta);
            }
            ball += ws * chi * math::powf(s, d as f64 - 1.0) * shell;
        }
        ball /= det_sqrt;

        let value = norm * (periodic + ball + excised);
        let change = trace.last().map_or(f64::INFINITY, |p| (value - p.value).abs());
        trace.push(QuadratureLevel {
            level,
            grid_points,
            radial_nodes: n_rad,
            angular_nodes: sphere.len(),
            periodic_part: norm * periodic,
            ball_part: norm * ball,
            excised_part: norm * excised,
            value,
            change,
        });
        if level >= 2 && change <= cfg.tolerance {
            break;
        }
    }
    let last = trace.last().expect("at least one level");
    // leading-order excision error is O(ρ^d) relative to the O(ρ^{d−2}) term
    let excision_err = norm * excised * rho * rho;
    Ok(QuadratureResult { value: last.value, error: last.change + excision_err, trace })
}

/// The difference walk `Z = X − X'`: jumps at rate 2 with law `(τ + τ̃)/2`.
#[derive(Debug, Clone)]
pub struct CollisionWalk {
    dim: usize,
    jumps: Vec<Vec<i64>>,
    cumulative: Vec<f64>,
}

/// Per-replica statistics of the difference walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CollisionSample {
    /// Conditional expectation of the time at 0 up to `T`, given the jump chain.
    pub local_time: f64,
    /// Same, up to `T/10`.
    pub local_time_early: f64,
    pub returned: bool,
    pub returned_early: bool,
}

impl CollisionWalk {
    pub fn new(step: &StepDistribution) -> Self {
        let mut jumps = Vec::new();
        let mut probs = Vec::new();
        for (x, p) in step.support() {
            jumps.push(x.clone());
            probs.push(0.5 * p);
            jumps.push(x.iter().map(|c| -c).collect());
            probs.push(0.5 * p);
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in probs {
            acc += p;
            cumulative.push(acc);
        }
        Self { dim: step.dim(), jumps, cumulative }
    }

    /// One replica of the walk up to `horizon`. Every epoch `s` spent at 0
    /// contributes `E[min(Exp(2), T − s)] = (1 − e^{−2(T−s)})/2`.
    pub fn sample(&self, horizon: f64, seed: u64, replica: u64) -> CollisionSample {
        let mut rng = replica_rng(seed, replica);
        let early = horizon / 10.0;
        let credit = |s: f64, t: f64| if s < t { -0.5 * math::expm1(-2.0 * (t - s)) } else { 0.0 };
        let mut z = vec![0i64; self.dim];
        let mut s = 0.0;
        let mut out = CollisionSample {
            local_time: credit(0.0, horizon),
            local_time_early: credit(0.0, early),
            returned: false,
            returned_early: false,
        };
        let total = *self.cumulative.last().expect("nonempty");
        loop {
            let e: f64 = rng.sample(Exp1);
            s += 0.5 * e;
            if s >= horizon {
                break;
            }
            let u: f64 = rng.random::<f64>() * total;
            let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.jumps.len() - 1);
            for (a, b) in z.iter_mut().zip(&self.jumps[k]) {
                *a += b;
            }
            if z.iter().all(|&c| c == 0) {
                out.returned = true;
                out.local_time += credit(s, horizon);
                if s < early {
                    out.returned_early = true;
                    out.local_time_early += credit(s, early);
                }
            }
        }
        out
    }

    /// Geometric ratio between successive decades of the local-time tail,
    /// `10^{1−d/2}`.
    pub fn decade_ratio(&self) -> f64 {
        math::powf(10.0, 1.0 - self.dim as f64 / 2.0)
    }

    /// Combines per-replica samples, extrapolating the tail beyond the horizon
    /// geometrically from the last decade.
    pub fn combine(&self, samples: &[CollisionSample], horizon: f64) -> MonteCarloResult {
        let q = self.decade_ratio();
        let factor = q / (1.0 - q);
        let est: Vec<f64> = samples
            .iter()
            .map(|s| s.local_time + factor * (s.local_time - s.local_time_early))
            .collect();
        let tail: Vec<f64> = samples.iter().map(|s| factor * (s.local_time - s.local_time_early)).collect();
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        let ret: Vec<f64> = samples
            .iter()
            .map(|s| ind(s.returned) + factor * (ind(s.returned) - ind(s.returned_early)))
            .collect();
        MonteCarloResult {
            estimate: stats::mean(&est),
            se: stats::standard_error(&est),
            tail_correction: stats::mean(&tail),
            return_probability: stats::mean(&ret),
            return_probability_se: stats::standard_error(&ret),
            replicas: samples.len(),
            horizon,
        }
    }

    pub fn estimate(&self, horizon: f64, replicas: usize, seed: u64) -> MonteCarloResult {
        let samples: Vec<CollisionSample> = (0..replicas as u64).map(|r| self.sample(horizon, seed, r)).collect();
        self.combine(&samples, horizon)
    }
}

/// `1/(Lip_σ·√Υ(0))`, a lower bound on `λ_c`.
pub fn lambda_lower_bound(sigma: &Nonlinearity, report: &GreensReport) -> f64 {
    lambda_lower_bound_from(sigma.lip(), report.upsilon_zero)
}

pub fn lambda_lower_bound_from(lip: f64, upsilon: f64) -> f64 {
    1.0 / (lip * math::sqrt(upsilon))
}

/// `2c_0²(1 + ε)/(1 − ε)` with `ε = λ²Lip²Υ(0)`.
pub fn second_moment_bound(lambda: f64, sigma: &Nonlinearity, report: &GreensReport, c0: f64) -> Result<f64, GreensError> {
    second_moment_bound_from(lambda, sigma.lip(), report.upsilon_zero, c0)
}

pub fn second_moment_bound_from(lambda: f64, lip: f64, upsilon: f64, c0: f64) -> Result<f64, GreensError> {
    let eps = lambda * lambda * lip * lip * upsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(GreensError::EpsilonOutOfRange { epsilon: eps });
    }
    Ok(2.0 * c0 * c0 * (1.0 + eps) / (1.0 - eps))
}

/// `c_0²/(4·E W²)`.
pub fn paley_zygmund_floor(c0: f64, second_moment: f64) -> Result<f64, GreensError> {
    if second_moment < c0 * c0 {
        return Err(GreensError::InvalidMoment { second_moment, c0_squared: c0 * c0 });
    }
    Ok(c0 * c0 / (4.0 * second_moment))
}
