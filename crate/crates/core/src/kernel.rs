//! Transition probabilities `p_t(x) = P{X_t = x}` of the compound Poisson
//! walk, and certification of the Gaussian tail bound
//! `P{‖X_t‖ > K} ≤ 2d·exp(−cK²/t)` for `K ∈ [0, qt]`.

use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::lattice::PaddedGrid;
use crate::math;
use crate::model::{LatticeField, StepDistribution};

/// Poisson series truncation: terms are kept until the remaining tail
/// probability is at most this.
pub const POISSON_TAIL: f64 = 1e-14;

/// Bisection interval and iteration count for the tail constant `c`.
pub const HOEFFDING_C_MIN: f64 = 1e-6;
pub const HOEFFDING_C_MAX: f64 = 10.0;
pub const HOEFFDING_ITERATIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionKernel {
    pub time: f64,
    /// `p_t` restricted to the box.
    pub probabilities: LatticeField,
    /// Upper bound on the probability mass not represented in the box: the
    /// Poisson tail beyond the last kept term plus mass pushed out of the box
    /// by the truncated convolutions.
    pub truncation_error: f64,
    /// Number of Poisson terms kept (`n*`).
    pub terms: usize,
}

impl TransitionKernel {
    pub fn radius(&self) -> usize {
        self.probabilities.radius()
    }

    pub fn get(&self, site: &[i64]) -> f64 {
        self.probabilities.get(site)
    }

    /// `Σ_{‖x‖_∞ ≤ k} p_t(x)`.
    pub fn mass_within(&self, k: usize) -> f64 {
        self.shell_masses().iter().take(k + 1).sum()
    }

    /// Mass on each sup-norm shell `{‖x‖_∞ = r}`, `r = 0..=radius`.
    pub fn shell_masses(&self) -> Vec<f64> {
        let mut shells = vec![0.0; self.radius() + 1];
        for (site, p) in self.probabilities.iter() {
            let r = site.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0);
            shells[r] += p;
        }
        shells
    }

    /// `Σ_{‖x‖_∞ > k} p_t(x)` over the box plus the truncation error: an
    /// upper bound on `P{‖X_t‖_∞ > k}` that does not cancel against 1.
    pub fn tail_above(&self, k: usize) -> f64 {
        let shells = self.shell_masses();
        let inside_tail: f64 = shells.iter().skip(k + 1).rev().sum();
        inside_tail + self.truncation_error
    }

    /// Mean vector `E X_t` computed from the box.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.probabilities.dim();
        let mut m = vec![0.0; d];
        for (site, p) in self.probabilities.iter() {
            for j in 0..d {
                m[j] += site[j] as f64 * p;
            }
        }
        m
    }

    /// Coordinate variances computed from the box.
    pub fn coordinate_variance(&self) -> Vec<f64> {
        let d = self.probabilities.dim();
        let mean = self.mean();
        let mut v = vec![0.0; d];
        for (site, p) in self.probabilities.iter() {
            for j in 0..d {
                let c = site[j] as f64 - mean[j];
                v[j] += c * c * p;
            }
        }
        v
    }
}

/// Poisson(t) weights `w_0..=w_n*` with the tail mass beyond `n*`.
fn poisson_weights(t: f64, tail_tol: f64) -> (Vec<f64>, f64) {
    if t == 0.0 {
        return (vec![1.0], 0.0);
    }
    // terms beyond this are far below any representable tail
    let n_max = (t + 40.0 * math::sqrt(t) + 60.0) as usize;
    let lt = math::ln(t);
    let w: Vec<f64> = (0..=n_max)
        .map(|n| math::exp(-t + n as f64 * lt - math::lgamma(n as f64 + 1.0)))
        .collect();
    let mut suffix = vec![0.0; n_max + 2];
    for n in (0..=n_max).rev() {
        suffix[n] = suffix[n + 1] + w[n];
    }
    let n_star = (0..=n_max).find(|&n| suffix[n + 1] <= tail_tol).unwrap_or(n_max);
    (w[..=n_star].to_vec(), suffix[n_star + 1])
}

/// `p_t = Σ_n e^{−t} tⁿ/n! τ^{*n}` on the box of the given radius.
pub fn transition_kernel(step: &StepDistribution, t: f64, radius: usize) -> TransitionKernel {
    transition_kernel_with_tail(step, t, radius, POISSON_TAIL)
}

/// As [`transition_kernel`], with an explicit Poisson truncation level.
pub fn transition_kernel_with_tail(
    step: &StepDistribution,
    t: f64,
    radius: usize,
    poisson_tail: f64,
) -> TransitionKernel {
    assert!(t >= 0.0 && t.is_finite(), "time must be finite and nonnegative");
    let radius = radius.max(step.range());
    let grid = PaddedGrid::new(step, radius).expect("radius is at least the step range");
    let (weights, poisson_rest) = poisson_weights(t, poisson_tail);

    let origin = grid.padded_index(&vec![0; step.dim()]).expect("origin in box");
    let mut current = grid.zeros();
    current[origin] = 1.0;
    let mut next = grid.zeros();
    let mut acc = grid.zeros();
    let mut lost = 0.0;
    for (n, &w) in weights.iter().enumerate() {
        if n > 0 {
            grid.convolve(&current, &mut next);
            core::mem::swap(&mut current, &mut next);
        }
        for &start in &grid.line_starts {
            for i in start..start + grid.side {
                acc[i] += w * current[i];
            }
        }
        // mass of τ^{*n} that left the box
        lost += w * (1.0 - grid.sum(&current)).max(0.0);
    }
    let values = grid.unpack(&acc);
    TransitionKernel {
        time: t,
        probabilities: LatticeField::from_values(step.dim(), radius, values).expect("finite kernel"),
        truncation_error: poisson_rest + lost,
        terms: weights.len(),
    }
}

/// Radius at which the box truncation of `p_t` is negligible next to the
/// Poisson truncation, for a tail query at level `k`.
pub fn exact_radius(step: &StepDistribution, t: f64, k: usize) -> usize {
    let sd = math::sqrt(t * step.max_coordinate_variance());
    k + step.range() * (8 + math::ceil(6.0 * sd) as usize)
}

/// `P{‖X_t‖_∞ > K}`, as an upper bound accurate to the kernel's truncation error.
pub fn tail_probability(step: &StepDistribution, t: f64, k: f64) -> f64 {
    tail_probability_with_error(step, t, k).0
}

/// `P{‖X_t‖_∞ > K}` together with the truncation error included in it.
pub fn tail_probability_with_error(step: &StepDistribution, t: f64, k: f64) -> (f64, f64) {
    assert!(k >= 0.0, "K must be nonnegative");
    let kk = math::floor(k) as usize;
    let kernel = transition_kernel(step, t, exact_radius(step, t, kk));
    (kernel.tail_above(kk).min(1.0), kernel.truncation_error)
}

/// Grid of `K` values examined at each `t` for the tail bound.
#[derive(Debug, Clone, PartialEq)]
pub enum KGrid {
    /// Every integer in `[0, qt]`; `P{‖X_t‖ > K}` is constant on `[k, k+1)`.
    Integers,
    /// `n` evenly spaced points on `[0, qt]`, endpoints included.
    Uniform(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub t: f64,
    pub k: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HoeffdingReport {
    /// Largest `c` in the search interval for which every point satisfies the
    /// bound; `None` when not even the smallest `c` works.
    pub fitted_c: Option<f64>,
    /// Points violating the bound at the smallest `c` of the search interval.
    pub violations: Vec<TailPoint>,
    pub points: Vec<TailPoint>,
    pub dim: usize,
}

fn bound_holds(points: &[TailPoint], dim: usize, c: f64) -> bool {
    points
        .iter()
        .all(|p| p.probability <= 2.0 * dim as f64 * math::exp(-c * p.k * p.k / p.t))
}

/// Finds the largest `c` with `P{‖X_t‖ > K} ≤ 2d·exp(−cK²/t)` at every grid
/// point `t ∈ t_grid`, `K ∈ [0, qt]`, by bisection on
/// `[HOEFFDING_C_MIN, HOEFFDING_C_MAX]`.
pub fn check_hoeffding_bound(
    step: &StepDistribution,
    q: f64,
    t_grid: &[f64],
    k_grid: &KGrid,
) -> HoeffdingReport {
    assert!(q > 0.0, "q must be positive");
    let dim = step.dim();
    let mut points = Vec::new();
    for &t in t_grid {
        assert!(t >= 1.0, "t grid must lie in [1, ∞)");
        let kmax = q * t;
        let ks: Vec<f64> = match k_grid {
            KGrid::Integers => (0..=math::floor(kmax) as usize).map(|k| k as f64).collect(),
            KGrid::Uniform(n) => {
                let n = (*n).max(2);
                (0..n).map(|i| kmax * i as f64 / (n - 1) as f64).collect()
            }
        };
        let kernel = transition_kernel(step, t, exact_radius(step, t, math::ceil(kmax) as usize));
        for k in ks {
            let probability = kernel.tail_above(math::floor(k) as usize).min(1.0);
            points.push(TailPoint { t, k, probability });
        }
    }

    if !bound_holds(&points, dim, HOEFFDING_C_MIN) {
        let violations = points
            .iter()
            .copied()
            .filter(|p| p.probability > 2.0 * dim as f64 * math::exp(-HOEFFDING_C_MIN * p.k * p.k / p.t))
            .collect();
        return HoeffdingReport { fitted_c: None, violations, points, dim };
    }
    let fitted = if bound_holds(&points, dim, HOEFFDING_C_MAX) {
        HOEFFDING_C_MAX
    } else {
        let (mut lo, mut hi) = (HOEFFDING_C_MIN, HOEFFDING_C_MAX);
        for _ in 0..HOEFFDING_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if bound_holds(&points, dim, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    HoeffdingReport { fitted_c: Some(fitted), violations: Vec::new(), points, dim }
}
