//! The lattice model: jump law `τ`, its generator `G`, and the nonlinearity `σ`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::lattice::PaddedGrid;
use crate::math;

/// Absolute tolerance used for the normalization and mean-zero checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Half-width and resolution of the grid on which `σ` constants are certified.
pub const SIGMA_GRID_HALF_WIDTH: f64 = 1e3;
pub const SIGMA_GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("step distribution is empty")]
    Empty,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("site {index} has {found} coordinates, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("site {index} appears more than once")]
    DuplicateSite { index: usize },
    #[error("probability {value} at site {index} is outside (0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("mean of coordinate {coordinate} is {mean}, not 0")]
    NonzeroMean { coordinate: usize, mean: f64 },
    #[error("support spans {rank} dimensions, expected {dim}")]
    DegenerateSupport { rank: usize, dim: usize },
    #[error("walk never moves (τ(0) = {stay})")]
    SelfLoopOnly { stay: f64 },
    #[error("box radius {radius} is smaller than the step range {range}")]
    BoxTooSmall { radius: usize, range: usize },
    #[error("field has {found} values, box needs {expected}")]
    FieldSize { expected: usize, found: usize },
    #[error("field value {value} at index {index} is not a finite number")]
    NonFinite { index: usize, value: f64 },
    #[error("σ(0) = {value}, must be 0")]
    SigmaNonzeroAtOrigin { value: f64 },
    #[error("constants must satisfy 0 < lower ≤ lip (got lower = {lower}, lip = {lip})")]
    SigmaConstants { lower: f64, lip: f64 },
    #[error("|σ({z})| = {value} is below lower·|z|")]
    SigmaBelowLower { z: f64, value: f64 },
    #[error("|σ({z})| = {value} is above lip·|z|")]
    SigmaAboveLip { z: f64, value: f64 },
    #[error("σ has slope {slope} near z = {z}, above the declared Lipschitz constant")]
    SigmaNotLipschitz { z: f64, slope: f64 },
    #[error("tabulated σ needs at least two strictly increasing knots")]
    SigmaTable,
}

/// Jump law `τ` of the rate-one compound Poisson walk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDistribution {
    dim: usize,
    support: Vec<(Vec<i64>, f64)>,
    range: usize,
}

impl StepDistribution {
    /// Validates a raw list of `(site, probability)` pairs.
    ///
    /// Nothing is renormalized: a list that does not sum to one is rejected.
    pub fn new(raw: Vec<(Vec<i64>, f64)>, dim: usize) -> Result<Self, ModelError> {
        Self::with_tolerance(raw, dim, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(
        raw: Vec<(Vec<i64>, f64)>,
        dim: usize,
        tol: f64,
    ) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDimension);
        }
        if raw.is_empty() {
            return Err(ModelError::Empty);
        }
        for (index, (site, p)) in raw.iter().enumerate() {
            if site.len() != dim {
                return Err(ModelError::DimensionMismatch { index, expected: dim, found: site.len() });
            }
            if !(p.is_finite() && *p > 0.0 && *p <= 1.0) {
                return Err(ModelError::InvalidProbability { index, value: *p });
            }
            if raw[..index].iter().any(|(s, _)| s == site) {
                return Err(ModelError::DuplicateSite { index });
            }
        }

        let sum: f64 = raw.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > tol {
            return Err(ModelError::NotNormalized { sum });
        }
        for j in 0..dim {
            let mean: f64 = raw.iter().map(|(s, p)| s[j] as f64 * p).sum();
            if mean.abs() > tol {
                return Err(ModelError::NonzeroMean { coordinate: j, mean });
            }
        }
        let stay: f64 = raw
            .iter()
            .filter(|(s, _)| s.iter().all(|&c| c == 0))
            .map(|(_, p)| p)
            .sum();
        if stay >= 1.0 - tol {
            return Err(ModelError::SelfLoopOnly { stay });
        }
        let rank = integer_rank(raw.iter().map(|(s, _)| s.as_slice()), dim);
        if rank < dim {
            return Err(ModelError::DegenerateSupport { rank, dim });
        }
        let range = raw
            .iter()
            .map(|(s, _)| s.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0))
            .max()
            .unwrap_or(0);

        Ok(Self { dim, support: raw, range })
    }

    /// Simple random walk: probability `1/(2d)` on each unit neighbour.
    pub fn laplacian(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        let p = 1.0 / (2 * dim) as f64;
        let mut support = Vec::with_capacity(2 * dim);
        for j in 0..dim {
            for sign in [-1i64, 1] {
                let mut site = vec![0i64; dim];
                site[j] = sign;
                support.push((site, p));
            }
        }
        Self { dim, support, range: 1 }
    }

    /// Lazy version `(1 − p) δ_0 + p τ`.
    pub fn lazy(&self, p: f64) -> Result<Self, ModelError> {
        let mut raw: Vec<(Vec<i64>, f64)> = Vec::with_capacity(self.support.len() + 1);
        let origin = vec![0i64; self.dim];
        let mut stay = 1.0 - p;
        for (s, q) in &self.support {
            if *s == origin {
                stay += p * q;
            } else {
                raw.push((s.clone(), p * q));
            }
        }
        if stay > 0.0 {
            raw.push((origin, stay));
        }
        Self::with_tolerance(raw, self.dim, 1e-10)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[(Vec<i64>, f64)] {
        &self.support
    }

    /// `R_0`: largest sup-norm of a support site.
    pub fn range(&self) -> usize {
        self.range
    }

    /// `τ(0)`.
    pub fn stay_probability(&self) -> f64 {
        self.support
            .iter()
            .filter(|(s, _)| s.iter().all(|&c| c == 0))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.support.iter().all(|(s, p)| {
            let neg: Vec<i64> = s.iter().map(|c| -c).collect();
            self.support
                .iter()
                .any(|(t, q)| *t == neg && (p - q).abs() <= 1e-15)
        })
    }

    /// Covariance matrix `Σ_jk = Σ_x x_j x_k τ(x)`, row-major `d × d`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mut cov = vec![0.0; d * d];
        for (s, p) in &self.support {
            for j in 0..d {
                for k in 0..d {
                    cov[j * d + k] += p * (s[j] * s[k]) as f64;
                }
            }
        }
        cov
    }

    /// Largest per-unit-time coordinate variance `max_j Σ_x x_j² τ(x)`.
    pub fn max_coordinate_variance(&self) -> f64 {
        let cov = self.covariance();
        (0..self.dim).map(|j| cov[j * self.dim + j]).fold(0.0, f64::max)
    }

    /// Law of coordinate `j` of a single step, as `(offset, probability)` pairs.
    pub fn marginal(&self, j: usize) -> Vec<(i64, f64)> {
        let mut out: Vec<(i64, f64)> = Vec::new();
        for (s, p) in &self.support {
            match out.iter_mut().find(|(x, _)| *x == s[j]) {
                Some(entry) => entry.1 += p,
                None => out.push((s[j], *p)),
            }
        }
        out.sort_by_key(|(x, _)| *x);
        out
    }

    /// `φ(z) = Σ_x e^{z·x} τ(x)`.
    pub fn mgf(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.dim, "argument dimension");
        self.support
            .iter()
            .map(|(s, p)| {
                let dot: f64 = s.iter().zip(z).map(|(&a, &b)| a as f64 * b).sum();
                p * math::exp(dot)
            })
            .sum()
    }

    /// `Re τ̂(θ) = Σ_x cos(θ·x) τ(x)`.
    pub fn characteristic_re(&self, theta: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|(s, p)| {
                let dot: f64 = s.iter().zip(theta).map(|(&a, &b)| a as f64 * b).sum();
                p * math::cos(dot)
            })
            .sum()
    }
}

/// Rank of a set of integer vectors, by Gaussian elimination in `f64`.
fn integer_rank<'a>(rows: impl Iterator<Item = &'a [i64]>, dim: usize) -> usize {
    let mut m: Vec<Vec<f64>> = rows.map(|r| r.iter().map(|&c| c as f64).collect()).collect();
    let mut rank = 0;
    for col in 0..dim {
        let pivot = (rank..m.len()).max_by(|&a, &b| {
            m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap_or(core::cmp::Ordering::Equal)
        });
        let Some(p) = pivot else { break };
        if m[p][col].abs() < 1e-9 {
            continue;
        }
        m.swap(rank, p);
        let pivot_row = m[rank].clone();
        for row in m.iter_mut().skip(rank + 1) {
            let f = row[col] / pivot_row[col];
            for (a, b) in row.iter_mut().zip(&pivot_row) {
                *a -= f * b;
            }
        }
        rank += 1;
    }
    rank
}

/// Validates `raw` as a step distribution on `Z^d`.
pub fn validate_step_distribution(
    raw: Vec<(Vec<i64>, f64)>,
    dim: usize,
) -> Result<StepDistribution, ModelError> {
    StepDistribution::new(raw, dim)
}

/// The discrete Laplacian's jump law on `Z^d`.
pub fn builtin_laplacian(dim: usize) -> StepDistribution {
    StepDistribution::laplacian(dim)
}

pub fn mgf(step: &StepDistribution, z: &[f64]) -> f64 {
    step.mgf(z)
}

#[derive(Clone)]
pub enum SigmaKind {
    /// `σ(z) = slope · z`.
    Linear { slope: f64 },
    /// Piecewise-linear through the knots, extended linearly past both ends.
    Tabulated { knots: Vec<(f64, f64)> },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for SigmaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaKind::Linear { slope } => f.debug_struct("Linear").field("slope", slope).finish(),
            SigmaKind::Tabulated { knots } => {
                f.debug_struct("Tabulated").field("knots", &knots.len()).finish()
            }
            SigmaKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// The nonlinearity `σ` with certified constants `L_σ ≤ |σ(z)/z| ≤ Lip_σ`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    kind: SigmaKind,
    lip: f64,
    lower: f64,
}

impl Nonlinearity {
    pub fn identity() -> Self {
        Self { kind: SigmaKind::Linear { slope: 1.0 }, lip: 1.0, lower: 1.0 }
    }

    pub fn linear(slope: f64) -> Result<Self, ModelError> {
        Self::certify(SigmaKind::Linear { slope }, slope.abs(), slope.abs())
    }

    pub fn tabulated(knots: Vec<(f64, f64)>, lip: f64, lower: f64) -> Result<Self, ModelError> {
        if knots.len() < 2 || knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ModelError::SigmaTable);
        }
        Self::certify(SigmaKind::Tabulated { knots }, lip, lower)
    }

    pub fn custom<F>(f: F, lip: f64, lower: f64) -> Result<Self, ModelError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::certify(SigmaKind::Custom(Arc::new(f)), lip, lower)
    }

    /// Checks `σ(0) = 0`, the sandwich `L|z| ≤ |σ(z)| ≤ Lip|z|` and the
    /// Lipschitz bound between neighbouring points, on the uniform grid of
    /// [`SIGMA_GRID_POINTS`] points over `±`[`SIGMA_GRID_HALF_WIDTH`].
    fn certify(kind: SigmaKind, lip: f64, lower: f64) -> Result<Self, ModelError> {
        if !(lower > 0.0 && lip >= lower && lip.is_finite()) {
            return Err(ModelError::SigmaConstants { lower, lip });
        }
        let sigma = Self { kind, lip, lower };
        let at0 = sigma.eval(0.0);
        if at0 != 0.0 {
            return Err(ModelError::SigmaNonzeroAtOrigin { value: at0 });
        }
        let rel = 1e-12;
        let n = SIGMA_GRID_POINTS;
        let h = 2.0 * SIGMA_GRID_HALF_WIDTH / (n - 1) as f64;
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..n {
            let z = -SIGMA_GRID_HALF_WIDTH + i as f64 * h;
            let v = sigma.eval(z);
            let a = v.abs();
            if a < lower * z.abs() * (1.0 - rel) {
                return Err(ModelError::SigmaBelowLower { z, value: v });
            }
            if a > lip * z.abs() * (1.0 + rel) {
                return Err(ModelError::SigmaAboveLip { z, value: v });
            }
            if let Some((pz, pv)) = prev {
                let slope = (v - pv).abs() / (z - pz);
                if slope > lip * (1.0 + 1e-9) {
                    return Err(ModelError::SigmaNotLipschitz { z, slope });
                }
            }
            prev = Some((z, v));
        }
        Ok(sigma)
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match &self.kind {
            SigmaKind::Linear { slope } => slope * z,
            SigmaKind::Tabulated { knots } => interpolate(knots, z),
            SigmaKind::Custom(f) => f(z),
        }
    }

    /// `Lip_σ`.
    pub fn lip(&self) -> f64 {
        self.lip
    }

    /// `L_σ`.
    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn kind(&self) -> &SigmaKind {
        &self.kind
    }

    /// Slope when `σ` is linear.
    pub fn linear_slope(&self) -> Option<f64> {
        match self.kind {
            SigmaKind::Linear { slope } => Some(slope),
            _ => None,
        }
    }
}

fn interpolate(knots: &[(f64, f64)], z: f64) -> f64 {
    let n = knots.len();
    let seg = match knots.binary_search_by(|(x, _)| x.partial_cmp(&z).unwrap_or(core::cmp::Ordering::Less)) {
        Ok(i) => return knots[i].1,
        Err(0) => 0,
        Err(i) if i >= n => n - 2,
        Err(i) => i - 1,
    };
    let (x0, y0) = knots[seg];
    let (x1, y1) = knots[seg + 1];
    y0 + (y1 - y0) * (z - x0) / (x1 - x0)
}

/// A validated jump law together with the nonlinearity.
#[derive(Debug, Clone)]
pub struct Model {
    pub step: StepDistribution,
    pub sigma: Nonlinearity,
}

impl Model {
    pub fn new(step: StepDistribution, sigma: Nonlinearity) -> Self {
        Self { step, sigma }
    }

    /// Simple random walk on `Z^d` with `σ(u) = u` (the parabolic Anderson model).
    pub fn pam(dim: usize) -> Self {
        Self::new(StepDistribution::laplacian(dim), Nonlinearity::identity())
    }

    pub fn dim(&self) -> usize {
        self.step.dim()
    }
}

/// A field on `B(K)`, stored row-major with the last coordinate fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeField {
    dim: usize,
    radius: usize,
    values: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(dim: usize, radius: usize) -> Self {
        Self { dim, radius, values: vec![0.0; (2 * radius + 1).pow(dim as u32)] }
    }

    /// `c · δ_0`.
    pub fn point_mass(dim: usize, radius: usize, c: f64) -> Self {
        let mut f = Self::zeros(dim, radius);
        let origin = vec![0i64; dim];
        f.set(&origin, c);
        f
    }

    pub fn from_values(dim: usize, radius: usize, values: Vec<f64>) -> Result<Self, ModelError> {
        let expected = (2 * radius + 1).pow(dim as u32);
        if values.len() != expected {
            return Err(ModelError::FieldSize { expected, found: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::NonFinite { index, value });
        }
        Ok(Self { dim, radius, values })
    }

    /// Builds a field by evaluating `f` at every site of the box.
    pub fn from_fn(dim: usize, radius: usize, mut f: impl FnMut(&[i64]) -> f64) -> Self {
        let mut field = Self::zeros(dim, radius);
        let mut site = vec![0i64; dim];
        for i in 0..field.values.len() {
            field.decode_into(i, &mut site);
            field.values[i] = f(&site);
        }
        field
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        if site.len() != self.dim {
            return None;
        }
        let k = self.radius as i64;
        let side = self.side();
        let mut idx = 0;
        for &c in site {
            if c.abs() > k {
                return None;
            }
            idx = idx * side + (c + k) as usize;
        }
        Some(idx)
    }

    pub fn site_of(&self, index: usize) -> Vec<i64> {
        let mut site = vec![0i64; self.dim];
        self.decode_into(index, &mut site);
        site
    }

    fn decode_into(&self, mut index: usize, site: &mut [i64]) {
        let side = self.side();
        let k = self.radius as i64;
        for j in (0..self.dim).rev() {
            site[j] = (index % side) as i64 - k;
            index /= side;
        }
    }

    /// Value at `site`; sites outside the box read as 0.
    pub fn get(&self, site: &[i64]) -> f64 {
        self.index_of(site).map_or(0.0, |i| self.values[i])
    }

    /// Sets the value at `site`. Panics if the site is outside the box.
    pub fn set(&mut self, site: &[i64], value: f64) {
        let i = self.index_of(site).expect("site outside the box");
        self.values[i] = value;
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn l2_norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Iterator over `(site, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.site_of(i), v))
    }
}

/// `(G h)(x) = Σ_y [h(x+y) − h(x)] τ(y)` at every site of the box, with
/// values outside the box read as 0.
pub fn apply_generator(field: &LatticeField, step: &StepDistribution) -> Result<LatticeField, ModelError> {
    if field.dim() != step.dim() {
        return Err(ModelError::DimensionMismatch { index: 0, expected: step.dim(), found: field.dim() });
    }
    let grid = PaddedGrid::new(step, field.radius())?;
    let mut h = grid.zeros();
    grid.pack(field.values(), &mut h);
    let mut out = grid.zeros();
    grid.apply(&h, &mut out);
    Ok(LatticeField { dim: field.dim(), radius: field.radius(), values: grid.unpack(&out) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn srw1() -> StepDistribution {
        StepDistribution::laplacian(1)
    }

    #[test]
    fn symmetric_nearest_neighbour_is_valid() {
        let t = validate_step_distribution(vec![(vec![-1], 0.5), (vec![1], 0.5)], 1).unwrap();
        assert_eq!(t.range(), 1);
        assert!(t.is_symmetric());
    }

    #[test]
    fn biased_step_is_rejected() {
        let err = validate_step_distribution(vec![(vec![1], 1.0)], 1).unwrap_err();
        assert!(matches!(err, ModelError::NonzeroMean { coordinate: 0, .. }));
    }

    #[test]
    fn flat_support_in_2d_is_degenerate() {
        let err = validate_step_distribution(vec![(vec![-1, 0], 0.5), (vec![1, 0], 0.5)], 2).unwrap_err();
        assert_eq!(err, ModelError::DegenerateSupport { rank: 1, dim: 2 });
    }

    #[test]
    fn other_rejections() {
        assert!(matches!(
            validate_step_distribution(vec![(vec![-1], 0.5), (vec![1], 0.4)], 1),
            Err(ModelError::NotNormalized { .. })
        ));
        assert!(matches!(validate_step_distribution(vec![(vec![0], 1.0)], 1), Err(ModelError::SelfLoopOnly { .. })));
        assert!(matches!(validate_step_distribution(vec![], 1), Err(ModelError::Empty)));
        assert!(matches!(
            validate_step_distribution(vec![(vec![1, 0], 0.5), (vec![-1], 0.5)], 2),
            Err(ModelError::DimensionMismatch { index: 1, .. })
        ));
        assert!(matches!(
            validate_step_distribution(vec![(vec![1], 0.5), (vec![1], 0.5)], 1),
            Err(ModelError::DuplicateSite { index: 1 })
        ));
    }

    #[test]
    fn normalization_is_not_applied_silently() {
        let raw = vec![(vec![-1], 1.0), (vec![1], 1.0)];
        assert!(matches!(validate_step_distribution(raw, 1), Err(ModelError::InvalidProbability { .. }) | Err(ModelError::NotNormalized { .. })));
    }

    #[test]
    fn laplacian_shapes() {
        let t1 = builtin_laplacian(1);
        assert_eq!(t1.support(), &[(vec![-1], 0.5), (vec![1], 0.5)]);
        let t3 = builtin_laplacian(3);
        assert_eq!(t3.support().len(), 6);
        assert!(t3.support().iter().all(|(_, p)| (*p - 1.0 / 6.0).abs() < 1e-16));
        let t2 = builtin_laplacian(2);
        assert_eq!(t2.support().len(), 4);
        for j in 0..2 {
            let mean: f64 = t2.support().iter().map(|(s, p)| s[j] as f64 * p).sum();
            assert_eq!(mean, 0.0);
        }
        for d in 1..=4 {
            let t = builtin_laplacian(d);
            validate_step_distribution(t.support().to_vec(), d).unwrap();
        }
    }

    #[test]
    fn generator_on_point_mass() {
        let h = LatticeField::point_mass(1, 3, 1.0);
        let g = apply_generator(&h, &srw1()).unwrap();
        assert_eq!(g.get(&[0]), -1.0);
        assert_eq!(g.get(&[1]), 0.5);
        assert_eq!(g.get(&[-1]), 0.5);
        assert_eq!(g.get(&[2]), 0.0);
    }

    #[test]
    fn generator_kills_constants_and_linear_functions() {
        let step = srw1();
        let c = LatticeField::from_fn(1, 6, |_| 3.5);
        let g = apply_generator(&c, &step).unwrap();
        for x in -5..=5 {
            assert_eq!(g.get(&[x]), 0.0);
        }
        let lin = LatticeField::from_fn(1, 6, |s| s[0] as f64);
        let g = apply_generator(&lin, &step).unwrap();
        for x in -5..=5 {
            assert!(g.get(&[x]).abs() < 1e-15);
        }
    }

    #[test]
    fn generator_rejects_small_box() {
        let wide = validate_step_distribution(vec![(vec![-2], 0.5), (vec![2], 0.5)], 1).unwrap();
        let h = LatticeField::zeros(1, 1);
        assert_eq!(apply_generator(&h, &wide), Err(ModelError::BoxTooSmall { radius: 1, range: 2 }));
    }

    #[test]
    fn mgf_examples() {
        let t = srw1();
        assert_eq!(t.mgf(&[0.0]), 1.0);
        for z in [-2.0, -0.3, 0.7, 3.0] {
            assert!((t.mgf(&[z]) - libm::cosh(z)).abs() < 1e-12 * libm::cosh(z));
        }
        let t3 = builtin_laplacian(3);
        assert!(t3.mgf(&[0.2, -1.0, 0.4]) >= 1.0);
    }

    #[test]
    fn sigma_certification() {
        assert!(Nonlinearity::linear(2.0).is_ok());
        assert!(matches!(Nonlinearity::linear(0.0), Err(ModelError::SigmaConstants { .. })));
        let s = Nonlinearity::custom(|z| z * (1.5 + 0.5 * libm::sin(z)) , 3.0, 1.0);
        // slope of z sin z grows with |z|; must be rejected as non-Lipschitz
        assert!(s.is_err());
        let s = Nonlinearity::custom(|z| if z >= 0.0 { 2.0 * z } else { z }, 2.0, 1.0).unwrap();
        assert_eq!(s.eval(-3.0), -3.0);
        assert!(matches!(
            Nonlinearity::custom(|z| z + 1.0, 2.0, 0.5),
            Err(ModelError::SigmaNonzeroAtOrigin { .. })
        ));
        assert!(matches!(
            Nonlinearity::custom(|z| 0.5 * z, 2.0, 1.0),
            Err(ModelError::SigmaBelowLower { .. })
        ));
        let tab = Nonlinearity::tabulated(vec![(-1.0, -2.0), (0.0, 0.0), (1.0, 1.0)], 2.0, 1.0).unwrap();
        assert_eq!(tab.eval(0.5), 0.5);
        assert_eq!(tab.eval(-10.0), -20.0);
        assert_eq!(tab.eval(10.0), 10.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn generator_is_linear(
                a in -3.0f64..3.0,
                b in -3.0f64..3.0,
                h in proptest::collection::vec(-1.0f64..1.0, 49),
                g in proptest::collection::vec(-1.0f64..1.0, 49),
            ) {
                let step = builtin_laplacian(2);
                let hf = LatticeField::from_values(2, 3, h.clone()).unwrap();
                let gf = LatticeField::from_values(2, 3, g.clone()).unwrap();
                let comb: Vec<f64> = h.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
                let cf = LatticeField::from_values(2, 3, comb).unwrap();
                let lhs = apply_generator(&cf, &step).unwrap();
                let gh = apply_generator(&hf, &step).unwrap();
                let gg = apply_generator(&gf, &step).unwrap();
                for i in 0..49 {
                    let rhs = a * gh.values()[i] + b * gg.values()[i];
                    prop_assert!((lhs.values()[i] - rhs).abs() <= 1e-12);
                }
            }

            #[test]
            fn generator_preserves_mass_with_margin(
                vals in proptest::collection::vec(0.0f64..1.0, 27),
                d in 1usize..=3,
            ) {
                // h supported on B(1) inside B(3): margin R_0 = 1 is respected
                let step = builtin_laplacian(d);
                let inner = 3usize.pow(d as u32);
                let h = LatticeField::from_fn(d, 3, |s| {
                    if s.iter().all(|c| c.abs() <= 1) {
                        let mut idx = 0usize;
                        for &c in s { idx = idx * 3 + (c + 1) as usize; }
                        vals[idx % inner]
                    } else { 0.0 }
                });
                let g = apply_generator(&h, &step).unwrap();
                prop_assert!(g.total_mass().abs() <= 1e-10);
            }
        }
    }
}
