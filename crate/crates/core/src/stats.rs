//! Small statistics toolkit: means, jackknife errors, least squares.

use alloc::vec::Vec;

use crate::math;

/// Two-sided 95% standard normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Standard error of the sample mean.
///
/// This is also the jackknife standard error of the mean: the leave-one-out
/// means are `(n·x̄ − x_i)/(n − 1)`, whose jackknife variance collapses to
/// `s²/n`.
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    math::sqrt(variance(xs) / n as f64)
}

/// Jackknife estimate and standard error of a general statistic.
pub fn jackknife<F>(xs: &[f64], stat: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = xs.len();
    let full = stat(xs);
    if n < 2 {
        return (full, 0.0);
    }
    let mut buf: Vec<f64> = Vec::with_capacity(n - 1);
    let mut loo = Vec::with_capacity(n);
    for i in 0..n {
        buf.clear();
        buf.extend(xs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x));
        loo.push(stat(&buf));
    }
    let m = mean(&loo);
    let var = loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (full, math::sqrt(var))
}

/// Two-sided 95% Student-t quantile, via the Cornish–Fisher expansion around
/// the normal quantile (accurate to about 1e-4 for `dof ≥ 5`).
pub fn student_t_975(dof: usize) -> f64 {
    if dof == 0 {
        return f64::INFINITY;
    }
    let z = Z_975;
    let v = dof as f64;
    let z3 = z * z * z;
    let z5 = z3 * z * z;
    let z7 = z5 * z * z;
    let z9 = z7 * z * z;
    let g1 = (z3 + z) / 4.0;
    let g2 = (5.0 * z5 + 16.0 * z3 + 3.0 * z) / 96.0;
    let g3 = (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / 384.0;
    let g4 = (79.0 * z9 + 776.0 * z7 + 1482.0 * z5 - 1920.0 * z3 - 945.0 * z) / 92160.0;
    z + g1 / v + g2 / (v * v) + g3 / (v * v * v) + g4 / (v * v * v * v)
}

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub residual_sd: f64,
    pub n: usize,
}

pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len(), "ols: length mismatch");
    let n = x.len();
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let s2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
    let slope_se = math::sqrt(s2 / sxx);
    let intercept_se = math::sqrt(s2 * (1.0 / n as f64 + mx * mx / sxx));
    LinearFit { slope, intercept, slope_se, intercept_se, residual_sd: math::sqrt(s2), n }
}

/// Logit, with `p` clamped into `[eps, 1 − eps]`.
pub fn logit(p: f64, eps: f64) -> f64 {
    let q = p.clamp(eps, 1.0 - eps);
    math::ln(q / (1.0 - q))
}
