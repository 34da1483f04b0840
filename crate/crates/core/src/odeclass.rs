//! Sampled checks of the differential inequality
//!
//! ```text
//! f'(t) ≤ −α sup_{K∈[a,bt]} (f(t) − exp(−γK²/t)) / K^δ,   t ≥ 1,
//! ```
//!
//! and of the decay laws it implies.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::{derivative_weights, MomentSeries};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeClassError {
    #[error("need at least {required} samples with t ≥ 1, found {found}")]
    WindowTooShort { required: usize, found: usize },
    #[error("the decay check needs the window to reach t = {required}, it ends at {found}")]
    WindowTooSmall { required: f64, found: f64 },
    #[error("times must be strictly increasing")]
    NotIncreasing,
    #[error("values must be finite and nonnegative (index {0})")]
    NegativeValue(usize),
    #[error("sample arrays have different lengths")]
    LengthMismatch,
    #[error("need α, γ > 0, δ ≥ 0, a > 0 and b > 0")]
    InvalidParameters,
    #[error("δ = {0} is outside [0, 2]")]
    DeltaOutOfRange(f64),
}

pub const MIN_WINDOW: usize = 5;
/// Threshold below which `limsup` estimates count as strictly negative.
pub const STRICTNESS_THRESHOLD: f64 = -1e-3;
/// Slack multipliers on the difference-scheme error and the derivative SE.
pub const SCHEME_SLACK: f64 = 3.0;
pub const SE_SLACK: f64 = 3.0;

/// Samples of `f` with derivative estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampledFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    /// Statistical standard error of each derivative, when known.
    pub derivative_errors: Option<Vec<f64>>,
}

impl SampledFunction {
    /// Derivatives by three-point differences on the (possibly nonuniform) grid.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, OdeClassError> {
        check_samples(&times, &values)?;
        let derivatives = (0..times.len())
            .map(|i| derivative_weights(&times, i).iter().map(|&(j, w)| w * values[j]).sum())
            .collect();
        Ok(Self { times, values, derivatives, derivative_errors: None })
    }

    pub fn with_derivatives(
        times: Vec<f64>,
        values: Vec<f64>,
        derivatives: Vec<f64>,
        derivative_errors: Option<Vec<f64>>,
    ) -> Result<Self, OdeClassError> {
        check_samples(&times, &values)?;
        if derivatives.len() != times.len() || derivative_errors.as_ref().is_some_and(|e| e.len() != times.len()) {
            return Err(OdeClassError::LengthMismatch);
        }
        Ok(Self { times, values, derivatives, derivative_errors })
    }

    /// `f = scale · Ê[m_t^η]` with the series' derivative estimates and errors.
    pub fn from_moment_series(series: &MomentSeries, scale: f64) -> Result<Self, OdeClassError> {
        let keep: Vec<usize> = (0..series.times.len()).filter(|&i| series.times[i] > 0.0).collect();
        let pick = |v: &[f64], s: f64| keep.iter().map(|&i| s * v[i]).collect::<Vec<f64>>();
        Self::with_derivatives(
            pick(&series.times, 1.0),
            pick(&series.estimates, scale),
            pick(&series.derivatives, scale),
            Some(pick(&series.derivative_errors, scale.abs())),
        )
    }

    /// `|D_i − (D_{i−1} + D_{i+1})/2|`, the local difference-scheme error estimate.
    pub fn scheme_errors(&self) -> Vec<f64> {
        let n = self.derivatives.len();
        let d = &self.derivatives;
        let mut out = vec![0.0; n];
        for i in 1..n.saturating_sub(1) {
            out[i] = (d[i] - 0.5 * (d[i - 1] + d[i + 1])).abs();
        }
        if n >= 3 {
            out[0] = out[1];
            out[n - 1] = out[n - 2];
        }
        out
    }
}

fn check_samples(times: &[f64], values: &[f64]) -> Result<(), OdeClassError> {
    if times.len() != values.len() {
        return Err(OdeClassError::LengthMismatch);
    }
    if times.len() < 2 {
        return Err(OdeClassError::WindowTooShort { required: MIN_WINDOW, found: times.len() });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(OdeClassError::NotIncreasing);
    }
    if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(OdeClassError::NegativeValue(i));
    }
    Ok(())
}

/// Parameters `(α, δ, γ, a, b)` of the class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub alpha: f64,
    pub delta: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
}

impl ClassParams {
    fn valid(&self) -> bool {
        self.alpha > 0.0 && self.gamma > 0.0 && self.delta >= 0.0 && self.a > 0.0 && self.b > 0.0
    }
}

/// `(f − e^{−γK²/t})/K^δ`.
fn bracket(f: f64, t: f64, k: f64, gamma: f64, delta: f64) -> f64 {
    (f - math::exp(-gamma * k * k / t)) / math::powf(k, delta)
}

const SCAN_POINTS: usize = 64;
const GOLDEN_ITERATIONS: usize = 80;

/// `sup_{K∈[lo,hi]}` of the bracket and its argmax, by a log-spaced scan,
/// golden-section refinement around the best scan point, and the endpoints.
pub fn bracket_sup(f: f64, t: f64, gamma: f64, delta: f64, lo: f64, hi: f64) -> (f64, f64) {
    let g = |k: f64| bracket(f, t, k, gamma, delta);
    let mut best = (g(lo), lo);
    let hv = g(hi);
    if hv > best.0 {
        best = (hv, hi);
    }
    if hi <= lo {
        return best;
    }
    let ratio = math::ln(hi / lo);
    let at = |i: usize| lo * math::exp(ratio * i as f64 / (SCAN_POINTS - 1) as f64);
    let mut bi = 0;
    let mut bv = f64::NEG_INFINITY;
    for i in 0..SCAN_POINTS {
        let v = g(at(i));
        if v > bv {
            bv = v;
            bi = i;
        }
    }
    let (mut x0, mut x3) = (at(bi.saturating_sub(1)), at((bi + 1).min(SCAN_POINTS - 1)));
    let phi = 0.5 * (math::sqrt(5.0) - 1.0);
    let mut x1 = x3 - phi * (x3 - x0);
    let mut x2 = x0 + phi * (x3 - x0);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if g1 > g2 {
            x3 = x2;
            x2 = x1;
            g2 = g1;
            x1 = x3 - phi * (x3 - x0);
            g1 = g(x1);
        } else {
            x0 = x1;
            x1 = x2;
            g1 = g2;
            x2 = x0 + phi * (x3 - x0);
            g2 = g(x2);
        }
    }
    for (v, k) in [(bv, at(bi)), (g1, x1), (g2, x2)] {
        if v > best.0 {
            best = (v, k);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MembershipRow {
    pub t: f64,
    pub value: f64,
    pub derivative: f64,
    /// `sup_K` of the bracket.
    pub sup: f64,
    pub argmax_k: f64,
    pub slack: f64,
    /// `−α·sup − f' + slack`; the inequality holds where this is `≥ 0`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MembershipReport {
    pub pass: bool,
    pub worst_margin: f64,
    pub worst_time: f64,
    pub argmax_k: f64,
    pub rows: Vec<MembershipRow>,
}

fn membership_rows(f: &SampledFunction, delta: f64, gamma: f64, a: f64, b: f64) -> Result<Vec<(MembershipRow, f64)>, OdeClassError> {
    let scheme = f.scheme_errors();
    let mut rows = Vec::new();
    for i in 0..f.times.len() {
        let t = f.times[i];
        if t < 1.0 || b * t < a {
            continue;
        }
        let (sup, k) = bracket_sup(f.values[i], t, gamma, delta, a, b * t);
        let se = f.derivative_errors.as_ref().map_or(0.0, |e| e[i]);
        let slack = SCHEME_SLACK * scheme[i] + SE_SLACK * se;
        rows.push((
            MembershipRow { t, value: f.values[i], derivative: f.derivatives[i], sup, argmax_k: k, slack, margin: 0.0 },
            slack,
        ));
    }
    if rows.len() < MIN_WINDOW {
        return Err(OdeClassError::WindowTooShort { required: MIN_WINDOW, found: rows.len() });
    }
    Ok(rows)
}

/// Tests the inequality at every sample with `t ≥ 1`, allowing the slack
/// `3·(scheme error) + 3·(derivative SE)`.
pub fn check_membership(f: &SampledFunction, p: ClassParams) -> Result<MembershipReport, OdeClassError> {
    if !p.valid() {
        return Err(OdeClassError::InvalidParameters);
    }
    let rows = membership_rows(f, p.delta, p.gamma, p.a, p.b)?;
    let mut report = MembershipReport {
        pass: true,
        worst_margin: f64::INFINITY,
        worst_time: f64::NAN,
        argmax_k: f64::NAN,
        rows: Vec::with_capacity(rows.len()),
    };
    for (mut row, slack) in rows {
        row.margin = -p.alpha * row.sup - row.derivative + slack;
        if row.margin < report.worst_margin {
            report.worst_margin = row.margin;
            report.worst_time = row.t;
            report.argmax_k = row.argmax_k;
        }
        report.rows.push(row);
    }
    report.pass = report.worst_margin >= 0.0;
    Ok(report)
}

/// Range of `α` for which the samples satisfy the inequality at fixed
/// `(δ, γ, a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlphaRange {
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Samples where the bracket's supremum is positive (these cap `α`).
    pub active_points: usize,
    pub feasible: bool,
}

pub fn feasible_alpha(f: &SampledFunction, delta: f64, gamma: f64, a: f64, b: f64) -> Result<AlphaRange, OdeClassError> {
    if !(gamma > 0.0 && delta >= 0.0 && a > 0.0 && b > 0.0) {
        return Err(OdeClassError::InvalidParameters);
    }
    let rows = membership_rows(f, delta, gamma, a, b)?;
    let mut lo: f64 = 0.0;
    let mut hi = f64::INFINITY;
    let mut active = 0;
    for (row, slack) in rows {
        let room = slack - row.derivative;
        if row.sup > 0.0 {
            active += 1;
            hi = hi.min(room / row.sup);
        } else if row.sup < 0.0 {
            lo = lo.max(-room / -row.sup);
        } else if room < 0.0 {
            hi = f64::NEG_INFINITY;
        }
    }
    Ok(AlphaRange { alpha_min: lo, alpha_max: hi, active_points: active, feasible: hi > 0.0 && lo <= hi })
}

/// Decay law predicted for the class with exponent `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum DecayExponent {
    /// `limsup log f(t)/t^ν < 0`.
    Power { nu: f64 },
    /// `limsup log f(t)/√log t < 0`.
    SqrtLog,
}

impl DecayExponent {
    pub fn normalizer(&self, t: f64) -> f64 {
        match *self {
            DecayExponent::Power { nu } => math::powf(t, nu),
            DecayExponent::SqrtLog => math::sqrt(math::ln(t)),
        }
    }
}

/// `ν = (2 − δ)/(2 + δ)` for `δ < 2`, the `√log` law at `δ = 2`.
pub fn predicted_exponent(delta: f64) -> Result<DecayExponent, OdeClassError> {
    if !(0.0..=2.0).contains(&delta) {
        return Err(OdeClassError::DeltaOutOfRange(delta));
    }
    if delta == 2.0 {
        Ok(DecayExponent::SqrtLog)
    } else {
        Ok(DecayExponent::Power { nu: (2.0 - delta) / (2.0 + delta) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayConclusion {
    pub exponent: DecayExponent,
    /// `max log f(t)/norm(t)` over the final decade of the window.
    pub limsup_estimate: f64,
    pub pass: bool,
    pub window: (f64, f64),
}

/// The window must reach at least this time.
pub const DECAY_WINDOW_END: f64 = 1e2;

/// Estimates `limsup log f(t)/t^ν` (or `/√log t`) by its maximum over the
/// last decade of the window; passes when at most [`STRICTNESS_THRESHOLD`].
pub fn verify_decay_conclusion(f: &SampledFunction, delta: f64) -> Result<DecayConclusion, OdeClassError> {
    let exponent = predicted_exponent(delta)?;
    let end = *f.times.last().expect("validated nonempty");
    if end < DECAY_WINDOW_END {
        return Err(OdeClassError::WindowTooSmall { required: DECAY_WINDOW_END, found: end });
    }
    let start = end / 10.0;
    let mut est = f64::NEG_INFINITY;
    for (&t, &v) in f.times.iter().zip(&f.values) {
        if t < start || t <= 1.0 {
            continue;
        }
        let r = math::ln(v) / exponent.normalizer(t);
        if r > est {
            est = r;
        }
    }
    Ok(DecayConclusion { exponent, limsup_estimate: est, pass: est <= STRICTNESS_THRESHOLD, window: (start, end) })
}

/// Membership of a rescaled moment series with `γ` held at a given value
/// (typically `c·η` from the tail-bound constant `c`) and `α` fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MembershipFit {
    pub gamma: f64,
    pub alpha: AlphaRange,
    /// The preferred `α` clipped into the feasible range.
    pub fitted_alpha: Option<f64>,
    pub report: Option<MembershipReport>,
    pub pass: bool,
}

/// Fits `α` by clipping `preferred` into the feasible range and checks
/// membership there.
pub fn fit_membership(
    f: &SampledFunction,
    delta: f64,
    gamma: f64,
    a: f64,
    b: f64,
    preferred: f64,
) -> Result<MembershipFit, OdeClassError> {
    let alpha = feasible_alpha(f, delta, gamma, a, b)?;
    let fitted_alpha = alpha.feasible.then(|| {
        let hi = alpha.alpha_max * (1.0 - 1e-9);
        let lo = alpha.alpha_min * (1.0 + 1e-9);
        if preferred > hi {
            hi
        } else if preferred < lo {
            lo.min(hi)
        } else {
            preferred
        }
    });
    let report = match fitted_alpha {
        Some(alpha) if alpha > 0.0 => Some(check_membership(f, ClassParams { alpha, delta, gamma, a, b })?),
        _ => None,
    };
    let pass = report.as_ref().is_some_and(|r| r.pass);
    Ok(MembershipFit { gamma, alpha, fitted_alpha, report, pass })
}

/// `C = (2(2c_0 d)^η)^{−1}`, the scale that puts `C·E[m_t^η]` in the class.
pub fn moment_scale(c0: f64, dim: usize, eta: f64) -> f64 {
    1.0 / (2.0 * math::powf(2.0 * c0 * dim as f64, eta))
}

/// `α = c·λ²η(1−η)L_σ²/2` with `c = 3^{−d}`, the constant for which
/// `|B(K)| ≤ c^{−1}K^d` in the sup norm for `K ≥ 1`.
pub fn theoretical_alpha(lambda: f64, eta: f64, lower: f64, dim: usize) -> f64 {
    math::powf(3.0, -(dim as f64)) * lambda * lambda * eta * (1.0 - eta) * lower * lower / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_grid(t0: f64, t1: f64, per_decade: usize) -> Vec<f64> {
        let n = ((t1 / t0).log10() * per_decade as f64).round() as usize;
        (0..=n).map(|i| t0 * (t1 / t0).powf(i as f64 / n as f64)).collect()
    }

    fn planted(theta: f64, nu: f64, t0: f64, t1: f64) -> SampledFunction {
        let t = log_grid(t0, t1, 200);
        let v = t.iter().map(|&s| (-theta * s.powf(nu)).exp()).collect();
        SampledFunction::new(t, v).unwrap()
    }

    fn planted_sqrtlog(theta: f64, t0: f64, t1: f64) -> SampledFunction {
        let t = log_grid(t0, t1, 200);
        let v = t.iter().map(|&s| (-theta * s.ln().sqrt()).exp()).collect();
        SampledFunction::new(t, v).unwrap()
    }

    #[test]
    fn exponents() {
        assert_eq!(predicted_exponent(0.0).unwrap(), DecayExponent::Power { nu: 1.0 });
        assert_eq!(predicted_exponent(1.0).unwrap(), DecayExponent::Power { nu: 1.0 / 3.0 });
        assert_eq!(predicted_exponent(2.0).unwrap(), DecayExponent::SqrtLog);
        assert_eq!(predicted_exponent(2.5), Err(OdeClassError::DeltaOutOfRange(2.5)));
    }

    #[test]
    fn zero_function_is_a_member() {
        let t = log_grid(1.0, 1e3, 20);
        let f = SampledFunction::new(t.clone(), vec![0.0; t.len()]).unwrap();
        let rep = check_membership(&f, ClassParams { alpha: 1.0, delta: 1.0, gamma: 1.0, a: 1.0, b: 2.0 }).unwrap();
        assert!(rep.pass);
        // every bracket is negative, so any α works
        let r = feasible_alpha(&f, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!((r.alpha_min, r.alpha_max, r.active_points), (0.0, f64::INFINITY, 0));
        assert!(fit_membership(&f, 1.0, 1.0, 1.0, 1.0, 0.3).unwrap().pass);
    }

    #[test]
    fn constant_two_is_not() {
        let t = log_grid(1.0, 1e3, 20);
        let f = SampledFunction::new(t.clone(), vec![2.0; t.len()]).unwrap();
        let rep = check_membership(&f, ClassParams { alpha: 0.1, delta: 1.0, gamma: 1.0, a: 1.0, b: 2.0 }).unwrap();
        assert!(!rep.pass);
        // bracket at K = a is at least (2 − 1)/1
        assert!(rep.rows.iter().all(|r| r.sup >= 1.0));
    }

    #[test]
    fn short_window_is_rejected() {
        let f = SampledFunction::new(vec![1.0, 2.0, 3.0], vec![1.0, 0.5, 0.2]).unwrap();
        assert!(matches!(
            check_membership(&f, ClassParams { alpha: 1.0, delta: 1.0, gamma: 1.0, a: 1.0, b: 2.0 }),
            Err(OdeClassError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn bracket_sup_matches_dense_scan() {
        for &(f, t, gamma, delta) in &[(0.3, 50.0, 1.0, 1.0), (0.01, 400.0, 0.5, 0.5), (0.9, 2.0, 2.0, 2.0)] {
            let (s, _) = bracket_sup(f, t, gamma, delta, 1.0, t);
            let dense = (0..=200_000)
                .map(|i| 1.0 + (t - 1.0) * i as f64 / 200_000.0)
                .map(|k| bracket(f, t, k, gamma, delta))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(s >= dense - 1e-9 * dense.abs().max(1e-12), "{s} < {dense}");
        }
    }

    /// `exp(−θt^ν)` belongs to the class when `α ≤ θν(θ/γ)^{δ/2}`; the planted
    /// cases use a quarter of that.
    #[test]
    fn planted_power_laws_pass() {
        let (theta, gamma) = (0.5f64, 1.0);
        for delta in [0.0, 0.5, 1.0, 1.5] {
            let nu = (2.0 - delta) / (2.0 + delta);
            let alpha = 0.25 * theta * nu * (theta / gamma).powf(delta / 2.0);
            let f = planted(theta, nu, 1.0, 1e3);
            let rep = check_membership(&f, ClassParams { alpha, delta, gamma, a: 1.0, b: 2.0 }).unwrap();
            assert!(rep.pass, "δ = {delta}: {} at t = {}", rep.worst_margin, rep.worst_time);
            let dec = verify_decay_conclusion(&f, delta).unwrap();
            assert!(dec.pass);
            assert!((dec.limsup_estimate + theta).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_power_law_fails_with_large_alpha() {
        let (theta, gamma, delta) = (0.5f64, 1.0, 1.0);
        let nu = 1.0 / 3.0;
        let alpha = 4.0 * theta * nu * (theta / gamma).powf(0.5);
        let rep = check_membership(&planted(theta, nu, 1.0, 1e3), ClassParams { alpha, delta, gamma, a: 1.0, b: 2.0 }).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn planted_sqrtlog_passes() {
        let (theta, gamma) = (3.0, 1.0);
        let alpha = 0.5 * theta * theta / (2.0 * gamma);
        let f = planted_sqrtlog(theta, 2.0, 1e4);
        let rep = check_membership(&f, ClassParams { alpha, delta: 2.0, gamma, a: 1.0, b: 2.0 }).unwrap();
        assert!(rep.pass, "{} at {}", rep.worst_margin, rep.worst_time);
        let dec = verify_decay_conclusion(&f, 2.0).unwrap();
        assert!(dec.pass);
        assert!((dec.limsup_estimate + 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_synthetic_limsups() {
        let f = planted(2.0, 1.0 / 3.0, 1.0, 1e3);
        assert!((verify_decay_conclusion(&f, 1.0).unwrap().limsup_estimate + 2.0).abs() < 1e-12);
        let short = planted(2.0, 1.0 / 3.0, 1.0, 50.0);
        assert!(matches!(verify_decay_conclusion(&short, 1.0), Err(OdeClassError::WindowTooSmall { .. })));
    }

    #[test]
    fn inverse_power_is_not_strictly_negative() {
        // log(1/t)/t^{1/3} reaches the −1e-3 threshold only near t ≈ 1e14
        let t = log_grid(1.0, 1e15, 20);
        let v: Vec<f64> = t.iter().map(|s| 1.0 / s).collect();
        let dec = verify_decay_conclusion(&SampledFunction::new(t, v).unwrap(), 1.0).unwrap();
        assert!(dec.limsup_estimate < 0.0 && dec.limsup_estimate > STRICTNESS_THRESHOLD);
        assert!(!dec.pass);
    }

    #[test]
    fn feasible_alpha_brackets_membership() {
        let f = planted(0.5, 1.0 / 3.0, 1.0, 1e3);
        let r = feasible_alpha(&f, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(r.feasible && r.active_points > 0);
        let at = |alpha| check_membership(&f, ClassParams { alpha, delta: 1.0, gamma: 1.0, a: 1.0, b: 2.0 }).unwrap().pass;
        assert!(at(r.alpha_max * 0.999));
        assert!(!at(r.alpha_max * 1.001));
        let fit = fit_membership(&f, 1.0, 1.0, 1.0, 2.0, 10.0).unwrap();
        assert!(fit.pass);
        assert!(fit.fitted_alpha.unwrap() < r.alpha_max);
        let fit = fit_membership(&f, 1.0, 1.0, 1.0, 2.0, 0.01).unwrap();
        assert_eq!(fit.fitted_alpha, Some(0.01));
        assert!(fit.pass);
    }

    #[test]
    fn validation() {
        assert_eq!(SampledFunction::new(vec![1.0, 1.0], vec![0.0, 0.0]), Err(OdeClassError::NotIncreasing));
        assert_eq!(SampledFunction::new(vec![1.0, 2.0], vec![0.0, -1.0]), Err(OdeClassError::NegativeValue(1)));
        assert!((moment_scale(1.0, 1, 0.5) - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn exponent_is_decreasing(d1 in 0.0f64..1.99, dd in 0.001f64..0.5) {
                let d2 = (d1 + dd).min(1.999);
                let nu = |d| match predicted_exponent(d).unwrap() { DecayExponent::Power { nu } => nu, _ => unreachable!() };
                if d2 > d1 {
                    prop_assert!(nu(d2) < nu(d1));
                }
                prop_assert!(nu(1.999_999) < 1e-6);
            }
        }
    }
}
