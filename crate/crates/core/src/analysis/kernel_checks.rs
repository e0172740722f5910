//! Deterministic checks built directly on the covariance kernels.

use rayon::prelude::*;

use super::{fit_slope, ReportBuilder, VerificationReport};
use crate::error::{GfbmError, Result};
use crate::kernels::KernelContext;
use crate::simulation::Grid;

fn scan_points(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

fn upper_pairs(len: usize) -> Vec<(usize, usize)> {
    (0..len).flat_map(|i| (i + 1..len).map(move |j| (i, j))).collect()
}

fn holder_sup(ctx: &KernelContext, horizon: f64, n: usize) -> Result<f64> {
    let pts = scan_points(horizon, n);
    let h2 = 2.0 * ctx.hurst();
    let ratios: Vec<f64> = upper_pairs(pts.len())
        .into_par_iter()
        .map(|(i, j)| Ok(ctx.phi(pts[i], pts[j])? / (pts[j] - pts[i]).powf(h2)))
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Supremum of `phi(s, t) / |t - s|^{2H}` over an `(n+1)`-point grid on
/// `[0, T]` and over the grid twice as fine. Passes when both are finite and
/// differ by less than 20%. The diagonal is excluded.
pub fn holder_ratio_scan(ctx: &KernelContext, horizon: f64, n: usize) -> Result<VerificationReport> {
    let report = ReportBuilder::start("holder_ratio_scan", "Hölder bound: phi(s,t) <= C_T |t-s|^{2H} on [0,T]");
    if n < 32 {
        return Err(GfbmError::domain(
            "n",
            n as f64,
            "the scan needs at least 32 grid steps",
        ));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(GfbmError::domain("horizon", horizon, "must be positive"));
    }
    let coarse = holder_sup(ctx, horizon, n)?;
    let fine = holder_sup(ctx, horizon, 2 * n)?;
    let change = (fine - coarse).abs() / coarse;
    let passed = coarse.is_finite() && fine.is_finite() && change < 0.2;
    Ok(report.finish(vec![coarse, fine, change], 0.0, 0.2, passed))
}

/// Minimum of `phi / phi_lower_bound` over grid pairs `0 < s < t <= T`.
/// Passes when the lower bound holds everywhere (ratio at least 1).
pub fn lower_bound_check(ctx: &KernelContext, horizon: f64, n: usize) -> Result<VerificationReport> {
    let report = ReportBuilder::start(
        "lower_bound_check",
        "Non-differentiability lower bound on phi(s,t) for alpha in (0, 1/2]",
    );
    let pts = scan_points(horizon, n);
    let ratios: Vec<f64> = upper_pairs(pts.len())
        .into_par_iter()
        .filter(|&(i, _)| i > 0)
        .map(|(i, j)| Ok(ctx.phi(pts[i], pts[j])? / ctx.phi_lower_bound(pts[i], pts[j])?))
        .collect::<Result<_>>()?;
    if ratios.is_empty() {
        return Err(GfbmError::InsufficientData("no pairs with 0 < s < t".into()));
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9;
    Ok(report.finish(vec![min], 1.0, tol, min >= 1.0 - tol))
}

/// `max_s |phi(s, s+h) - phi(0, h)|`. For `gamma > 0` the check passes when
/// the gap exceeds 1e-3 (increments are not stationary); for `gamma = 0`
/// when it is below 1e-8.
pub fn nonstationarity_gap(ctx: &KernelContext, h: f64, s_values: &[f64]) -> Result<VerificationReport> {
    let report = ReportBuilder::start(
        "nonstationarity_gap",
        "Increments are second-order stationary only when gamma = 0",
    );
    if !(h > 0.0 && h.is_finite()) {
        return Err(GfbmError::domain("h", h, "increment length must be positive"));
    }
    if s_values.is_empty() {
        return Err(GfbmError::InsufficientData("no start times given".into()));
    }
    if let Some(&s) = s_values.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(GfbmError::domain("s", s, "start times must be positive"));
    }
    let base = ctx.phi(0.0, h)?;
    let gaps: Vec<f64> = s_values
        .par_iter()
        .map(|&s| Ok((ctx.phi(s, s + h)? - base).abs()))
        .collect::<Result<_>>()?;
    let gap = gaps.into_iter().fold(0.0, f64::max);
    let (target, passed) = if ctx.params.gamma() > 0.0 {
        (1e-3, gap > 1e-3)
    } else {
        (1e-8, gap < 1e-8)
    };
    Ok(report.finish(vec![gap], target, target, passed))
}

/// `max |psi(r s, r t) / r^{2H} - psi(s, t)|` over grid pairs and `r`.
/// Passes below 1e-6.
pub fn c1_scaling_check(ctx: &KernelContext, r_values: &[f64], grid: &Grid) -> Result<VerificationReport> {
    let report = ReportBuilder::start("c1_scaling_check", "Covariance scaling: psi(rs, rt) = r^{2H} psi(s, t)");
    if let Some(&r) = r_values.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(GfbmError::domain("r", r, "scale factors must be positive"));
    }
    let times = grid.times();
    let h2 = 2.0 * ctx.hurst();
    let pairs: Vec<(usize, usize)> = (0..times.len())
        .flat_map(|i| (i..times.len()).map(move |j| (i, j)))
        .collect();
    let errors: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (s, t) = (times[i], times[j]);
            let base = ctx.psi(s, t)?;
            let mut worst: f64 = 0.0;
            for &r in r_values {
                let scaled = ctx.psi(r * s, r * t)? / r.powf(h2);
                worst = worst.max((scaled - base).abs());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let worst = errors.into_iter().fold(0.0, f64::max);
    Ok(report.finish(vec![worst], 0.0, 1e-6, worst < 1e-6))
}

/// Decay exponent of `psi(n s, m t) / (n m)^H` as `n / m -> 0`.
///
/// It equals `(1 - gamma) / 2` only when `0 <= alpha <= gamma`. For larger
/// `alpha` the past noise shared by both times decays more slowly, giving
/// `(1 + gamma) / 2 - alpha`; for `alpha < 0` the singular kernel near the
/// origin gives `H`.
pub fn c3_asymptotic_slope(alpha: f64, gamma: f64) -> f64 {
    if alpha < 0.0 {
        alpha - 0.5 * gamma + 0.5
    } else {
        (0.5 * (1.0 - gamma)).min(0.5 * (1.0 + gamma) - alpha)
    }
}

/// Fits the slope of `log g` against `log(n/m)` where
/// `g(n, m) = psi(n s, m t) / (n^H m^H)` with `n = 1` and `m` ranging over
/// `ratios`. Passes when `g` decreases and the slope is within 5% of
/// `(1 - gamma) / 2`. Measured values: slope, then `g` for each ratio.
pub fn c3_decay_check(ctx: &KernelContext, s: f64, t: f64, ratios: &[f64]) -> Result<VerificationReport> {
    let report = ReportBuilder::start(
        "c3_decay_check",
        "Decorrelation across scales: psi(ns, mt)/(n m)^H -> 0 like (n/m)^{(1-gamma)/2}",
    );
    if !(s > 0.0 && t > 0.0 && s.is_finite() && t.is_finite()) {
        return Err(GfbmError::domain("s", s.min(t), "s and t must be positive"));
    }
    if ratios.len() < 2 {
        return Err(GfbmError::InsufficientData("need at least two ratios".into()));
    }
    if let Some(&r) = ratios.iter().find(|r| !(**r >= 10.0 && r.is_finite())) {
        return Err(GfbmError::domain("ratio", r, "ratios m/n must be at least 10"));
    }
    let h = ctx.hurst();
    let g: Vec<f64> = ratios
        .par_iter()
        .map(|&m| Ok(ctx.psi(s, m * t)? / m.powf(h)))
        .collect::<Result<_>>()?;
    if g.iter().any(|v| *v <= 0.0) {
        return Err(GfbmError::InsufficientData(
            "covariances must be positive to fit a log-log slope".into(),
        ));
    }
    let x: Vec<f64> = ratios.iter().map(|m| -m.ln()).collect();
    let y: Vec<f64> = g.iter().map(|v| v.ln()).collect();
    let slope = fit_slope(&x, &y)?;
    let target = 0.5 * (1.0 - ctx.params.gamma());
    let tol = 0.05 * target;
    let decreasing = g.windows(2).all(|w| w[1] < w[0]) == ratios.windows(2).all(|w| w[1] > w[0]);
    let passed = decreasing && (slope - target).abs() <= tol;
    let mut measured = vec![slope];
    measured.extend(g);
    Ok(report.finish(measured, target, tol, passed))
}

/// Second moment of the difference quotient, `phi(t, t + h) / h^2`, for
/// `h = 2^-4, ..., 2^-10`.
///
/// For `alpha > 1/2` it passes when the value at `h = 2^-10` is within 10%
/// of the derivative variance at `t`. Otherwise it passes when the log-log
/// slope against `h` is within 0.1 of `2H - 2`. That rate holds at `t = 0`
/// only; at `t > 0` the moment grows like `h^{2 alpha - 1}`.
/// Measured: slope, then the moment for each `h`.
pub fn difference_quotient_check(ctx: &KernelContext, t: f64) -> Result<VerificationReport> {
    let report = ReportBuilder::start(
        "difference_quotient",
        "Differentiability dichotomy: paths are C^1 iff alpha > 1/2 (gamma > 0)",
    );
    if !(t >= 0.0 && t.is_finite()) {
        return Err(GfbmError::domain("t", t, "must be finite and nonnegative"));
    }
    let hs: Vec<f64> = (4..=10).map(|k| 2f64.powi(-k)).collect();
    let moments: Vec<f64> = hs
        .par_iter()
        .map(|&h| Ok(ctx.phi(t, t + h)? / (h * h)))
        .collect::<Result<_>>()?;
    let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let slope = fit_slope(&x, &y)?;
    let mut measured = vec![slope];
    measured.extend(&moments);
    if ctx.params.alpha() > 0.5 {
        let target = ctx.derivative_variance(t)?;
        let last = moments[moments.len() - 1];
        let tol = 0.1 * target;
        Ok(report.finish(measured, target, tol, (last - target).abs() <= tol))
    } else {
        let target = 2.0 * ctx.hurst() - 2.0;
        Ok(report.finish(measured, target, 0.1, (slope - target).abs() <= 0.1))
    }
}
