//! Iterated-logarithm statistics of simulated paths and the composition
//! constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_slope, quantile, ReportBuilder, VerificationReport};
use crate::error::{GfbmError, Result};
use crate::kernels::KernelContext;
use crate::simulation::{interpolate, Grid, PathEnsemble};

/// Quantile levels reported by the curve statistics.
pub const LEVELS: [f64; 2] = [0.5, 0.95];

/// Paths `Z_n(t) = X(n t) / sqrt(2 n^{2H} log log n)` on a base grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledEnsemble {
    pub n: f64,
    pub times: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
    pub sup_norms: Vec<f64>,
}

/// Quantiles of a per-path statistic for each scale `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    pub u_values: Vec<f64>,
    pub levels: Vec<f64>,
    /// `quantiles[k][l]` is level `levels[l]` at `u_values[k]`.
    pub quantiles: Vec<Vec<f64>>,
}

impl QuantileCurve {
    fn from_samples(u_values: &[f64], samples: Vec<Vec<f64>>) -> Self {
        let quantiles = samples
            .iter()
            .map(|s| LEVELS.iter().map(|&p| quantile(s, p)).collect())
            .collect();
        QuantileCurve {
            u_values: u_values.to_vec(),
            levels: LEVELS.to_vec(),
            quantiles,
        }
    }

    /// The 95% quantile at each `u`.
    pub fn upper(&self) -> Vec<f64> {
        self.quantiles.iter().map(|q| q[1]).collect()
    }
}

fn require_positive_alpha(ens_alpha: f64) -> Result<()> {
    if ens_alpha <= 0.0 {
        return Err(GfbmError::domain(
            "alpha",
            ens_alpha,
            "the local laws are only asserted for alpha > 0",
        ));
    }
    Ok(())
}

fn check_u_values(u_values: &[f64]) -> Result<()> {
    if u_values.is_empty() {
        return Err(GfbmError::InsufficientData("no scales given".into()));
    }
    let limit = (-1.0f64).exp();
    if let Some(&u) = u_values.iter().find(|u| !(**u > 0.0 && **u < limit)) {
        return Err(GfbmError::domain("u", u, "scales must lie in (0, 1/e)"));
    }
    Ok(())
}

/// Rescales every path of `ensemble` by each `n` on the times of `base`,
/// reading `X(n t)` by linear interpolation.
pub fn flil_rescaled_paths(ensemble: &PathEnsemble, n_values: &[f64], base: &Grid) -> Result<Vec<RescaledEnsemble>> {
    let h = ensemble.params.hurst();
    let e = std::f64::consts::E;
    n_values
        .iter()
        .map(|&n| {
            if !(n > e && n.is_finite()) {
                return Err(GfbmError::domain("n", n, "log log n needs n > e"));
            }
            let scale = (2.0 * n.powf(2.0 * h) * n.ln().ln()).sqrt();
            let paths: Vec<Vec<f64>> = ensemble
                .paths()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|p| {
                    base.times()
                        .iter()
                        .map(|&t| Ok(interpolate(&ensemble.grid, p, n * t)? / scale))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            let sup_norms = paths
                .iter()
                .map(|p| p.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                .collect();
            Ok(RescaledEnsemble {
                n,
                times: base.times().to_vec(),
                paths,
                sup_norms,
            })
        })
        .collect()
}

/// Slope of the log mean sup-norm of the rescaled paths against `log n`.
/// Passes when its magnitude is below 0.05. Measured: slope, then the mean
/// sup-norm for each `n`.
pub fn flil_boundedness(rescaled: &[RescaledEnsemble]) -> Result<VerificationReport> {
    let report = ReportBuilder::start(
        "flil_boundedness",
        "Functional LIL: X(nt)/sqrt(2 n^{2H} log log n) stays bounded as n grows",
    );
    let means: Vec<f64> = rescaled
        .iter()
        .map(|r| r.sup_norms.iter().sum::<f64>() / r.sup_norms.len() as f64)
        .collect();
    let x: Vec<f64> = rescaled.iter().map(|r| r.n.ln()).collect();
    let y: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let slope = fit_slope(&x, &y)?;
    let mut measured = vec![slope];
    measured.extend(means);
    Ok(report.finish(measured, 0.0, 0.05, slope.abs() < 0.05))
}

/// For each `u`, quantiles over paths of
/// `sup_{t in base, t > 0} |X(u t)| / (u^H sqrt(log log 1/u))`.
pub fn llil_statistic(ensemble: &PathEnsemble, u_values: &[f64], base: &Grid) -> Result<QuantileCurve> {
    require_positive_alpha(ensemble.params.alpha())?;
    check_u_values(u_values)?;
    let h = ensemble.params.hurst();
    let times: Vec<f64> = base.times().iter().copied().filter(|t| *t > 0.0).collect();
    if times.is_empty() {
        return Err(GfbmError::InvalidGrid("base grid needs a positive time".into()));
    }
    let paths: Vec<&[f64]> = ensemble.paths().collect();
    let samples = u_values
        .iter()
        .map(|&u| {
            let scale = u.powf(h) * (1.0 / u).ln().ln().sqrt();
            paths
                .par_iter()
                .map(|p| {
                    let mut sup: f64 = 0.0;
                    for &t in &times {
                        sup = sup.max(interpolate(&ensemble.grid, p, u * t)?.abs());
                    }
                    Ok(sup / scale)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileCurve::from_samples(u_values, samples))
}

/// Slope of the log 95% quantile against `log u`; passes when its magnitude
/// is below 0.05. Measured: slope, then the quantile at each `u`.
pub fn llil_stability(curve: &QuantileCurve) -> Result<VerificationReport> {
    let report = ReportBuilder::start(
        "llil_stability",
        "Local LIL: |X(ut)|/(u^H sqrt(log log 1/u)) has a finite limsup as u -> 0",
    );
    let upper = curve.upper();
    let x: Vec<f64> = curve.u_values.iter().map(|u| u.ln()).collect();
    let y: Vec<f64> = upper.iter().map(|q| q.ln()).collect();
    let slope = fit_slope(&x, &y)?;
    let mut measured = vec![slope];
    measured.extend(upper);
    Ok(report.finish(measured, 0.0, 0.05, slope.abs() < 0.05))
}

/// `b^{H^2} H^{H/2} (H+1)^{-(H+1)/2}`, the composition constant when
/// `Var X(t) = t^{2H}`.
pub fn sigma_closed_form(hurst: f64, b: f64) -> f64 {
    b.powf(hurst * hurst) * hurst.powf(0.5 * hurst) * (hurst + 1.0).powf(-0.5 * (hurst + 1.0))
}

/// `sup_{0 <= r <= sqrt(psi(b,b))} sqrt(psi(r,r)) (1 - r^2/psi(b,b))^{1/2}`
/// by golden-section search on `r`, refined to a bracket of 1e-10.
pub fn sigma_composition(ctx: &KernelContext, b: f64) -> Result<f64> {
    require_positive_alpha(ctx.params.alpha())?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(GfbmError::domain("b", b, "must be positive"));
    }
    let var_b = ctx.psi(b, b)?;
    let objective = |r: f64| -> Result<f64> {
        let slack = (1.0 - r * r / var_b).max(0.0);
        Ok((ctx.psi(r, r)? * slack).sqrt())
    };
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, var_b.sqrt());
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while hi - lo > 1e-10 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1)?;
        }
    }
    objective(0.5 * (lo + hi))
}

/// For each `u`, quantiles over paths of
/// `|X(|X(u b)|)| / (u^{H^2} (2 log log 1/u)^{(H+1)/2})`.
pub fn composition_statistic(ensemble: &PathEnsemble, b: f64, u_values: &[f64]) -> Result<QuantileCurve> {
    require_positive_alpha(ensemble.params.alpha())?;
    check_u_values(u_values)?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(GfbmError::domain("b", b, "must be positive"));
    }
    let h = ensemble.params.hurst();
    let paths: Vec<&[f64]> = ensemble.paths().collect();
    let samples = u_values
        .iter()
        .map(|&u| {
            let scale = u.powf(h * h) * (2.0 * (1.0 / u).ln().ln()).powf(0.5 * (h + 1.0));
            paths
                .par_iter()
                .map(|p| {
                    let inner = interpolate(&ensemble.grid, p, u * b)?.abs();
                    Ok(interpolate(&ensemble.grid, p, inner)?.abs() / scale)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileCurve::from_samples(u_values, samples))
}

/// Passes when the 95% quantile at the smallest `u` is at most `1.5 sigma`.
pub fn composition_bound(curve: &QuantileCurve, sigma: f64) -> Result<VerificationReport> {
    let report = ReportBuilder::start(
        "composition_bound",
        "Composition LIL: X(|X(ub)|) normalized has limit set [-sigma, sigma]",
    );
    let (k, _) = curve
        .u_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| GfbmError::InsufficientData("empty curve".into()))?;
    let q = curve.quantiles[k][1];
    let limit = 1.5 * sigma;
    Ok(report.finish(vec![q, sigma], sigma, 0.5 * sigma, q >= 0.0 && q <= limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ModelParams, Variant};
    use crate::simulation::sample_exact;

    fn ctx(a: f64, g: f64) -> KernelContext {
        KernelContext::new(ModelParams::new(a, g, Variant::FullRange).unwrap()).unwrap()
    }

    #[test]
    fn sigma_search_matches_closed_form() {
        for (a, g) in [(0.05, 0.7), (0.25, 0.5), (0.6, 0.5)] {
            let c = ctx(a, g);
            for b in [0.5, 1.0, 2.0] {
                let s = sigma_composition(&c, b).unwrap();
                let exact = sigma_closed_form(c.hurst(), b);
                assert!((s - exact).abs() < 1e-8, "({a},{g}) b={b}: {s} vs {exact}");
            }
        }
        let half = sigma_closed_form(0.5, 1.0);
        assert!((half - 0.5f64.powf(0.25) * 1.5f64.powf(-0.75)).abs() < 1e-15);
    }

    #[test]
    fn sigma_increases_with_b() {
        let c = ctx(0.25, 0.5);
        let s: Vec<f64> = [0.25, 1.0, 4.0]
            .iter()
            .map(|&b| sigma_composition(&c, b).unwrap())
            .collect();
        assert!(s[0] < s[1] && s[1] < s[2]);
    }

    #[test]
    fn local_laws_need_positive_alpha() {
        let c = ctx(-0.1, 0.3);
        assert!(matches!(
            sigma_composition(&c, 1.0),
            Err(GfbmError::OutOfDomain { name: "alpha", .. })
        ));
        let grid = Grid::uniform(4, 1.0).unwrap();
        let ens = sample_exact(&c, &grid, 5, 1).unwrap();
        assert!(llil_statistic(&ens, &[0.1], &grid).is_err());
        assert!(composition_statistic(&ens, 1.0, &[0.1]).is_err());
    }

    #[test]
    fn flil_rejects_small_n_and_pins_zero() {
        let c = ctx(0.25, 0.5);
        let base = Grid::uniform(4, 1.0).unwrap();
        let grid = Grid::with_scaled_copies(&base, &[10.0]).unwrap();
        let ens = sample_exact(&c, &grid, 20, 4).unwrap();
        assert!(flil_rescaled_paths(&ens, &[2.5], &base).is_err());
        let r = flil_rescaled_paths(&ens, &[10.0], &base).unwrap();
        assert!(r[0].paths.iter().all(|p| p[0] == 0.0));
        assert!(r[0].sup_norms.iter().all(|s| s.is_finite() && *s > 0.0));
        assert!(matches!(
            flil_rescaled_paths(&ens, &[100.0], &base),
            Err(GfbmError::Interpolation { .. })
        ));
    }

    #[test]
    fn llil_rejects_scales_outside_range() {
        let c = ctx(0.25, 0.5);
        let grid = Grid::uniform(4, 1.0).unwrap();
        let ens = sample_exact(&c, &grid, 5, 1).unwrap();
        assert!(llil_statistic(&ens, &[0.5], &grid).is_err());
        assert!(llil_statistic(&ens, &[], &grid).is_err());
    }

    #[test]
    fn composition_is_zero_when_inner_value_is_zero() {
        let c = ctx(0.25, 0.5);
        let grid = Grid::uniform(4, 1.0).unwrap();
        let params = c.params;
        let zeros = PathEnsemble::from_values(
            grid,
            vec![0.0; 10],
            crate::simulation::Method::ExactFactorization,
            0,
            params,
        )
        .unwrap();
        let curve = composition_statistic(&zeros, 1.0, &[0.1]).unwrap();
        assert_eq!(curve.quantiles[0], vec![0.0, 0.0]);
    }

    #[test]
    fn composition_statistic_stays_near_sigma() {
        let c = ctx(0.25, 0.5);
        let base = Grid::uniform(64, 1.0).unwrap();
        let factors: Vec<f64> = (1..=12).map(|k| 2f64.powi(-k)).collect();
        let grid = Grid::with_scaled_copies(&base, &factors).unwrap();
        let ens = sample_exact(&c, &grid, 1000, 17).unwrap();
        let u = [(-4.0f64).exp(), (-6.0f64).exp()];
        let curve = composition_statistic(&ens, 1.0, &u).unwrap();
        let sigma = sigma_composition(&c, 1.0).unwrap();
        let report = composition_bound(&curve, sigma).unwrap();
        assert!(report.passed, "{report:?}");
    }
}
