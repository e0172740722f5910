//! Checks of path properties, deterministic and Monte Carlo.
//!
//! Each check produces a [`VerificationReport`]; [`suite`] bundles the
//! default configuration of every check for the command line.

mod kernel_checks;
mod lil;
pub mod suite;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};
use crate::simulation::{Grid, PathEnsemble};

pub use kernel_checks::{
    c1_scaling_check, c3_asymptotic_slope, c3_decay_check, difference_quotient_check, holder_ratio_scan,
    lower_bound_check, nonstationarity_gap,
};
pub use lil::{
    composition_bound, composition_statistic, flil_boundedness, flil_rescaled_paths, llil_stability, llil_statistic,
    sigma_closed_form, sigma_composition, QuantileCurve, RescaledEnsemble,
};

/// Outcome of one check. `passed` is true exactly when `measured` lies within
/// `tolerance` of `target` in the sense the check documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check_name: String,
    pub claim_ref: String,
    pub measured: Vec<f64>,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Wall-clock seconds; the only field that varies between reruns.
    pub runtime: f64,
    /// Seed of the Monte Carlo ensemble, if one was used.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

/// Times a check body and wraps the result.
pub(crate) struct ReportBuilder {
    name: &'static str,
    claim: &'static str,
    started: Instant,
}

impl ReportBuilder {
    pub(crate) fn start(name: &'static str, claim: &'static str) -> Self {
        ReportBuilder {
            name,
            claim,
            started: Instant::now(),
        }
    }

    pub(crate) fn finish(self, measured: Vec<f64>, target: f64, tolerance: f64, passed: bool) -> VerificationReport {
        VerificationReport {
            check_name: self.name.to_string(),
            claim_ref: self.claim.to_string(),
            measured,
            target,
            tolerance,
            passed,
            runtime: self.started.elapsed().as_secs_f64(),
            seed: None,
        }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(GfbmError::InsufficientData(format!(
            "slope fit needs at least two paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(GfbmError::InsufficientData("abscissae are all equal".into()));
    }
    Ok(sxy / sxx)
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Self-similarity index from the growth of the sample variance: half the
/// slope of `log Var X(t)` against `log t` over the positive grid times.
pub fn hurst_estimate(ensemble: &PathEnsemble) -> Result<f64> {
    hurst_from_columns(ensemble.grid.times(), ensemble.num_paths(), |j| ensemble.column(j))
}

/// [`hurst_estimate`] for paths held as rows, e.g. read back from a CSV.
pub fn hurst_estimate_rows(grid: &Grid, rows: &[Vec<f64>]) -> Result<f64> {
    if let Some(bad) = rows.iter().position(|r| r.len() != grid.len()) {
        return Err(GfbmError::InvalidGrid(format!(
            "path {bad} has {} values for {} grid times",
            rows[bad].len(),
            grid.len()
        )));
    }
    hurst_from_columns(grid.times(), rows.len(), |j| rows.iter().map(|r| r[j]).collect())
}

fn hurst_from_columns(times: &[f64], num_paths: usize, column: impl Fn(usize) -> Vec<f64>) -> Result<f64> {
    const MIN_PATHS: usize = 1000;
    if num_paths < MIN_PATHS {
        return Err(GfbmError::InsufficientData(format!(
            "need at least {MIN_PATHS} paths, got {num_paths}"
        )));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (j, &t) in times.iter().enumerate() {
        if t > 0.0 {
            x.push(t.ln());
            y.push(sample_variance(&column(j)).ln());
        }
    }
    if x.len() < 2 {
        return Err(GfbmError::InsufficientData(
            "need at least two positive grid times".into(),
        ));
    }
    Ok(0.5 * fit_slope(&x, &y)?)
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(GfbmError::InsufficientData("both samples must be nonempty".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_tail(lambda),
    })
}

/// `P(K > lambda)` for the Kolmogorov distribution.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelContext;
    use crate::params::{ModelParams, Variant};
    use crate::simulation::{sample_exact, Grid};
    use proptest::prelude::*;

    #[test]
    fn slope_of_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        assert!((fit_slope(&x, &y).unwrap() - 2.5).abs() < 1e-14);
        assert!(fit_slope(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [3.0, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!((quantile(&v, 0.95) - 4.8).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // P(K > 1.36) is the classical 5% point; P(K > 1.63) the 1% point.
        assert!((kolmogorov_tail(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_tail(1.628) - 0.01).abs() < 5e-4);
    }

    #[test]
    fn ks_separates_shifted_samples() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let same: Vec<f64> = (0..400).map(|i| (i as f64 + 0.5) / 400.0).collect();
        let shifted: Vec<f64> = same.iter().map(|v| v + 0.3).collect();
        assert!(ks_two_sample(&a, &same).unwrap().p_value > 0.5);
        let r = ks_two_sample(&a, &shifted).unwrap();
        assert!((r.statistic - 0.3).abs() < 0.01);
        assert!(r.p_value < 1e-10);
    }

    fn hurst_of(a: f64, g: f64) -> f64 {
        let ctx = KernelContext::new(ModelParams::new(a, g, Variant::FullRange).unwrap()).unwrap();
        let grid = Grid::new((0..=6).map(|k| if k == 0 { 0.0 } else { 2f64.powi(k - 6) }).collect()).unwrap();
        let ens = sample_exact(&ctx, &grid, 4000, 99).unwrap();
        hurst_estimate(&ens).unwrap()
    }

    #[test]
    fn hurst_estimates_match_examples() {
        assert!((hurst_of(0.25, 0.5) - 0.5).abs() < 0.05);
        assert!((hurst_of(0.0, 0.0) - 0.5).abs() < 0.05);
        assert!((hurst_of(0.625, 0.75) - 0.75).abs() < 0.05);
    }

    #[test]
    fn hurst_needs_enough_paths() {
        let ctx = KernelContext::new(ModelParams::new(0.0, 0.0, Variant::FullRange).unwrap()).unwrap();
        let ens = sample_exact(&ctx, &Grid::uniform(4, 1.0).unwrap(), 10, 1).unwrap();
        assert!(matches!(hurst_estimate(&ens), Err(GfbmError::InsufficientData(_))));
    }

    #[test]
    fn hurst_invariant_under_self_similar_rescaling() {
        let ctx = KernelContext::new(ModelParams::new(0.25, 0.5, Variant::FullRange).unwrap()).unwrap();
        let grid = Grid::new(vec![0.0, 0.125, 0.25, 0.5, 1.0]).unwrap();
        let ens = sample_exact(&ctx, &grid, 1000, 5).unwrap();
        let h = hurst_estimate(&ens).unwrap();
        let a: f64 = 3.0;
        let scaled_grid = Grid::new(grid.times().iter().map(|t| a * t).collect()).unwrap();
        let scaled: Vec<f64> = ens.values().iter().map(|v| v * a.powf(ctx.hurst())).collect();
        let ens2 = PathEnsemble::from_values(scaled_grid, scaled, ens.method, ens.seed, ens.params).unwrap();
        assert!((hurst_estimate(&ens2).unwrap() - h).abs() < 1e-12);
        let rows: Vec<Vec<f64>> = ens.paths().map(|p| p.to_vec()).collect();
        assert_eq!(hurst_estimate_rows(&grid, &rows).unwrap(), h);
    }

    proptest! {
        #[test]
        fn quantile_is_monotone(mut v in proptest::collection::vec(-1e3f64..1e3, 2..40), p in 0.0f64..1.0, q in 0.0f64..1.0) {
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(quantile(&v, lo) <= quantile(&v, hi));
            v.sort_by(f64::total_cmp);
            prop_assert!(quantile(&v, lo) >= v[0] && quantile(&v, hi) <= v[v.len() - 1]);
        }

        #[test]
        fn ks_statistic_in_unit_interval(a in proptest::collection::vec(-5f64..5.0, 1..50), b in proptest::collection::vec(-5f64..5.0, 1..50)) {
            let r = ks_two_sample(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.statistic));
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            prop_assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
        }
    }
}
