//! Default configuration of every check, as run by `gfbm verify`.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    c1_scaling_check, c3_decay_check, composition_bound, composition_statistic, difference_quotient_check,
    flil_boundedness, flil_rescaled_paths, holder_ratio_scan, hurst_estimate, ks_two_sample, llil_stability,
    llil_statistic, lower_bound_check, nonstationarity_gap, sample_variance, sigma_closed_form, sigma_composition,
    ReportBuilder, VerificationReport,
};
use crate::error::{GfbmError, Result};
use crate::kernels::KernelContext;
use crate::simulation::{sample_derivative, sample_exact, sample_riemann, Grid, RiemannSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Variance,
    Hurst,
    SelfSimilarity,
    Oracle,
    Derivative,
    DifferenceQuotient,
    Holder,
    LowerBound,
    Nonstationarity,
    C1,
    C3,
    Flil,
    Llil,
    Sigma,
    Composition,
}

impl Check {
    pub const ALL: [Check; 15] = [
        Check::Variance,
        Check::Hurst,
        Check::SelfSimilarity,
        Check::Oracle,
        Check::Derivative,
        Check::DifferenceQuotient,
        Check::Holder,
        Check::LowerBound,
        Check::Nonstationarity,
        Check::C1,
        Check::C3,
        Check::Flil,
        Check::Llil,
        Check::Sigma,
        Check::Composition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Variance => "variance",
            Check::Hurst => "hurst",
            Check::SelfSimilarity => "self_similarity",
            Check::Oracle => "oracle",
            Check::Derivative => "derivative",
            Check::DifferenceQuotient => "difference_quotient",
            Check::Holder => "holder",
            Check::LowerBound => "lower_bound",
            Check::Nonstationarity => "nonstationarity",
            Check::C1 => "c1",
            Check::C3 => "c3",
            Check::Flil => "flil",
            Check::Llil => "llil",
            Check::Sigma => "sigma",
            Check::Composition => "composition",
        }
    }

    /// Why the check does not apply to these parameters, if it does not.
    pub fn inapplicable(self, ctx: &KernelContext) -> Option<&'static str> {
        let a = ctx.params.alpha();
        match self {
            Check::Derivative if a <= 0.5 => Some("derivative paths need alpha > 1/2"),
            Check::LowerBound if !(a > 0.0 && a <= 0.5) => Some("the lower bound is stated for alpha in (0, 1/2]"),
            Check::Llil | Check::Sigma | Check::Composition if a <= 0.0 => {
                Some("the local laws are only asserted for alpha > 0")
            }
            _ => None,
        }
    }
}

impl FromStr for Check {
    type Err = GfbmError;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| GfbmError::Parse(format!("unknown check '{s}'")))
    }
}

/// Parses a comma-separated list of check names.
pub fn parse_checks(list: &str) -> Result<Vec<Check>> {
    let mut out: Vec<Check> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Check::from_str)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(GfbmError::Parse("empty check list".into()));
    }
    Ok(out)
}

/// The checks that apply to `ctx`.
pub fn default_checks(ctx: &KernelContext) -> Vec<Check> {
    Check::ALL
        .into_iter()
        .filter(|c| c.inapplicable(ctx).is_none())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub paths: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            paths: 1000,
            seed: 20240601,
        }
    }
}

/// Runs `checks` and returns their reports sorted by check name.
/// Requesting a check that does not apply is a domain error.
pub fn run_suite(ctx: &KernelContext, checks: &[Check], config: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    if config.paths < 2 {
        return Err(GfbmError::domain(
            "paths",
            config.paths as f64,
            "need at least two paths",
        ));
    }
    for c in checks {
        if let Some(reason) = c.inapplicable(ctx) {
            return Err(GfbmError::domain(
                "alpha",
                ctx.params.alpha(),
                format!("{}: {reason}", c.name()),
            ));
        }
    }
    let mut reports: Vec<VerificationReport> = checks
        .par_iter()
        .map(|&c| {
            let mut r = run_one(ctx, c, config)?;
            r.check_name = c.name().to_string();
            Ok(r)
        })
        .collect::<Result<_>>()?;
    reports.sort_by(|a, b| a.check_name.cmp(&b.check_name));
    Ok(reports)
}

fn with_seed(mut r: VerificationReport, seed: u64) -> VerificationReport {
    r.seed = Some(seed);
    r
}

fn run_one(ctx: &KernelContext, check: Check, cfg: &SuiteConfig) -> Result<VerificationReport> {
    let n = cfg.paths;
    let seed = cfg.seed;
    match check {
        Check::Variance => variance_check(ctx, cfg),
        Check::Hurst => {
            let report = ReportBuilder::start("hurst", "Var X(t) = t^{2H}: log-log variance slope");
            let grid = Grid::new((0..=6).map(|k| if k == 0 { 0.0 } else { 2f64.powi(k - 6) }).collect())?;
            let ens = sample_exact(ctx, &grid, n.max(1000), seed)?;
            let h = hurst_estimate(&ens)?;
            let target = ctx.hurst();
            Ok(with_seed(
                report.finish(vec![h], target, 0.05, (h - target).abs() <= 0.05),
                seed,
            ))
        }
        Check::SelfSimilarity => self_similarity_check(ctx, cfg),
        Check::Oracle => oracle_check(ctx, cfg),
        Check::Derivative => {
            let report = ReportBuilder::start(
                "derivative",
                "dX/dt has variance c^2 a^2 t^{2H-2} [B(1-g,2a-1) + B(1-g,1+g-2a)]",
            );
            let grid = Grid::new(vec![0.5, 1.0])?;
            let ens = sample_derivative(ctx, &grid, &RiemannSpec::default(), n, seed)?;
            let v = sample_variance(&ens.column(1));
            let target = ctx.derivative_variance(1.0)?;
            let tol = 4.0 * target * (2.0 / (n as f64 - 1.0)).sqrt() + 5e-3 * target;
            Ok(with_seed(
                report.finish(vec![v], target, tol, (v - target).abs() <= tol),
                seed,
            ))
        }
        Check::DifferenceQuotient => difference_quotient_check(ctx, 1.0),
        Check::Holder => holder_ratio_scan(ctx, 1.0, 32),
        Check::LowerBound => lower_bound_check(ctx, 1.0, 32),
        Check::Nonstationarity => {
            let s: Vec<f64> = (1..=9).map(|k| 0.1 * k as f64).collect();
            nonstationarity_gap(ctx, 0.1, &s)
        }
        Check::C1 => c1_scaling_check(ctx, &[0.01, 0.5, 2.0, 100.0], &Grid::uniform(4, 1.0)?),
        Check::C3 => c3_decay_check(ctx, 1.0, 1.0, &[10.0, 100.0, 1e3, 1e4]),
        Check::Flil => {
            let base = Grid::uniform(64, 1.0)?;
            let ns = [10.0, 100.0, 1000.0];
            let grid = Grid::with_scaled_copies(&base, &ns)?;
            let ens = sample_exact(ctx, &grid, n, seed)?;
            let rescaled = flil_rescaled_paths(&ens, &ns, &base)?;
            Ok(with_seed(flil_boundedness(&rescaled)?, seed))
        }
        Check::Llil => {
            let base = Grid::uniform(32, 1.0)?;
            let us: Vec<f64> = [-8.0f64, -16.0, -32.0].iter().map(|e| e.exp()).collect();
            let grid = Grid::with_scaled_copies(&base, &us)?;
            let ens = sample_exact(ctx, &grid, n, seed)?;
            let curve = llil_statistic(&ens, &us, &base)?;
            Ok(with_seed(llil_stability(&curve)?, seed))
        }
        Check::Sigma => {
            let report = ReportBuilder::start("sigma", "sigma = b^{H^2} H^{H/2} (H+1)^{-(H+1)/2}");
            let mut worst: f64 = 0.0;
            let mut measured = Vec::new();
            for b in [0.5, 1.0, 2.0] {
                let s = sigma_composition(ctx, b)?;
                worst = worst.max((s - sigma_closed_form(ctx.hurst(), b)).abs());
                measured.push(s);
            }
            measured.insert(0, worst);
            Ok(report.finish(measured, 0.0, 1e-8, worst <= 1e-8))
        }
        Check::Composition => {
            let base = Grid::uniform(64, 1.0)?;
            let factors: Vec<f64> = (1..=12).map(|k| 2f64.powi(-k)).collect();
            let grid = Grid::with_scaled_copies(&base, &factors)?;
            let ens = sample_exact(ctx, &grid, n, seed)?;
            let us = [(-4.0f64).exp(), (-6.0f64).exp()];
            let curve = composition_statistic(&ens, 1.0, &us)?;
            let sigma = sigma_composition(ctx, 1.0)?;
            Ok(with_seed(composition_bound(&curve, sigma)?, seed))
        }
    }
}

/// Sample variance at `t in {0.25, 0.5, 1}` against `t^{2H}`, as z-scores.
fn variance_check(ctx: &KernelContext, cfg: &SuiteConfig) -> Result<VerificationReport> {
    let report = ReportBuilder::start("variance", "Var X(t) = t^{2H}");
    let times = [0.25, 0.5, 1.0];
    let grid = Grid::from_unsorted(times)?;
    let ens = sample_exact(ctx, &grid, cfg.paths, cfg.seed)?;
    let n = cfg.paths as f64;
    let z: Vec<f64> = times
        .iter()
        .map(|&t| {
            let j = grid.index_of(t).expect("time is on the grid");
            let exact = t.powf(2.0 * ctx.hurst());
            (sample_variance(&ens.column(j)) - exact) / (exact * (2.0 / (n - 1.0)).sqrt())
        })
        .collect();
    let passed = z.iter().all(|v| v.abs() <= 4.0);
    Ok(with_seed(report.finish(z, 0.0, 4.0, passed), cfg.seed))
}

/// Two-sample KS tests of `X(t)` against `X(4t)/4^H` from independent
/// ensembles, at `t in {0.25, 0.5, 1}`. Passes when every p-value is at
/// least 0.01. Measured: the p-values.
fn self_similarity_check(ctx: &KernelContext, cfg: &SuiteConfig) -> Result<VerificationReport> {
    let report = ReportBuilder::start("self_similarity", "X(at) and a^H X(t) have the same law");
    let times = [0.25, 0.5, 1.0];
    let a: f64 = 4.0;
    let grid = Grid::from_unsorted(times)?;
    let scaled_grid = Grid::from_unsorted(times.map(|t| a * t))?;
    let ens = sample_exact(ctx, &grid, cfg.paths, cfg.seed)?;
    let other = sample_exact(ctx, &scaled_grid, cfg.paths, cfg.seed.wrapping_add(1))?;
    let factor = a.powf(-ctx.hurst());
    let p: Vec<f64> = (1..=times.len())
        .map(|j| {
            let x = ens.column(j);
            let y: Vec<f64> = other.column(j).iter().map(|v| v * factor).collect();
            Ok(ks_two_sample(&x, &y)?.p_value)
        })
        .collect::<Result<_>>()?;
    let passed = p.iter().all(|v| *v >= 0.01);
    Ok(with_seed(report.finish(p, 0.01, 0.0, passed), cfg.seed))
}

/// Sample variances at `t = 1` from the exact and Riemann samplers on a
/// 16-step grid. Passes when they differ by at most four combined standard
/// errors plus the variance discarded by truncation.
/// Measured: exact variance, Riemann variance, difference.
fn oracle_check(ctx: &KernelContext, cfg: &SuiteConfig) -> Result<VerificationReport> {
    let report = ReportBuilder::start(
        "oracle",
        "Exact factorization and direct discretization sample the same process",
    );
    let grid = Grid::uniform(16, 1.0)?;
    let exact = sample_exact(ctx, &grid, cfg.paths, cfg.seed)?;
    let riemann = sample_riemann(ctx, &grid, &RiemannSpec::default(), cfg.paths, cfg.seed.wrapping_add(1))?;
    let last = grid.len() - 1;
    let ve = sample_variance(&exact.column(last));
    let vr = sample_variance(&riemann.column(last));
    let n = cfg.paths as f64;
    let se = (2.0 / (n - 1.0)).sqrt() * (ve * ve + vr * vr).sqrt();
    let tail = riemann.truncation.map_or(0.0, |t| t.tail_variance);
    let tol = 4.0 * se + tail;
    let diff = vr - ve;
    Ok(with_seed(
        report.finish(vec![ve, vr, diff], 0.0, tol, diff.abs() <= tol),
        cfg.seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ModelParams, Variant};

    fn ctx(a: f64, g: f64) -> KernelContext {
        KernelContext::new(ModelParams::new(a, g, Variant::FullRange).unwrap()).unwrap()
    }

    #[test]
    fn parse_round_trips_names() {
        for c in Check::ALL {
            assert_eq!(c.name().parse::<Check>().unwrap(), c);
        }
        assert_eq!(parse_checks("c3, c1,c1").unwrap(), vec![Check::C1, Check::C3]);
        assert!(parse_checks("c1,bogus").is_err());
        assert!(parse_checks(" , ").is_err());
    }

    #[test]
    fn defaults_follow_the_parameter_region() {
        let rough = default_checks(&ctx(-0.1, 0.3));
        assert!(!rough.contains(&Check::Llil) && !rough.contains(&Check::Derivative));
        let smooth = default_checks(&ctx(0.7, 0.6));
        assert!(smooth.contains(&Check::Derivative) && !smooth.contains(&Check::LowerBound));
        let e = run_suite(&ctx(-0.1, 0.3), &[Check::Sigma], &SuiteConfig::default()).unwrap_err();
        assert!(e.is_domain_error());
    }

    #[test]
    fn suite_reports_are_sorted_and_reproducible() {
        let c = ctx(0.25, 0.5);
        let checks = [Check::Variance, Check::C1, Check::Oracle];
        let cfg = SuiteConfig { paths: 400, seed: 9 };
        let a = run_suite(&c, &checks, &cfg).unwrap();
        let b = run_suite(&c, &checks, &cfg).unwrap();
        let names: Vec<&str> = a.iter().map(|r| r.check_name.as_str()).collect();
        assert_eq!(names, vec!["c1", "oracle", "variance"]);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.measured, y.measured);
            assert_eq!(x.passed, y.passed);
        }
        assert!(a.iter().all(|r| r.passed), "{a:?}");
    }
}
