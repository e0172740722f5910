//! Gamma, beta and the variance constant `kappa(alpha, gamma)`.
//!
//! `kappa` is available by two independent routes: the closed form in terms
//! of gamma functions at (possibly negative) arguments, and direct quadrature
//! of the two variance integrals. The normalization `c = kappa^{-1/2}` makes
//! `Var X(t) = t^{2H}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};
use crate::params::{ModelParams, Variant};
use crate::quadrature::{integrate_interval, integrate_pieces, IntegralResult, QuadratureSpec};

/// Distance below which an argument counts as a nonpositive integer.
pub const POLE_TOLERANCE: f64 = 1e-12;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Sign of a gamma function value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

fn is_pole(x: f64) -> bool {
    x <= POLE_TOLERANCE && (x - x.round()).abs() <= POLE_TOLERANCE
}

/// `sin(pi x)` with exact argument reduction.
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (0.5 * x).round();
    // r in [-1, 1]
    if r.abs() <= 0.25 {
        (PI * r).sin()
    } else if r > 0.75 {
        (PI * (1.0 - r)).sin()
    } else if r < -0.75 {
        -(PI * (1.0 + r)).sin()
    } else if r > 0.0 {
        (PI * (0.5 - r)).cos()
    } else {
        -(PI * (0.5 + r)).cos()
    }
}

fn ln_gamma_positive(x: f64) -> f64 {
    debug_assert!(x >= 0.5);
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// `ln |Gamma(x)|` and the sign of `Gamma(x)`.
pub fn log_gamma(x: f64) -> Result<(f64, Sign)> {
    if x.is_nan() {
        return Err(GfbmError::domain("x", x, "NaN argument"));
    }
    if is_pole(x) {
        return Err(GfbmError::Pole(x));
    }
    if x == 1.0 || x == 2.0 {
        return Ok((0.0, Sign::Positive));
    }
    if x >= 0.5 {
        return Ok((ln_gamma_positive(x), Sign::Positive));
    }
    // Gamma(x) Gamma(1 - x) = pi / sin(pi x)
    let s = sin_pi(x);
    let lg = PI.ln() - s.abs().ln() - ln_gamma_positive(1.0 - x);
    let sign = if s < 0.0 { Sign::Negative } else { Sign::Positive };
    Ok((lg, sign))
}

/// `Gamma(x)` for real `x` away from the poles.
pub fn gamma(x: f64) -> Result<f64> {
    let (lg, sign) = log_gamma(x)?;
    Ok(sign.as_f64() * lg.exp())
}

/// `Beta(a, b) = Gamma(a) Gamma(b) / Gamma(a + b)` for `a, b > 0`.
pub fn beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(GfbmError::domain("a", a, "Beta requires a > 0"));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(GfbmError::domain("b", b, "Beta requires b > 0"));
    }
    let (la, _) = log_gamma(a)?;
    let (lb, _) = log_gamma(b)?;
    let (lab, _) = log_gamma(a + b)?;
    Ok((la + lb - lab).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaRoute {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub value: f64,
    pub route: KappaRoute,
    pub abs_error_estimate: f64,
}

/// `(x + a)^p - x^p` for `x, a > 0`, without cancellation.
#[inline]
pub(crate) fn pow_diff(a: f64, x: f64, p: f64) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    x.powf(p) * (p * (a / x).ln_1p()).exp_m1()
}

/// `kappa = Beta(1-g, 2a+1) + [G(1-g)/G(-2a) - 2 G(1+a-g)/G(-a)] G(-1-2a+g)`.
///
/// Fails with [`GfbmError::Pole`] whenever `-2a`, `-a` or `-1-2a+g` is a
/// nonpositive integer; this covers `alpha = 0` and every `H = 1/2` pair.
pub fn kappa_closed_form(params: &ModelParams) -> Result<KappaResult> {
    let (a, g) = (params.alpha(), params.gamma());
    for arg in [-2.0 * a, -a, -1.0 - 2.0 * a + g] {
        if is_pole(arg) {
            return Err(GfbmError::Pole(arg));
        }
    }
    let b = beta(1.0 - g, 2.0 * a + 1.0)?;
    let bracket = gamma(1.0 - g)? / gamma(-2.0 * a)? - 2.0 * gamma(1.0 + a - g)? / gamma(-a)?;
    let value = b + bracket * gamma(-1.0 - 2.0 * a + g)?;
    Ok(KappaResult {
        value,
        route: KappaRoute::ClosedForm,
        abs_error_estimate: 64.0 * f64::EPSILON * value.abs().max(b),
    })
}

/// `int_0^1 (1-v)^{2a} v^{-g} dv`, the variance of the one-sided part.
pub(crate) fn local_variance_integral(alpha: f64, gamma: f64, spec: &QuadratureSpec) -> Result<IntegralResult> {
    integrate_interval(
        |n| n.from_right.powf(2.0 * alpha) * n.from_left.powf(-gamma),
        0.0,
        1.0,
        spec,
    )
}

/// `int_0^inf [(1+v)^a - v^a]^2 v^{-g} dv`, the contribution of the past.
pub(crate) fn past_variance_integral(alpha: f64, gamma: f64, spec: &QuadratureSpec) -> Result<IntegralResult> {
    if alpha == 0.0 {
        return Ok(IntegralResult::ZERO);
    }
    integrate_pieces(
        |n| {
            let d = pow_diff(1.0, n.from_left, alpha);
            d * d * n.from_left.powf(-gamma)
        },
        &[1.0],
        true,
        spec,
    )
}

/// `kappa` by direct quadrature of both variance integrals.
pub fn kappa_quadrature(params: &ModelParams, spec: &QuadratureSpec) -> Result<KappaResult> {
    let (a, g) = (params.alpha(), params.gamma());
    let local = local_variance_integral(a, g, spec)?;
    let past = past_variance_integral(a, g, spec)?;
    let total = local + past;
    Ok(KappaResult {
        value: total.value,
        route: KappaRoute::Quadrature,
        abs_error_estimate: total.abs_error_estimate,
    })
}

/// Closed form with quadrature fallback at poles.
pub fn kappa(params: &ModelParams, spec: &QuadratureSpec) -> Result<KappaResult> {
    match kappa_closed_form(params) {
        Ok(k) => Ok(k),
        Err(GfbmError::Pole(_)) => kappa_quadrature(params, spec),
        Err(e) => Err(e),
    }
}

/// `c = kappa^{-1/2}` for the full-range process, `Beta(1-g, 2a+1)^{-1/2}`
/// for the Riemann-Liouville variant.
pub fn normalization_c(params: &ModelParams) -> Result<f64> {
    match params.variant() {
        Variant::FullRange => Ok(kappa(params, &QuadratureSpec::precise())?.value.powf(-0.5)),
        Variant::RiemannLiouville => Ok(beta(1.0 - params.gamma(), 2.0 * params.alpha() + 1.0)?.powf(-0.5)),
    }
}
