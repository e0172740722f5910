//! The `(alpha, gamma)` parameter domain and its classification.
//!
//! The process is driven by two exponents: `alpha`, the power of the shot
//! shape kernel, and `gamma`, the power-law weight on the driving noise. The
//! Hurst exponent is derived, `H = alpha - gamma / 2 + 1 / 2`, and is never
//! stored independently.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};

/// Which integral representation the parameters belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Variant {
    /// Two-sided integral over the whole real line.
    #[default]
    #[serde(rename = "full")]
    FullRange,
    /// One-sided integral over `(0, t)` only.
    #[serde(rename = "rl")]
    RiemannLiouville,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::FullRange => f.write_str("full"),
            Variant::RiemannLiouville => f.write_str("rl"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = GfbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::FullRange),
            "rl" => Ok(Variant::RiemannLiouville),
            other => Err(GfbmError::Parse(format!("unknown variant '{other}'"))),
        }
    }
}

/// A validated parameter pair. Construct with [`ModelParams::new`] or
/// [`ModelParams::from_hurst`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    alpha: f64,
    gamma: f64,
    #[serde(default)]
    variant: Variant,
}

#[derive(Deserialize)]
struct RawParams {
    alpha: f64,
    gamma: f64,
    #[serde(default)]
    variant: Variant,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = GfbmError;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.alpha, raw.gamma, raw.variant)
    }
}

impl ModelParams {
    /// Validates `gamma in [0, 1)` and `alpha in (-1/2 + gamma/2, 1/2 + gamma/2)`.
    /// Interval endpoints are rejected exactly.
    pub fn new(alpha: f64, gamma: f64, variant: Variant) -> Result<Self> {
        if !(gamma.is_finite() && (0.0..1.0).contains(&gamma)) {
            return Err(GfbmError::domain("gamma", gamma, "gamma must lie in [0, 1)"));
        }
        let lo = -0.5 + 0.5 * gamma;
        let hi = 0.5 + 0.5 * gamma;
        if !(alpha.is_finite() && alpha > lo && alpha < hi) {
            return Err(GfbmError::domain(
                "alpha",
                alpha,
                format!("alpha must lie in ({lo}, {hi}) for gamma = {gamma}"),
            ));
        }
        Ok(ModelParams { alpha, gamma, variant })
    }

    /// Builds parameters from the Hurst exponent: `alpha = H - 1/2 + gamma/2`.
    pub fn from_hurst(hurst: f64, gamma: f64, variant: Variant) -> Result<Self> {
        if !(hurst.is_finite() && hurst > 0.0 && hurst < 1.0) {
            return Err(GfbmError::domain("hurst", hurst, "H must lie in (0, 1)"));
        }
        if !(gamma.is_finite() && (0.0..1.0).contains(&gamma)) {
            return Err(GfbmError::domain("gamma", gamma, "gamma must lie in [0, 1)"));
        }
        ModelParams::new(hurst - 0.5 + 0.5 * gamma, gamma, variant)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn hurst(&self) -> f64 {
        self.alpha - 0.5 * self.gamma + 0.5
    }

    pub fn with_variant(self, variant: Variant) -> Self {
        ModelParams { variant, ..self }
    }

    pub fn classify(&self) -> RegionLabel {
        classify(self)
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha={} gamma={} variant={} (H={})",
            self.alpha,
            self.gamma,
            self.variant,
            self.hurst()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NonDifferentiable,
    Differentiable,
    Invalid,
}

/// Position of a parameter pair in the `(gamma, alpha)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub regime: Regime,
    pub is_fbm: bool,
    pub is_bm: bool,
    pub h_half_non_bm: bool,
}

/// Paths are C^1 exactly when `1/2 < alpha < 1/2 + gamma/2` with `gamma > 0`;
/// every other valid pair gives nowhere-differentiable paths.
pub fn classify(params: &ModelParams) -> RegionLabel {
    let (alpha, gamma) = (params.alpha, params.gamma);
    let regime = if gamma > 0.0 && alpha > 0.5 && alpha < 0.5 + 0.5 * gamma {
        Regime::Differentiable
    } else {
        Regime::NonDifferentiable
    };
    RegionLabel {
        regime,
        is_fbm: gamma == 0.0,
        is_bm: gamma == 0.0 && alpha == 0.0,
        h_half_non_bm: gamma > 0.0 && alpha == 0.5 * gamma,
    }
}

/// Classifies raw numbers, reporting [`Regime::Invalid`] instead of an error.
pub fn classify_raw(alpha: f64, gamma: f64) -> RegionLabel {
    match ModelParams::new(alpha, gamma, Variant::FullRange) {
        Ok(p) => classify(&p),
        Err(_) => RegionLabel {
            regime: Regime::Invalid,
            is_fbm: false,
            is_bm: false,
            h_half_non_bm: false,
        },
    }
}
