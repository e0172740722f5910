//! Covariance `psi(s, t) = E[X(s) X(t)]` and increment second moment
//! `phi(s, t) = E[(X(t) - X(s))^2]`, evaluated by quadrature of their
//! integral representations.
//!
//! `phi` has its own three-integral form and is not computed from `psi`
//! differences, so it stays accurate when `|t - s|` is tiny compared with `s`.

use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};
use crate::params::{ModelParams, Variant};
use crate::quadrature::{integrate_interval, integrate_pieces, IntegralResult, QuadratureSpec};
use crate::special::{beta, normalization_c, pow_diff};

/// Parameters, their normalization constant and the quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelContext {
    pub params: ModelParams,
    pub c: f64,
    pub spec: QuadratureSpec,
}

/// Second moments of the three independent parts of an increment
/// `X(t) - X(s)`: noise on `(0, s)`, on `(s, t)`, and on the past `(-inf, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiDecomposition {
    pub c1_sq: f64,
    pub c2_sq: f64,
    pub c3_sq: f64,
}

impl PhiDecomposition {
    pub fn total(&self) -> f64 {
        self.c1_sq + self.c2_sq + self.c3_sq
    }
}

fn check_time(name: &'static str, t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(GfbmError::domain(name, t, "times must be finite and nonnegative"));
    }
    Ok(())
}

/// `E[X(s)X(t)]` for standard fractional Brownian motion with unit variance at 1.
pub fn fbm_psi(hurst: f64, s: f64, t: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2))
}

/// `E[(B(t) - B(s))^2]` for standard fractional Brownian motion.
pub fn fbm_phi(hurst: f64, s: f64, t: f64) -> f64 {
    (t - s).abs().powf(2.0 * hurst)
}

impl KernelContext {
    pub fn new(params: ModelParams) -> Result<Self> {
        Self::with_spec(params, QuadratureSpec::precise())
    }

    pub fn with_spec(params: ModelParams, spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let c = normalization_c(&params)?;
        Ok(KernelContext { params, c, spec })
    }

    pub fn hurst(&self) -> f64 {
        self.params.hurst()
    }

    fn alpha(&self) -> f64 {
        self.params.alpha()
    }

    fn gamma(&self) -> f64 {
        self.params.gamma()
    }

    fn c2(&self) -> f64 {
        self.c * self.c
    }

    fn require_rl(&self) -> Result<()> {
        if self.params.variant() != Variant::RiemannLiouville {
            return Err(GfbmError::domain(
                "variant",
                0.0,
                "Riemann-Liouville kernels need a context built for that variant",
            ));
        }
        Ok(())
    }

    /// `int_0^s (t-u)^a (s-u)^a u^{-g} du` for `s <= t`, in `x = s - u`.
    fn overlap_integral(&self, s: f64, t: f64) -> Result<IntegralResult> {
        if s == 0.0 {
            return Ok(IntegralResult::ZERO);
        }
        let (a, g) = (self.alpha(), self.gamma());
        let d = t - s;
        integrate_pieces(
            |n| (d + n.from_left).powf(a) * n.from_left.powf(a) * n.from_right.powf(-g),
            &[d.min(s), s],
            false,
            &self.spec,
        )
    }

    /// `int_0^inf ((t+u)^a - u^a)((s+u)^a - u^a) u^{-g} du`.
    fn past_cross_integral(&self, s: f64, t: f64) -> Result<IntegralResult> {
        let a = self.alpha();
        if s == 0.0 || a == 0.0 {
            return Ok(IntegralResult::ZERO);
        }
        let g = self.gamma();
        integrate_pieces(
            |n| {
                let u = n.from_left;
                pow_diff(t, u, a) * pow_diff(s, u, a) * u.powf(-g)
            },
            &[s, t],
            true,
            &self.spec,
        )
    }

    /// `int_s^t (t-u)^{2a} u^{-g} du`, in `w = u - s`.
    fn fresh_noise_integral(&self, s: f64, t: f64) -> Result<IntegralResult> {
        let (a, g) = (self.alpha(), self.gamma());
        let d = t - s;
        let mut breaks = vec![d];
        if s > 0.0 && s < d {
            breaks.push(s);
        }
        integrate_pieces(
            |n| n.from_right.powf(2.0 * a) * (s + n.from_left).powf(-g),
            &breaks,
            false,
            &self.spec,
        )
    }

    /// `int_0^s ((t-u)^a - (s-u)^a)^2 u^{-g} du`, in `x = s - u`.
    fn reweighted_integral(&self, s: f64, t: f64) -> Result<IntegralResult> {
        let a = self.alpha();
        if s == 0.0 || a == 0.0 {
            return Ok(IntegralResult::ZERO);
        }
        let g = self.gamma();
        let d = t - s;
        integrate_pieces(
            |n| {
                let diff = pow_diff(d, n.from_left, a);
                diff * diff * n.from_right.powf(-g)
            },
            &[d.min(s), s],
            false,
            &self.spec,
        )
    }

    /// `int_0^inf ((t+u)^a - (s+u)^a)^2 u^{-g} du`.
    fn past_increment_integral(&self, s: f64, t: f64) -> Result<IntegralResult> {
        let a = self.alpha();
        if a == 0.0 {
            return Ok(IntegralResult::ZERO);
        }
        let g = self.gamma();
        let d = t - s;
        integrate_pieces(
            |n| {
                let u = n.from_left;
                let diff = pow_diff(d, s + u, a);
                diff * diff * u.powf(-g)
            },
            &[s, d, t],
            true,
            &self.spec,
        )
    }

    /// Covariance `E[X(s) X(t)]`; symmetric, zero when either time is 0.
    pub fn psi(&self, s: f64, t: f64) -> Result<f64> {
        check_time("s", s)?;
        check_time("t", t)?;
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        let overlap = self.overlap_integral(s, t)?;
        let total = match self.params.variant() {
            Variant::FullRange => overlap + self.past_cross_integral(s, t)?,
            Variant::RiemannLiouville => overlap,
        };
        Ok(self.c2() * total.value)
    }

    /// Increment second moment `E[(X(t) - X(s))^2]`.
    pub fn phi(&self, s: f64, t: f64) -> Result<f64> {
        check_time("s", s)?;
        check_time("t", t)?;
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        if s == t {
            return Ok(0.0);
        }
        let d = self.raw_decomposition(s, t)?;
        Ok(d.total())
    }

    fn raw_decomposition(&self, s: f64, t: f64) -> Result<PhiDecomposition> {
        let c2 = self.c2();
        let fresh = self.fresh_noise_integral(s, t)?;
        let reweighted = self.reweighted_integral(s, t)?;
        let past = match self.params.variant() {
            Variant::FullRange => self.past_increment_integral(s, t)?,
            Variant::RiemannLiouville => IntegralResult::ZERO,
        };
        Ok(PhiDecomposition {
            c1_sq: c2 * reweighted.value,
            c2_sq: c2 * fresh.value,
            c3_sq: c2 * past.value,
        })
    }

    /// The three second moments whose sum is `phi(s, t)`, for `0 < s < t`.
    pub fn phi_decomposition(&self, s: f64, t: f64) -> Result<PhiDecomposition> {
        check_time("s", s)?;
        check_time("t", t)?;
        if !(s > 0.0 && s < t) {
            return Err(GfbmError::domain("s", s, "decomposition requires 0 < s < t"));
        }
        self.raw_decomposition(s, t)
    }

    /// Riemann-Liouville covariance `c^2 int_0^s (s-u)^a (t-u)^a u^{-g} du`.
    pub fn psi_rl(&self, s: f64, t: f64) -> Result<f64> {
        self.require_rl()?;
        self.psi(s, t)
    }

    /// Riemann-Liouville increment second moment.
    pub fn phi_rl(&self, s: f64, t: f64) -> Result<f64> {
        self.require_rl()?;
        self.phi(s, t)
    }

    /// Lower bound on `phi(s, t)` for `0 < s < t` and `alpha in (0, 1/2]`.
    ///
    /// For `alpha < 1/2` it is `c^2/(2a+1) ((t+s)/2)^{-g} ((t-s)/2)^{2a+1}`;
    /// at `alpha = 1/2` it is `c^2/((1-g)(2-g)) (t-s)^{2-g}`. The second form
    /// only holds when `t - s` is not small relative to `s`: close to the
    /// diagonal `phi` behaves like `(t-s)^2 log(1/(t-s))`.
    pub fn phi_lower_bound(&self, s: f64, t: f64) -> Result<f64> {
        let (a, g) = (self.alpha(), self.gamma());
        if !(a > 0.0 && a <= 0.5) {
            return Err(GfbmError::domain("alpha", a, "lower bound needs alpha in (0, 1/2]"));
        }
        check_time("s", s)?;
        check_time("t", t)?;
        if !(s > 0.0 && s < t) {
            return Err(GfbmError::domain("s", s, "lower bound requires 0 < s < t"));
        }
        let bound = if a < 0.5 {
            self.c2() / (2.0 * a + 1.0) * (0.5 * (t + s)).powf(-g) * (0.5 * (t - s)).powf(2.0 * a + 1.0)
        } else {
            self.c2() / ((1.0 - g) * (2.0 - g)) * (t - s).powf(2.0 - g)
        };
        Ok(bound)
    }

    /// Variance of the derivative process `dX/dt` at time `t > 0`; it exists
    /// only for `alpha > 1/2`.
    pub fn derivative_variance(&self, t: f64) -> Result<f64> {
        let (a, g) = (self.alpha(), self.gamma());
        if a <= 0.5 {
            return Err(GfbmError::domain(
                "alpha",
                a,
                "paths are not differentiable for alpha <= 1/2",
            ));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(GfbmError::domain("t", t, "derivative variance needs t > 0"));
        }
        let p = 2.0 * (a - 1.0);
        let local = integrate_interval(|n| n.from_right.powf(p) * n.from_left.powf(-g), 0.0, 1.0, &self.spec)?;
        let past = match self.params.variant() {
            Variant::FullRange => integrate_pieces(
                |n| (1.0 + n.from_left).powf(p) * n.from_left.powf(-g),
                &[1.0],
                true,
                &self.spec,
            )?,
            Variant::RiemannLiouville => IntegralResult::ZERO,
        };
        let hurst = self.hurst();
        Ok(self.c2() * a * a * t.powf(2.0 * hurst - 2.0) * (local + past).value)
    }

    /// `c^2 (c3 + c4 + c5)`, the explicit constant of the Hölder bound
    /// `phi(s, t) <= C |t - s|^{2H}`. `None` at `gamma = 0`, where the
    /// first constant `4 Beta(1-g, g)` is infinite.
    pub fn holder_constant(&self) -> Option<f64> {
        let (a, g) = (self.alpha(), self.gamma());
        if g == 0.0 {
            return None;
        }
        let c3 = 4.0 * beta(1.0 - g, g).ok()?;
        let c4 = beta(1.0 + 2.0 * a, 1.0 - g).ok()?;
        let c5 = if self.params.variant() == Variant::RiemannLiouville {
            0.0
        } else if a > 0.0 {
            1.0 / (1.0 - g) + a * a / (1.0 + g - 2.0 * a)
        } else if a < 0.0 {
            let (at, gt) = (-a, g - 2.0 * a);
            1.0 / (1.0 - gt) + at * at / (1.0 + gt - 2.0 * at)
        } else {
            0.0
        };
        Some(self.c2() * (c3 + c4 + c5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ctx(alpha: f64, gamma: f64) -> KernelContext {
        KernelContext::new(ModelParams::new(alpha, gamma, Variant::FullRange).unwrap()).unwrap()
    }

    fn rl(alpha: f64, gamma: f64) -> KernelContext {
        KernelContext::new(ModelParams::new(alpha, gamma, Variant::RiemannLiouville).unwrap()).unwrap()
    }

    const PAIRS: [(f64, f64); 6] = [
        (0.0, 0.0),
        (0.25, 0.5),
        (-0.1, 0.3),
        (0.625, 0.75),
        (0.7, 0.6),
        (0.3, 0.0),
    ];

    #[test]
    fn psi_at_zero_vanishes() {
        for (a, g) in PAIRS {
            assert_eq!(ctx(a, g).psi(0.0, 1.3).unwrap(), 0.0);
            assert_eq!(ctx(a, g).psi(2.0, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn diagonal_is_power_law() {
        for (a, g) in PAIRS {
            let k = ctx(a, g);
            for &t in &[0.01f64, 0.5, 1.0, 3.7] {
                let expect = t.powf(2.0 * k.hurst());
                assert_relative_eq!(k.psi(t, t).unwrap(), expect, max_relative = 1e-9);
                assert_relative_eq!(k.phi(0.0, t).unwrap(), expect, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn fbm_covariance_closed_form() {
        let k = ctx(0.3, 0.0);
        let h = k.hurst();
        assert_relative_eq!(k.psi(1.0, 2.0).unwrap(), 2f64.powf(2.0 * h - 1.0), max_relative = 1e-9);
        for &(s, t) in &[(0.1, 0.2), (0.5, 3.0), (2.0, 2.001)] {
            assert_relative_eq!(k.psi(s, t).unwrap(), fbm_psi(h, s, t), max_relative = 1e-9);
            assert_relative_eq!(k.phi(s, t).unwrap(), fbm_phi(h, s, t), max_relative = 1e-9);
        }
    }

    #[test]
    fn phi_zero_on_diagonal_and_symmetric() {
        let k = ctx(0.25, 0.5);
        assert_eq!(k.phi(0.7, 0.7).unwrap(), 0.0);
        assert_eq!(k.phi(0.2, 0.9).unwrap(), k.phi(0.9, 0.2).unwrap());
        assert_eq!(k.psi(0.2, 0.9).unwrap(), k.psi(0.9, 0.2).unwrap());
    }

    #[test]
    fn phi_matches_psi_bilinearity() {
        for (a, g) in PAIRS {
            let k = ctx(a, g);
            for &(s, t) in &[(0.2, 0.9), (1.0, 1.5), (0.05, 2.0)] {
                let via_psi = k.psi(s, s).unwrap() + k.psi(t, t).unwrap() - 2.0 * k.psi(s, t).unwrap();
                assert_relative_eq!(k.phi(s, t).unwrap(), via_psi, max_relative = 1e-7, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn decomposition_sums_to_phi_and_obeys_bounds() {
        for (a, g) in [(0.25, 0.5), (-0.1, 0.3), (0.625, 0.75)] {
            let k = ctx(a, g);
            let h2 = 2.0 * k.hurst();
            let c4 = beta(1.0 + 2.0 * a, 1.0 - g).unwrap();
            for &(s, t) in &[(0.2, 0.9), (1.0, 1.001), (0.001, 1.0)] {
                let d = k.phi_decomposition(s, t).unwrap();
                assert!(d.c1_sq >= 0.0 && d.c2_sq >= 0.0 && d.c3_sq >= 0.0);
                let via_psi = k.psi(s, s).unwrap() + k.psi(t, t).unwrap() - 2.0 * k.psi(s, t).unwrap();
                assert_relative_eq!(d.total(), via_psi, max_relative = 1e-7, epsilon = 1e-12);
                assert!(d.c2_sq <= k.c * k.c * c4 * (t - s).powf(h2) * (1.0 + 1e-10));
                assert!(d.total() <= k.holder_constant().unwrap() * (t - s).powf(h2));
            }
        }
        assert!(ctx(0.25, 0.5).phi_decomposition(0.0, 1.0).is_err());
    }

    #[test]
    fn self_similarity() {
        for (a, g) in PAIRS {
            let k = ctx(a, g);
            let h2 = 2.0 * k.hurst();
            for &r in &[0.5f64, 2.0, 10.0] {
                for &(s, t) in &[(0.3, 0.8), (1.0, 1.1)] {
                    let lhs = k.psi(r * s, r * t).unwrap();
                    assert_relative_eq!(lhs, r.powf(h2) * k.psi(s, t).unwrap(), max_relative = 1e-8);
                    let lhs = k.phi(r * s, r * t).unwrap();
                    assert_relative_eq!(lhs, r.powf(h2) * k.phi(s, t).unwrap(), max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn increments_not_stationary_with_noise_weight() {
        let k = ctx(0.25, 0.5);
        let base = k.phi(0.0, 0.1).unwrap();
        let gap = (k.phi(0.5, 0.6).unwrap() - base).abs();
        assert!(gap > 1e-3, "gap {gap}");
        let k = ctx(0.25, 0.0);
        let gap = (k.phi(0.5, 0.6).unwrap() - k.phi(0.0, 0.1).unwrap()).abs();
        assert!(gap < 1e-10, "gap {gap}");
    }

    #[test]
    fn small_increment_has_no_cancellation() {
        let k = ctx(0.25, 0.5);
        let (s, h) = (1.0, 1e-9);
        let phi = k.phi(s, s + h).unwrap();
        // locally the noise has intensity s^{-g}: phi ~ h^{2a+1} s^{-g} / (2a+1) times c^2 at leading order
        assert!(phi > 0.0);
        assert!(phi >= k.phi_lower_bound(s, s + h).unwrap());
    }

    #[test]
    fn half_alpha_bound_fails_near_diagonal() {
        // phi ~ (t-s)^2 log(1/(t-s)) near the diagonal, below (t-s)^{2-g}
        let k = ctx(0.5, 0.5);
        assert!(k.phi_lower_bound(0.9, 0.95).unwrap() > k.phi(0.9, 0.95).unwrap());
        assert!(k.phi_lower_bound(0.1, 0.2).unwrap() <= k.phi(0.1, 0.2).unwrap());
    }

    #[test]
    fn lower_bound_below_phi() {
        for (a, g) in [(0.25, 0.5), (0.1, 0.9), (0.45, 0.2), (0.3, 0.0)] {
            let k = ctx(a, g);
            for &(s, t) in &[(0.1, 0.2), (0.5, 1.0), (0.9, 0.95), (0.01, 1.0)] {
                let lb = k.phi_lower_bound(s, t).unwrap();
                assert!(lb <= k.phi(s, t).unwrap(), "{a} {g} {s} {t}");
            }
            assert!(k.phi_lower_bound(0.5, 0.5 + 1e-12).unwrap() < 1e-10);
        }
        assert!(ctx(0.6, 0.5).phi_lower_bound(0.1, 0.2).is_err());
        assert!(ctx(-0.1, 0.3).phi_lower_bound(0.1, 0.2).is_err());
    }

    #[test]
    fn half_alpha_bound_exponent() {
        let k = ctx(0.5, 0.4);
        let r = k.phi_lower_bound(0.5, 0.7).unwrap() / k.phi_lower_bound(0.5, 0.6).unwrap();
        assert_relative_eq!(r, 2f64.powf(2.0 - 0.4), max_relative = 1e-12);
    }

    #[test]
    fn derivative_variance_matches_beta_closed_form() {
        for (a, g) in [(0.7, 0.6), (0.6, 0.5), (0.55, 0.9)] {
            let k = ctx(a, g);
            let expected =
                k.c * k.c * a * a * (beta(1.0 - g, 2.0 * a - 1.0).unwrap() + beta(1.0 - g, 1.0 + g - 2.0 * a).unwrap());
            let v1 = k.derivative_variance(1.0).unwrap();
            assert_relative_eq!(v1, expected, max_relative = 1e-8);
            let v2 = k.derivative_variance(2.0).unwrap();
            assert_relative_eq!(v2 / v1, 2f64.powf(2.0 * k.hurst() - 2.0), max_relative = 1e-10);
        }
        assert!(ctx(0.5, 0.5).derivative_variance(1.0).is_err());
    }

    #[test]
    fn riemann_liouville_kernels() {
        let k = rl(0.25, 0.5);
        assert_eq!(k.psi_rl(0.0, 1.0).unwrap(), 0.0);
        for &t in &[0.3f64, 1.0, 2.5] {
            assert_relative_eq!(k.psi_rl(t, t).unwrap(), t.powf(2.0 * k.hurst()), max_relative = 1e-9);
        }
        let (s, t) = (0.4, 1.1);
        let via_psi = k.psi_rl(s, s).unwrap() + k.psi_rl(t, t).unwrap() - 2.0 * k.psi_rl(s, t).unwrap();
        assert_relative_eq!(k.phi_rl(s, t).unwrap(), via_psi, max_relative = 1e-8);
        assert!(ctx(0.25, 0.5).psi_rl(0.1, 0.2).is_err());
    }

    #[test]
    fn negative_times_rejected() {
        assert!(ctx(0.1, 0.1).psi(-1.0, 1.0).is_err());
        assert!(ctx(0.1, 0.1).phi(1.0, f64::NAN).is_err());
    }
}
