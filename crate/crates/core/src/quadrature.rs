//! Double-exponential (tanh-sinh) quadrature for integrands with power-law
//! endpoint singularities, plus a semi-infinite variant for algebraically
//! decaying tails.
//!
//! Integrands receive a [`Node`] rather than a bare abscissa: the distances
//! to both interval endpoints are computed from the transformation itself, so
//! factors such as `(s - u)^alpha` can be evaluated without the cancellation
//! that `s - x` suffers when `x` sits a few ulps away from `s`.

use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

/// Stopping rule shared by every integral in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Number of step halvings after the initial unit step.
    pub max_levels: u32,
    /// Expected power-law decay exponent of semi-infinite integrands.
    pub tail_exponent_hint: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_levels: 12,
            tail_exponent_hint: -2.0,
        }
    }
}

impl QuadratureSpec {
    /// Tighter tolerances used when kernel values feed further arithmetic.
    pub fn precise() -> Self {
        QuadratureSpec {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_levels: 12,
            tail_exponent_hint: -2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(GfbmError::domain(
                "tolerance",
                self.abs_tol.min(self.rel_tol),
                "tolerances must be positive",
            ));
        }
        if self.max_levels < 4 {
            return Err(GfbmError::domain(
                "max_levels",
                self.max_levels as f64,
                "at least 4 levels are required",
            ));
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl IntegralResult {
    pub const ZERO: IntegralResult = IntegralResult {
        value: 0.0,
        abs_error_estimate: 0.0,
        evaluations: 0,
    };

    pub fn scaled(self, factor: f64) -> Self {
        IntegralResult {
            value: self.value * factor,
            abs_error_estimate: self.abs_error_estimate * factor.abs(),
            evaluations: self.evaluations,
        }
    }
}

impl std::ops::Add for IntegralResult {
    type Output = IntegralResult;

    fn add(self, rhs: Self) -> Self {
        IntegralResult {
            value: self.value + rhs.value,
            abs_error_estimate: self.abs_error_estimate + rhs.abs_error_estimate,
            evaluations: self.evaluations + rhs.evaluations,
        }
    }
}

impl std::iter::Sum for IntegralResult {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(IntegralResult::ZERO, |a, b| a + b)
    }
}

/// An abscissa together with its exact distances to the interval ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub from_left: f64,
    pub from_right: f64,
}

/// Precomputed abscissa data for one `t` on the transformed axis.
#[derive(Clone, Copy)]
struct Abscissa {
    /// Distance from the nearer endpoint of `(-1, 1)`.
    near: f64,
    /// `dx/dt` on `(-1, 1)`.
    weight: f64,
}

fn abscissa(t: f64) -> Abscissa {
    let y = HALF_PI * t.abs().sinh();
    let e = (-2.0 * y).exp();
    let near = 2.0 * e / (1.0 + e);
    let weight = HALF_PI * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
    Abscissa { near, weight }
}

/// Integrates `f` over the open interval `(a, b)` with tanh-sinh nodes.
/// Endpoints are never evaluated.
pub fn integrate_interval<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<IntegralResult>
where
    F: Fn(Node) -> f64,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(GfbmError::domain(
            "interval",
            if a.is_finite() { b } else { a },
            "finite bounds required",
        ));
    }
    if a == b {
        return Ok(IntegralResult::ZERO);
    }
    if a > b {
        return integrate_interval(f, b, a, spec).map(|r| r.scaled(-1.0));
    }
    let half = 0.5 * (b - a);
    let width = b - a;

    // Contribution of the pair at +t (right half) and -t (left half).
    let eval = |t: f64, side: i8| -> Option<f64> {
        let ab = abscissa(t);
        let near = half * ab.near;
        if near <= 0.0 || !near.is_finite() {
            return None;
        }
        let node = if side > 0 {
            Node {
                x: b - near,
                from_left: width - near,
                from_right: near,
            }
        } else {
            Node {
                x: a + near,
                from_left: near,
                from_right: width - near,
            }
        };
        let v = f(node) * half * ab.weight;
        if v.is_finite() {
            Some(v)
        } else {
            None
        }
    };

    // Level 0: unit step, determine how far out each side must go.
    let mut evaluations = 1usize;
    let centre = f(Node {
        x: a + half,
        from_left: half,
        from_right: half,
    }) * half
        * HALF_PI;
    if !centre.is_finite() {
        return Err(GfbmError::NonIntegrable(format!(
            "integrand not finite at interior point {}",
            a + half
        )));
    }
    let mut sum = centre;
    let mut abs_sum = centre.abs();
    let mut t_max = [0.0f64; 2];
    for (k, side) in [1i8, -1i8].into_iter().enumerate() {
        let mut j = 1;
        loop {
            let t = j as f64;
            match eval(t, side) {
                Some(v) => {
                    evaluations += 1;
                    sum += v;
                    abs_sum += v.abs();
                    t_max[k] = t;
                    if t >= 3.0 && v.abs() <= 1e-20 * sum.abs().max(f64::MIN_POSITIVE) {
                        break;
                    }
                }
                None => break,
            }
            j += 1;
            if j > 8 {
                break;
            }
        }
    }
    // Refine the truncation point with the finer grid at later levels.
    let mut estimate = sum;
    let mut prev_diff = f64::INFINITY;
    let mut h = 1.0;
    let mut last_error = f64::INFINITY;
    for level in 1..=spec.max_levels {
        h *= 0.5;
        for (k, side) in [1i8, -1i8].into_iter().enumerate() {
            // extend by one unit beyond the coarse cutoff; terms there are
            // already negligible at level 0 but may not be at finer steps
            let limit = t_max[k] + 1.0;
            let mut j = 1u64;
            loop {
                let t = (2 * j - 1) as f64 * h;
                if t > limit {
                    break;
                }
                match eval(t, side) {
                    Some(v) => {
                        evaluations += 1;
                        sum += v;
                        abs_sum += v.abs();
                    }
                    None => break,
                }
                j += 1;
            }
        }
        let new_estimate = sum * h;
        let diff = (new_estimate - estimate).abs();
        estimate = new_estimate;
        let roundoff = 8.0 * f64::EPSILON * abs_sum * h;
        // once the quadratic regime is reached the next correction is about diff^2 / prev_diff
        let err = if level >= 3 && prev_diff.is_finite() && diff < prev_diff {
            diff.max(roundoff)
        } else {
            diff.max(roundoff).max(prev_diff.min(f64::MAX))
        };
        last_error = err;
        if level >= 3 && err <= spec.target(estimate) {
            return Ok(IntegralResult {
                value: estimate,
                abs_error_estimate: err,
                evaluations,
            });
        }
        prev_diff = diff;
    }
    Err(GfbmError::QuadratureFailure {
        estimate: last_error,
        target: spec.target(estimate),
        evaluations,
    })
}

fn check_exponent(name: &str, exponent: f64) -> Result<()> {
    if exponent.is_nan() || exponent <= -1.0 {
        return Err(GfbmError::NonIntegrable(format!(
            "{name} endpoint exponent {exponent} must exceed -1"
        )));
    }
    Ok(())
}

/// Integrates over `(0, 1)` where `f` behaves like `x^left_exponent` near 0
/// and `(1 - x)^right_exponent` near 1. Both exponents must exceed -1.
pub fn integrate_01_singular<F>(
    f: F,
    left_exponent: f64,
    right_exponent: f64,
    spec: &QuadratureSpec,
) -> Result<IntegralResult>
where
    F: Fn(f64) -> f64,
{
    check_exponent("left", left_exponent)?;
    check_exponent("right", right_exponent)?;
    integrate_interval(|n| f(n.x), 0.0, 1.0, spec)
}

/// Integrates over `(start, inf)` through `u = start + scale * v / (1 - v)`.
/// The node handed to `f` carries `from_left = u - start`; `from_right` is infinite.
pub fn integrate_tail<F>(f: F, start: f64, scale: f64, spec: &QuadratureSpec) -> Result<IntegralResult>
where
    F: Fn(Node) -> f64,
{
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GfbmError::domain("scale", scale, "tail scale must be positive"));
    }
    integrate_interval(
        |n| {
            let offset = scale * n.from_left / n.from_right;
            let jac = scale / (n.from_right * n.from_right);
            if !offset.is_finite() || !jac.is_finite() {
                return 0.0;
            }
            f(Node {
                x: start + offset,
                from_left: offset,
                from_right: f64::INFINITY,
            }) * jac
        },
        0.0,
        1.0,
        spec,
    )
}

/// Integrates over `(0, inf)` for `|f(u)| = O(u^tail_exponent)`, `tail_exponent < -1`.
/// The range is split at 1 and the tail is mapped onto `(0, 1)`.
pub fn integrate_semi_infinite<F>(f: F, tail_exponent: f64, spec: &QuadratureSpec) -> Result<IntegralResult>
where
    F: Fn(f64) -> f64,
{
    if tail_exponent.is_nan() || tail_exponent >= -1.0 {
        return Err(GfbmError::NonIntegrable(format!(
            "tail exponent {tail_exponent} must be below -1"
        )));
    }
    let head = integrate_interval(|n| f(n.x), 0.0, 1.0, spec)?;
    let tail = integrate_tail(|n| f(n.x), 1.0, 1.0, spec)?;
    Ok(head + tail)
}

/// Integrates over `(0, last)` (and on to infinity when `tail` is set),
/// splitting at every breakpoint and further subdividing geometrically so
/// that no piece spans more than a factor 64 in its abscissae.
///
/// Nodes carry `from_left` = distance from 0 and `from_right` = distance to
/// the last breakpoint (infinite on the tail), both accurate near the ends.
pub(crate) fn integrate_pieces<F>(
    f: F,
    breakpoints: &[f64],
    tail: bool,
    spec: &QuadratureSpec,
) -> Result<IntegralResult>
where
    F: Fn(Node) -> f64,
{
    const MAX_RATIO: f64 = 64.0;
    let mut points: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| *p > 0.0 && p.is_finite())
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    let mut edges = vec![0.0];
    for &p in &points {
        let prev = *edges.last().unwrap();
        if prev > 0.0 && p / prev > MAX_RATIO {
            let pieces = ((p / prev).ln() / MAX_RATIO.ln()).ceil() as usize;
            let ratio = (p / prev).powf(1.0 / pieces as f64);
            let mut q = prev;
            for _ in 1..pieces {
                q *= ratio;
                edges.push(q);
            }
        }
        edges.push(p);
    }
    let last = *edges.last().unwrap();
    let mut total = IntegralResult::ZERO;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        total = total
            + integrate_interval(
                |n| {
                    f(Node {
                        x: n.x,
                        from_left: if lo == 0.0 { n.from_left } else { n.x },
                        from_right: if hi == last { n.from_right } else { last - n.x },
                    })
                },
                lo,
                hi,
                spec,
            )?;
    }
    if tail {
        let start = *edges.last().unwrap();
        let scale = if start > 0.0 { start } else { 1.0 };
        total = total
            + integrate_tail(
                |n| {
                    f(Node {
                        x: n.x,
                        from_left: n.x,
                        from_right: f64::INFINITY,
                    })
                },
                start,
                scale,
                spec,
            )?;
    }
    Ok(total)
}
