//! Direct discretization of the white-noise integral.
//!
//! The real line below the horizon is cut into cells; each cell carries one
//! standard normal draw scaled by the square root of its width, and every
//! grid time reuses the same draws. Cells are uniform on `[-T, T]`, shrink
//! geometrically toward each point where the kernel is singular (`u = 0` and
//! `u = t_j`), and grow geometrically on the far field `[-U, -T]`.
//!
//! Each cell stores its position as an anchor plus an offset, so distances
//! to the nearby singular point stay exact even for cells of width 1e-12.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{path_rng, standard_normals};
use super::{Grid, Method, PathEnsemble};
use crate::error::{GfbmError, Result};
use crate::kernels::KernelContext;
use crate::params::Variant;
use crate::quadrature::integrate_tail;
use crate::special::pow_diff;

/// Discretization controls. `None` fields are chosen from the grid horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannSpec {
    /// Left end `-U` of the integration domain. When `None`, `U` grows by
    /// factors of 10 until the discarded tail variance is small enough.
    pub left_truncation: Option<f64>,
    /// Width of the uniform cells on `[-T, T]`; defaults to `T / 2048`.
    pub mesh: Option<f64>,
    /// Node position inside uniform cells as a fraction of the width.
    pub singularity_offset: f64,
    /// Width ratio between neighbouring cells near a singular point.
    pub grading_ratio: f64,
    /// Width ratio between neighbouring far-field cells.
    pub far_field_ratio: f64,
    /// Smallest cell next to a grid time, relative to `T`.
    pub min_cell: f64,
    /// Smallest cell on either side of `u = 0`, relative to `T`. Much smaller
    /// than `min_cell` because for large `gamma` a sizeable share of the
    /// variance sits within a tiny distance of the origin.
    pub min_cell_at_zero: f64,
}

impl Default for RiemannSpec {
    fn default() -> Self {
        RiemannSpec {
            left_truncation: None,
            mesh: None,
            singularity_offset: 0.5,
            grading_ratio: 1.1,
            far_field_ratio: 1.02,
            min_cell: 1e-12,
            min_cell_at_zero: 1e-40,
        }
    }
}

impl RiemannSpec {
    pub fn with_mesh(mut self, mesh: f64) -> Self {
        self.mesh = Some(mesh);
        self
    }

    pub fn with_left_truncation(mut self, u: f64) -> Self {
        self.left_truncation = Some(u);
        self
    }

    fn validate(&self) -> Result<()> {
        if let Some(u) = self.left_truncation {
            if !(u > 0.0 && u.is_finite()) {
                return Err(GfbmError::domain("left_truncation", u, "must be positive and finite"));
            }
        }
        if let Some(h) = self.mesh {
            if !(h > 0.0 && h.is_finite()) {
                return Err(GfbmError::domain("mesh", h, "must be positive and finite"));
            }
        }
        if !(self.singularity_offset > 0.0 && self.singularity_offset < 1.0) {
            return Err(GfbmError::domain(
                "singularity_offset",
                self.singularity_offset,
                "must lie strictly inside (0, 1)",
            ));
        }
        for (name, r) in [
            ("grading_ratio", self.grading_ratio),
            ("far_field_ratio", self.far_field_ratio),
        ] {
            if !(r > 1.0 && r <= 4.0) {
                return Err(GfbmError::domain(name, r, "must lie in (1, 4]"));
            }
        }
        for (name, m) in [("min_cell", self.min_cell), ("min_cell_at_zero", self.min_cell_at_zero)] {
            if !(m > 0.0 && m < 1e-3) {
                return Err(GfbmError::domain(name, m, "must lie in (0, 1e-3)"));
            }
        }
        Ok(())
    }
}

/// What the discretization left out, for the run manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationDiagnostics {
    pub left_truncation: f64,
    /// Variance of the noise below `-U` at the horizon (zero for the
    /// Riemann-Liouville variant, which has no past).
    pub tail_variance: f64,
    /// `1e-4` times the exact variance at the horizon.
    pub limit: f64,
    pub mesh: f64,
    pub num_cells: usize,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    anchor: f64,
    offset: f64,
    width: f64,
}

impl Cell {
    /// `t - u` with `u = anchor + offset`.
    fn lag(&self, t: f64) -> f64 {
        if t == self.anchor {
            -self.offset
        } else {
            (t - self.anchor) - self.offset
        }
    }

    fn position(&self) -> f64 {
        if self.anchor == 0.0 {
            self.offset
        } else {
            self.anchor + self.offset
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Path,
    Derivative,
}

/// Power laws of the squared kernel next to each singular point.
struct Exponents {
    left_of_zero: f64,
    right_of_zero: f64,
    left_of_time: f64,
}

impl Exponents {
    fn new(alpha: f64, gamma: f64, target: Target) -> Self {
        match target {
            Target::Path => Exponents {
                left_of_zero: alpha.min(0.0) * 2.0 - gamma,
                right_of_zero: -gamma,
                left_of_time: 2.0 * alpha,
            },
            Target::Derivative => Exponents {
                left_of_zero: -gamma,
                right_of_zero: -gamma,
                left_of_time: 2.0 * alpha - 2.0,
            },
        }
    }
}

/// Distance from a singular point at which `x^p` equals its mean over
/// `(d1, d2)`; the node then integrates `x^p` exactly.
fn power_node(d1: f64, d2: f64, p: f64) -> f64 {
    if p.abs() < 1e-6 {
        return 0.5 * (d1 + d2);
    }
    let r = d1 / d2;
    let mean = (1.0 - r.powf(p + 1.0)) / ((p + 1.0) * (1.0 - r));
    d2 * (mean.ln() / p).exp()
}

/// Cells covering distances `(0, len)` from a singular point, smallest first.
/// Returns `(node distance, width)` pairs.
fn graded(len: f64, min_cell: f64, ratio: f64, p: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut lo = 0.0;
    let mut hi = min_cell.min(len);
    loop {
        out.push((power_node(lo, hi, p), hi - lo));
        if hi >= len {
            break;
        }
        lo = hi;
        hi = (hi * ratio).min(len);
        if len - hi < 0.25 * (hi - lo) {
            hi = len;
        }
    }
    out
}

/// Coefficient matrix of one discretized integral: row `j` holds the weights
/// of the draws that make up the value at grid time `j`.
pub(crate) struct RiemannOperator {
    cells: Vec<Cell>,
    /// Row `j` uses cells `0..active[j]`.
    active: Vec<usize>,
    rows: Vec<Vec<f64>>,
    pub diagnostics: TruncationDiagnostics,
}

impl RiemannOperator {
    fn build(ctx: &KernelContext, grid: &Grid, rspec: &RiemannSpec, target: Target) -> Result<Self> {
        rspec.validate()?;
        let (a, g) = (ctx.params.alpha(), ctx.params.gamma());
        let horizon = grid.horizon();
        if horizon <= 0.0 {
            return Err(GfbmError::InvalidGrid("horizon must be positive".into()));
        }
        let full = ctx.params.variant() == Variant::FullRange;
        let mesh = rspec.mesh.unwrap_or(horizon / 2048.0);
        let min_cell = rspec.min_cell * horizon;
        let min_zero = rspec.min_cell_at_zero * horizon;
        let exps = Exponents::new(a, g, target);

        let exact_var = match target {
            Target::Path => horizon.powf(2.0 * ctx.hurst()),
            Target::Derivative => ctx.derivative_variance(horizon)?,
        };
        let limit = 1e-4 * exact_var;
        let (left, tail_variance) = if full {
            choose_truncation(ctx, horizon, rspec.left_truncation, limit, target)?
        } else {
            (horizon, 0.0)
        };

        let mut cells = Vec::new();
        if full {
            far_field(&mut cells, horizon, left, mesh, rspec.far_field_ratio);
            let at_zero = SingularEnd {
                min_cell: min_zero,
                exponent: exps.left_of_zero,
            };
            segment(&mut cells, (-horizon, 0.0), (None, Some(at_zero)), mesh, rspec);
        }

        // (0, T): split at every grid time and every mesh multiple.
        let mut active = vec![0; grid.len()];
        let mut prev = 0.0;
        for (j, &t) in grid.times().iter().enumerate() {
            if t > prev {
                let left = (prev == 0.0).then_some(SingularEnd {
                    min_cell: min_zero,
                    exponent: exps.right_of_zero,
                });
                let right = SingularEnd {
                    min_cell,
                    exponent: exps.left_of_time,
                };
                segment(&mut cells, (prev, t), (left, Some(right)), mesh, rspec);
            }
            active[j] = cells.len();
            prev = t;
        }

        let rows = grid
            .times()
            .par_iter()
            .zip(active.par_iter())
            .map(|(&t, &n)| {
                cells[..n]
                    .iter()
                    .map(|cell| ctx.c * kernel(cell, t, a, g, full, target) * cell.width.sqrt())
                    .collect()
            })
            .collect();

        let num_cells = cells.len();
        Ok(RiemannOperator {
            cells,
            active,
            rows,
            diagnostics: TruncationDiagnostics {
                left_truncation: left,
                tail_variance,
                limit,
                mesh,
                num_cells,
            },
        })
    }

    /// Covariance of the discretized values at grid indices `i` and `j`.
    pub(crate) fn covariance(&self, i: usize, j: usize) -> f64 {
        let n = self.active[i].min(self.active[j]);
        self.rows[i][..n]
            .iter()
            .zip(&self.rows[j][..n])
            .map(|(x, y)| x * y)
            .sum()
    }

    fn sample(&self, num_paths: usize, seed: u64) -> Vec<Vec<f64>> {
        let n = self.cells.len();
        (0..num_paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(seed, i);
                let mut z = vec![0.0; n];
                standard_normals(&mut rng, &mut z);
                self.rows
                    .iter()
                    .map(|row| row.iter().zip(&z).map(|(w, z)| w * z).sum())
                    .collect()
            })
            .collect()
    }
}

fn kernel(cell: &Cell, t: f64, a: f64, g: f64, full: bool, target: Target) -> f64 {
    let lag = cell.lag(t);
    if lag <= 0.0 {
        return 0.0;
    }
    let u = cell.position();
    let weight = u.abs().powf(-0.5 * g);
    match (target, u < 0.0) {
        (_, true) if !full => 0.0,
        (Target::Path, true) => pow_diff(t, -u, a) * weight,
        (Target::Path, false) => lag.powf(a) * weight,
        (Target::Derivative, _) => a * lag.powf(a - 1.0) * weight,
    }
}

/// Geometric cells on `(-left, -horizon)`, starting at width `mesh` next to
/// `-horizon`, emitted from left to right.
fn far_field(cells: &mut Vec<Cell>, horizon: f64, left: f64, mesh: f64, ratio: f64) {
    if left <= horizon {
        return;
    }
    let mut edges = vec![horizon];
    let mut w = mesh;
    while *edges.last().unwrap() < left {
        let next = (edges.last().unwrap() + w).min(left);
        edges.push(next);
        w *= ratio;
    }
    for pair in edges.windows(2).rev() {
        let (near, far) = (pair[0], pair[1]);
        cells.push(Cell {
            anchor: 0.0,
            offset: -0.5 * (near + far),
            width: far - near,
        });
    }
}

/// Singular behaviour at one end of a segment: smallest cell and the
/// exponent of the squared kernel there.
#[derive(Clone, Copy)]
struct SingularEnd {
    min_cell: f64,
    exponent: f64,
}

/// Cells on `(lo, hi)`. Next to a singular end the cells grow geometrically
/// until they reach the mesh width; the rest is uniform.
fn segment(
    cells: &mut Vec<Cell>,
    (lo, hi): (f64, f64),
    (left, right): (Option<SingularEnd>, Option<SingularEnd>),
    mesh: f64,
    rspec: &RiemannSpec,
) {
    let len = hi - lo;
    let zone = mesh / (rspec.grading_ratio - 1.0);
    let share = if left.is_some() && right.is_some() {
        0.5 * len
    } else {
        len
    };
    let left_len = left.map_or(0.0, |_| zone.min(share));
    let right_len = right.map_or(0.0, |_| zone.min(share));
    if let Some(end) = left {
        for (d, w) in graded(left_len, end.min_cell, rspec.grading_ratio, end.exponent) {
            cells.push(Cell {
                anchor: lo,
                offset: d,
                width: w,
            });
        }
    }
    let middle = len - left_len - right_len;
    if middle > 1e-14 * len {
        let n = (middle / mesh).ceil().max(1.0) as usize;
        let h = middle / n as f64;
        let start = lo + left_len;
        for i in 0..n {
            cells.push(Cell {
                anchor: start + i as f64 * h,
                offset: rspec.singularity_offset * h,
                width: h,
            });
        }
    }
    if let Some(end) = right {
        for (d, w) in graded(right_len, end.min_cell, rspec.grading_ratio, end.exponent)
            .into_iter()
            .rev()
        {
            cells.push(Cell {
                anchor: hi,
                offset: -d,
                width: w,
            });
        }
    }
}

/// Variance at the horizon of the noise below `-left`.
fn tail_variance(ctx: &KernelContext, horizon: f64, left: f64, target: Target) -> Result<f64> {
    let (a, g) = (ctx.params.alpha(), ctx.params.gamma());
    let integral = match target {
        Target::Path => integrate_tail(
            |n| {
                let u = n.x;
                let d = pow_diff(horizon, u, a);
                d * d * u.powf(-g)
            },
            left,
            left,
            &ctx.spec,
        )?,
        Target::Derivative => integrate_tail(
            |n| {
                let u = n.x;
                a * a * (horizon + u).powf(2.0 * a - 2.0) * u.powf(-g)
            },
            left,
            left,
            &ctx.spec,
        )?,
    };
    Ok(ctx.c * ctx.c * integral.value)
}

fn choose_truncation(
    ctx: &KernelContext,
    horizon: f64,
    requested: Option<f64>,
    limit: f64,
    target: Target,
) -> Result<(f64, f64)> {
    // The tail of the past-noise variance decays like U^(2H-2), so large H
    // needs very distant cut-offs; geometric far-field cells keep that cheap.
    const MAX_DECADES: i32 = 60;
    if let Some(u) = requested {
        let left = u.max(horizon);
        let tail = tail_variance(ctx, horizon, left, target)?;
        if tail > limit {
            return Err(GfbmError::Truncation { tail, limit });
        }
        return Ok((left, tail));
    }
    let mut left = 16.0 * horizon;
    let mut tail = tail_variance(ctx, horizon, left, target)?;
    for _ in 0..MAX_DECADES {
        if tail <= limit {
            return Ok((left, tail));
        }
        left *= 10.0;
        tail = tail_variance(ctx, horizon, left, target)?;
    }
    if tail <= limit {
        Ok((left, tail))
    } else {
        Err(GfbmError::Truncation { tail, limit })
    }
}

fn check_paths(num_paths: usize) -> Result<()> {
    if num_paths == 0 {
        return Err(GfbmError::domain("num_paths", 0.0, "need at least one path"));
    }
    Ok(())
}

pub(crate) fn path_operator(ctx: &KernelContext, grid: &Grid, rspec: &RiemannSpec) -> Result<RiemannOperator> {
    RiemannOperator::build(ctx, grid, rspec, Target::Path)
}

pub(crate) fn derivative_operator(ctx: &KernelContext, grid: &Grid, rspec: &RiemannSpec) -> Result<RiemannOperator> {
    let a = ctx.params.alpha();
    if a <= 0.5 {
        return Err(GfbmError::domain(
            "alpha",
            a,
            "the derivative process exists only for alpha > 1/2",
        ));
    }
    if grid.times()[0] <= 0.0 {
        return Err(GfbmError::InvalidGrid(
            "derivative paths need every grid time to be positive".into(),
        ));
    }
    RiemannOperator::build(ctx, grid, rspec, Target::Derivative)
}

/// Covariance matrix of the values [`sample_riemann`] produces, computed
/// from the coefficients without sampling, with its diagnostics.
pub fn riemann_covariance(
    ctx: &KernelContext,
    grid: &Grid,
    rspec: &RiemannSpec,
) -> Result<(DMatrix<f64>, TruncationDiagnostics)> {
    let op = path_operator(ctx, grid, rspec)?;
    let n = grid.len();
    let m = DMatrix::from_fn(n, n, |i, j| op.covariance(i, j));
    Ok((m, op.diagnostics))
}

/// Approximate paths from the discretized white-noise integral.
pub fn sample_riemann(
    ctx: &KernelContext,
    grid: &Grid,
    rspec: &RiemannSpec,
    num_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    check_paths(num_paths)?;
    let op = path_operator(ctx, grid, rspec)?;
    let rows = op.sample(num_paths, seed);
    let mut ens = PathEnsemble::from_rows(grid.clone(), rows, Method::RiemannDiscretization, seed, ctx.params);
    ens.truncation = Some(op.diagnostics);
    Ok(ens)
}

/// Paths of `dX/dt` in the differentiable regime (`alpha > 1/2`).
pub fn sample_derivative(
    ctx: &KernelContext,
    grid: &Grid,
    rspec: &RiemannSpec,
    num_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    check_paths(num_paths)?;
    let op = derivative_operator(ctx, grid, rspec)?;
    let rows = op.sample(num_paths, seed);
    let mut ens = PathEnsemble::from_rows(grid.clone(), rows, Method::Derivative, seed, ctx.params);
    ens.truncation = Some(op.diagnostics);
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;

    fn ctx(a: f64, g: f64, v: Variant) -> KernelContext {
        KernelContext::new(ModelParams::new(a, g, v).unwrap()).unwrap()
    }

    #[test]
    fn power_node_integrates_power_exactly() {
        for &p in &[-0.9, -0.3, 0.4, 1.2] {
            for &(d1, d2) in &[(0.0, 1e-3), (0.2, 0.22), (1.0, 3.0)] {
                let x: f64 = power_node(d1, d2, p);
                let exact = (f64::powf(d2, p + 1.0) - f64::powf(d1, p + 1.0)) / (p + 1.0);
                assert!((x.powf(p) * (d2 - d1) - exact).abs() < 1e-12 * exact.abs());
                assert!(x > d1 && x < d2);
            }
        }
    }

    #[test]
    fn graded_cells_tile_the_interval() {
        let cells = graded(0.01, 1e-12, 1.1, -0.5);
        let total: f64 = cells.iter().map(|c| c.1).sum();
        assert!((total - 0.01).abs() < 1e-15);
        assert!(cells.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn cells_tile_the_domain() {
        let c = ctx(0.3, 0.4, Variant::FullRange);
        let grid = Grid::new(vec![0.0, 0.3, 0.30001, 1.0]).unwrap();
        let op = path_operator(&c, &grid, &RiemannSpec::default()).unwrap();
        let total: f64 = op.cells.iter().map(|c| c.width).sum();
        let expect = op.diagnostics.left_truncation + 1.0;
        assert!((total - expect).abs() < 1e-9 * expect);
        let pos: Vec<f64> = op.cells.iter().map(Cell::position).collect();
        assert!(pos.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(op.active[0], op.active.iter().copied().min().unwrap());
    }

    #[test]
    fn brownian_motion_variance_is_t() {
        let c = ctx(0.0, 0.0, Variant::FullRange);
        let grid = Grid::uniform(4, 2.0).unwrap();
        let op = path_operator(&c, &grid, &RiemannSpec::default()).unwrap();
        for (j, &t) in grid.times().iter().enumerate() {
            assert!((op.covariance(j, j) - t).abs() < 1e-12);
        }
        assert_eq!(op.diagnostics.tail_variance, 0.0);
    }

    #[test]
    fn discretized_variance_matches_kernel() {
        for &(a, g) in &[(0.25, 0.5), (-0.2, 0.3), (0.7, 0.6), (0.1, 0.9)] {
            let c = ctx(a, g, Variant::FullRange);
            let grid = Grid::uniform(4, 1.0).unwrap();
            let op = path_operator(&c, &grid, &RiemannSpec::default()).unwrap();
            let v = op.covariance(4, 4);
            assert!((v - 1.0).abs() < 2e-3, "({a}, {g}): variance {v}");
            let cov = op.covariance(2, 4);
            let exact = c.psi(0.5, 1.0).unwrap();
            assert!((cov - exact).abs() < 2e-3, "({a}, {g}): covariance {cov} vs {exact}");
        }
    }

    #[test]
    fn error_halves_when_mesh_quarters() {
        // Coarse grading so the mesh-dependent part dominates the error.
        let c = ctx(0.25, 0.5, Variant::FullRange);
        let grid = Grid::uniform(1, 1.0).unwrap();
        let err = |mesh: f64| {
            let spec = RiemannSpec {
                grading_ratio: 1.5,
                ..RiemannSpec::default().with_mesh(mesh)
            };
            let op = path_operator(&c, &grid, &spec).unwrap();
            (op.covariance(1, 1) - 1.0 + op.diagnostics.tail_variance).abs()
        };
        let errs: Vec<f64> = [32.0, 128.0, 512.0].iter().map(|m| err(1.0 / m)).collect();
        for w in errs.windows(2) {
            let ratio = w[1] / w[0];
            assert!(ratio > 0.35 && ratio < 0.65, "errors {errs:?}");
        }
    }

    #[test]
    fn rl_variant_has_no_past() {
        let c = ctx(0.25, 0.5, Variant::RiemannLiouville);
        let grid = Grid::uniform(2, 1.0).unwrap();
        let op = path_operator(&c, &grid, &RiemannSpec::default()).unwrap();
        assert!(op.cells.iter().all(|cell| cell.position() > 0.0));
        let exact = c.psi_rl(1.0, 1.0).unwrap();
        assert!((op.covariance(2, 2) - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn derivative_variance_matches_kernel() {
        let c = ctx(0.7, 0.6, Variant::FullRange);
        let grid = Grid::new(vec![0.5, 1.0]).unwrap();
        let op = derivative_operator(&c, &grid, &RiemannSpec::default()).unwrap();
        for (j, t) in [0.5, 1.0].into_iter().enumerate() {
            let exact = c.derivative_variance(t).unwrap();
            let v = op.covariance(j, j);
            assert!((v - exact).abs() < 5e-3 * exact, "t={t}: {v} vs {exact}");
        }
    }

    #[test]
    fn derivative_rejects_rough_regime_and_zero_time() {
        let rough = ctx(0.4, 0.6, Variant::FullRange);
        let grid = Grid::new(vec![0.5, 1.0]).unwrap();
        let e = sample_derivative(&rough, &grid, &RiemannSpec::default(), 10, 1).unwrap_err();
        assert!(matches!(e, GfbmError::OutOfDomain { name: "alpha", .. }));
        let smooth = ctx(0.7, 0.6, Variant::FullRange);
        let with_zero = Grid::uniform(2, 1.0).unwrap();
        assert!(sample_derivative(&smooth, &with_zero, &RiemannSpec::default(), 10, 1).is_err());
    }

    #[test]
    fn short_truncation_is_rejected() {
        let c = ctx(0.25, 0.5, Variant::FullRange);
        let grid = Grid::uniform(2, 1.0).unwrap();
        let spec = RiemannSpec::default().with_left_truncation(2.0);
        let e = sample_riemann(&c, &grid, &spec, 10, 1).unwrap_err();
        assert!(matches!(e, GfbmError::Truncation { .. }));
    }

    #[test]
    fn riemann_paths_are_reproducible() {
        let c = ctx(0.25, 0.5, Variant::FullRange);
        let grid = Grid::uniform(4, 1.0).unwrap();
        let spec = RiemannSpec::default().with_mesh(1.0 / 256.0);
        let a = sample_riemann(&c, &grid, &spec, 20, 3).unwrap();
        let b = sample_riemann(&c, &grid, &spec, 20, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.paths().all(|p| p[0] == 0.0));
    }
}
