//! Sample paths on a time grid.
//!
//! Three generators share one ensemble type:
//! - [`sample_exact`] draws from the exact Gaussian law via a Cholesky factor
//!   of the covariance matrix;
//! - [`sample_riemann`] discretizes the defining white-noise integral;
//! - [`sample_derivative`] discretizes the integral for `dX/dt` in the
//!   differentiable regime.

mod exact;
mod riemann;
mod rng;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};
use crate::kernels::KernelContext;
use crate::params::ModelParams;

pub use exact::{sample_exact, ExactFactor};
pub use riemann::{riemann_covariance, sample_derivative, sample_riemann, RiemannSpec, TruncationDiagnostics};
pub use rng::{path_rng, standard_normals};

/// Strictly increasing, finite, nonnegative observation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Grid {
    times: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Grid {
    type Error = GfbmError;

    fn try_from(times: Vec<f64>) -> Result<Self> {
        Grid::new(times)
    }
}

impl From<Grid> for Vec<f64> {
    fn from(g: Grid) -> Self {
        g.times
    }
}

impl Grid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(GfbmError::InvalidGrid("grid has no points".into()));
        }
        for (i, &t) in times.iter().enumerate() {
            if !(t.is_finite() && t >= 0.0) {
                return Err(GfbmError::InvalidGrid(format!(
                    "time {t} at index {i} is not a finite nonnegative number"
                )));
            }
            if i > 0 && t <= times[i - 1] {
                return Err(GfbmError::InvalidGrid(format!(
                    "times must be strictly increasing ({} then {t})",
                    times[i - 1]
                )));
            }
        }
        Ok(Grid { times })
    }

    /// `n + 1` equally spaced points `0, T/n, ..., T`.
    pub fn uniform(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(GfbmError::InvalidGrid("need at least one step".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(GfbmError::InvalidGrid(format!("horizon {horizon} must be positive")));
        }
        Grid::new((0..=n).map(|i| horizon * i as f64 / n as f64).collect())
    }

    /// Sorted union of the given times with `0`, duplicates removed.
    pub fn from_unsorted(times: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut v: Vec<f64> = std::iter::once(0.0).chain(times).collect();
        if v.iter().any(|t| !t.is_finite()) {
            return Err(GfbmError::InvalidGrid("non-finite time".into()));
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        Grid::new(v)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn starts_at_zero(&self) -> bool {
        self.times[0] == 0.0
    }

    /// Union of `base` with every `factor * t` for `t` in `base`.
    pub fn with_scaled_copies(base: &Grid, factors: &[f64]) -> Result<Self> {
        if let Some(f) = factors.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(GfbmError::InvalidGrid(format!("scale factor {f} must be positive")));
        }
        let mut v: Vec<f64> = base.times.clone();
        for f in factors {
            v.extend(base.times.iter().map(|t| t * f));
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        Grid::new(v)
    }

    /// Index of `t` if it is a grid point (exact match).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|x| x.total_cmp(&t)).ok()
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == self.times.len() => i - 1,
            Err(i) => {
                if t - self.times[i - 1] <= self.times[i] - t {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "exact")]
    ExactFactorization,
    #[serde(rename = "riemann")]
    RiemannDiscretization,
    #[serde(rename = "derivative")]
    Derivative,
}

impl std::str::FromStr for Method {
    type Err = GfbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::ExactFactorization),
            "riemann" => Ok(Method::RiemannDiscretization),
            "derivative" => Ok(Method::Derivative),
            other => Err(GfbmError::Parse(format!("unknown method '{other}'"))),
        }
    }
}

/// Simulated paths, one row per path, one column per grid time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub grid: Grid,
    values: Vec<f64>,
    num_paths: usize,
    pub method: Method,
    pub seed: u64,
    pub params: ModelParams,
    /// Relative diagonal jitter added before factorization; set by the exact sampler only.
    pub jitter: Option<f64>,
    pub truncation: Option<TruncationDiagnostics>,
}

impl PathEnsemble {
    pub(crate) fn from_rows(grid: Grid, rows: Vec<Vec<f64>>, method: Method, seed: u64, params: ModelParams) -> Self {
        let num_paths = rows.len();
        let mut values = Vec::with_capacity(num_paths * grid.len());
        for r in rows {
            debug_assert_eq!(r.len(), grid.len());
            values.extend(r);
        }
        PathEnsemble {
            grid,
            values,
            num_paths,
            method,
            seed,
            params,
            jitter: None,
            truncation: None,
        }
    }

    /// Builds an ensemble from a flat row-major buffer.
    pub fn from_values(grid: Grid, values: Vec<f64>, method: Method, seed: u64, params: ModelParams) -> Result<Self> {
        if !values.len().is_multiple_of(grid.len()) {
            return Err(GfbmError::Parse(format!(
                "{} values do not fill rows of length {}",
                values.len(),
                grid.len()
            )));
        }
        let num_paths = values.len() / grid.len();
        Ok(PathEnsemble {
            grid,
            values,
            num_paths,
            method,
            seed,
            params,
            jitter: None,
            truncation: None,
        })
    }

    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    pub fn num_times(&self) -> usize {
        self.grid.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.grid.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All path values at grid index `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.paths().map(|p| p[j]).collect()
    }

    /// Linear interpolation of path `i` at time `t`.
    pub fn interpolate(&self, i: usize, t: f64) -> Result<f64> {
        interpolate(&self.grid, self.path(i), t)
    }
}

/// Linear interpolation of `values` (on `grid`) at `t`.
pub fn interpolate(grid: &Grid, values: &[f64], t: f64) -> Result<f64> {
    let times = grid.times();
    if !(t >= times[0] && t <= grid.horizon()) {
        return Err(GfbmError::Interpolation {
            t,
            horizon: grid.horizon(),
        });
    }
    match times.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(i) => Ok(values[i]),
        Err(i) => {
            let (t0, t1) = (times[i - 1], times[i]);
            let w = (t - t0) / (t1 - t0);
            Ok(values[i - 1] * (1.0 - w) + values[i] * w)
        }
    }
}

/// `M[i][j] = psi(t_i, t_j)`; rows for `t = 0` vanish identically.
pub fn covariance_matrix(ctx: &KernelContext, grid: &Grid) -> Result<DMatrix<f64>> {
    let times = grid.times();
    let n = times.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| ctx.psi(times[i], times[j]))
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(entries) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(m)
}
