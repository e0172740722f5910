use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::rng::{path_rng, standard_normals};
use super::{covariance_matrix, Grid, Method, PathEnsemble};
use crate::error::{GfbmError, Result};
use crate::kernels::KernelContext;

const JITTER_LADDER: [f64; 5] = [1e-14, 1e-13, 1e-12, 1e-11, 1e-10];

/// Lower-triangular factor of the covariance restricted to the positive
/// grid times. Reusable across many sampling calls.
#[derive(Debug, Clone)]
pub struct ExactFactor {
    pub grid: Grid,
    lower: DMatrix<f64>,
    /// Relative jitter (multiple of the largest diagonal entry) that was
    /// needed for the factorization to succeed; 0 if none was.
    pub jitter: f64,
    /// Number of leading grid points at `t = 0` (0 or 1).
    zero_offset: usize,
}

impl ExactFactor {
    pub fn new(ctx: &KernelContext, grid: &Grid) -> Result<Self> {
        let zero_offset = usize::from(grid.starts_at_zero());
        let full = covariance_matrix(ctx, grid)?;
        let m = grid.len() - zero_offset;
        let sub = full.view((zero_offset, zero_offset), (m, m)).into_owned();
        let (lower, jitter) = factorize(sub)?;
        Ok(ExactFactor {
            grid: grid.clone(),
            lower,
            jitter,
            zero_offset,
        })
    }

    /// Draws `num_paths` paths; path `i` uses stream `first_path + i`.
    pub fn sample(&self, num_paths: usize, seed: u64, first_path: u64) -> Vec<Vec<f64>> {
        let m = self.lower.nrows();
        (0..num_paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(seed, first_path + i);
                let mut z = vec![0.0; m];
                standard_normals(&mut rng, &mut z);
                let x = &self.lower * DVector::from_vec(z);
                let mut row = vec![0.0; self.zero_offset];
                row.extend(x.iter());
                row
            })
            .collect()
    }
}

fn factorize(m: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if m.nrows() == 0 {
        return Ok((m, 0.0));
    }
    if let Some(ch) = m.clone().cholesky() {
        return Ok((ch.unpack(), 0.0));
    }
    let max_diag = m.diagonal().max();
    for eps in JITTER_LADDER {
        let mut jittered = m.clone();
        for i in 0..jittered.nrows() {
            jittered[(i, i)] += eps * max_diag;
        }
        if let Some(ch) = jittered.cholesky() {
            return Ok((ch.unpack(), eps));
        }
    }
    Err(GfbmError::FactorizationFailure {
        max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

/// Exact Gaussian paths on `grid` via Cholesky factorization of the covariance.
pub fn sample_exact(ctx: &KernelContext, grid: &Grid, num_paths: usize, seed: u64) -> Result<PathEnsemble> {
    if num_paths == 0 {
        return Err(GfbmError::domain("num_paths", 0.0, "need at least one path"));
    }
    let factor = ExactFactor::new(ctx, grid)?;
    let rows = factor.sample(num_paths, seed, 0);
    let mut ens = PathEnsemble::from_rows(grid.clone(), rows, Method::ExactFactorization, seed, ctx.params);
    ens.jitter = Some(factor.jitter);
    Ok(ens)
}
