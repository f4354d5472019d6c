//! Vector math, kernels and the shared RNG.

mod kernel;
mod rng;

pub use kernel::{gamma_scale, gram_matrix, rbf_kernel, KernelParams};
pub use rng::{mix64, next_gaussian, next_uniform, Rng};

use ndarray::ArrayView2;

#[inline]
pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn check_dim(expected: usize, found: usize) -> crate::Result<()> {
    if expected != found {
        return Err(crate::Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn rows(data: &ArrayView2<f64>) -> Vec<Vec<f64>> {
    data.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Apply `f` to every row in parallel; results keep row order.
pub(crate) fn par_rows<F>(data: ArrayView2<f64>, f: F) -> crate::Result<Vec<f64>>
where
    F: Fn(ndarray::ArrayView1<f64>) -> crate::Result<f64> + Sync,
{
    use rayon::prelude::*;
    let rows: Vec<_> = data.outer_iter().collect();
    rows.into_par_iter().map(&f).collect()
}
