use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

use super::sq_dist;

/// RBF kernel width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    gamma: f64,
}

impl KernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kernel gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(KernelParams { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (-self.gamma * sq_dist(x, y)).exp()
    }
}

/// `exp(-gamma * ||x - y||^2)`.
pub fn rbf_kernel(x: ArrayView1<f64>, y: ArrayView1<f64>, params: KernelParams) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let d: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-params.gamma * d).exp())
}

/// The "scale" heuristic: `1 / (d * Var(X))`, variance pooled over all entries.
pub fn gamma_scale(data: ArrayView2<f64>) -> Result<f64> {
    let (n, d) = data.dim();
    if n == 0 || d == 0 {
        return Err(Error::DegenerateData("empty data matrix".into()));
    }
    let count = (n * d) as f64;
    let mean = data.iter().sum::<f64>() / count;
    let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    if !(var.is_finite() && var > 0.0) {
        return Err(Error::DegenerateData(
            "zero variance: every entry is identical".into(),
        ));
    }
    Ok(1.0 / (d as f64 * var))
}

/// Dense Gram matrix over the rows of `data`. Symmetric by construction.
pub fn gram_matrix(data: ArrayView2<f64>, params: KernelParams) -> Array2<f64> {
    let n = data.nrows();
    let rows = super::rows(&data);
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in 0..i {
            let v = params.eval(&rows[i], &rows[j]);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}
