//! ν one-class SVM.
//!
//! Solves the dual
//!
//! ```text
//! min  1/2 Σ_i Σ_j a_i a_j k(x_i, x_j)
//! s.t. 0 <= a_i <= 1/(ν n),  Σ a_i = 1
//! ```
//!
//! with two-coordinate updates that move mass between the maximal violating
//! pair, so the equality constraint holds after every step.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::numcore::{check_dim, gamma_scale, gram_matrix, KernelParams};

/// Kernel width choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// `1 / (d * Var(X))` computed from the training data.
    Scale,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcSvmConfig {
    pub nu: f64,
    pub gamma: Gamma,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OcSvmConfig {
    fn default() -> Self {
        OcSvmConfig {
            nu: 0.01,
            gamma: Gamma::Scale,
            tol: 1e-6,
            max_iter: 100_000,
        }
    }
}

impl OcSvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidConfig(format!("nu must be in (0, 1], got {}", self.nu)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if let Gamma::Fixed(g) = self.gamma {
            KernelParams::new(g)?;
        }
        Ok(())
    }
}

/// Trained model. Only support vectors (α > 0) are retained; `alphas[i]`
/// belongs to row `i` of `support_vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct OcSvmModel {
    pub gamma: f64,
    pub rho: f64,
    pub alphas: Vec<f64>,
    pub support_vectors: Array2<f64>,
    pub converged: bool,
}

/// Solver output: the model plus diagnostics over the full training set.
#[derive(Debug, Clone)]
pub struct OcSvmFit {
    pub model: OcSvmModel,
    /// Dual coefficients for every training row, in input order.
    pub dual: Vec<f64>,
    /// Upper box bound `1 / (ν n)`.
    pub upper: f64,
    pub iterations: usize,
    /// Dual objective before the first update and after each update.
    pub objective_trace: Vec<f64>,
}

impl OcSvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.ncols()
    }

    /// `Σ_i α_i k(sv_i, x)`, without the offset.
    fn kernel_sum(&self, x: &[f64]) -> f64 {
        let k = KernelParams::new(self.gamma).expect("validated gamma");
        self.support_vectors
            .rows()
            .into_iter()
            .zip(&self.alphas)
            .map(|(sv, &a)| a * k.eval(sv.as_slice().expect("standard layout"), x))
            .sum()
    }

    /// `f(x) = Σ α_i k(sv_i, x) - ρ`; non-negative means inlier.
    pub fn decision(&self, x: ArrayView1<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let x = x.to_vec();
        Ok(self.kernel_sum(&x) - self.rho)
    }

    pub fn decision_rows(&self, data: ArrayView2<f64>) -> Result<Vec<f64>> {
        crate::numcore::par_rows(data, |r| self.decision(r))
    }
}

fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    0.5 * alpha.iter().zip(grad).map(|(a, g)| a * g).sum::<f64>()
}

/// Train on the rows of `data`.
pub fn ocsvm_train(data: ArrayView2<f64>, config: &OcSvmConfig) -> Result<OcSvmFit> {
    config.validate()?;
    let (n, _d) = data.dim();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "one-class SVM needs at least 2 training points, got {n}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite training data".into()));
    }
    let gamma = match config.gamma {
        Gamma::Scale => gamma_scale(data)?,
        Gamma::Fixed(g) => g,
    };
    let kernel = KernelParams::new(gamma)?;
    let gram = gram_matrix(data, kernel);

    let upper = 1.0 / (config.nu * n as f64);
    let mut alpha = vec![1.0 / n as f64; n];
    // gradient of the dual objective: K α
    let mut grad: Vec<f64> = gram.rows().into_iter().map(|r| r.sum() / n as f64).collect();

    let mut trace = vec![dual_objective(&alpha, &grad)];
    let mut objective = trace[0];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        // i: mass can leave (α_i > 0), largest gradient
        // j: mass can arrive (α_j < C), smallest gradient
        let mut i_best: Option<usize> = None;
        let mut j_best: Option<usize> = None;
        for t in 0..n {
            if alpha[t] > 0.0 && i_best.is_none_or(|i| grad[t] > grad[i]) {
                i_best = Some(t);
            }
            if alpha[t] < upper && j_best.is_none_or(|j| grad[t] < grad[j]) {
                j_best = Some(t);
            }
        }
        let (i, j) = match (i_best, j_best) {
            (Some(i), Some(j)) if i != j => (i, j),
            _ => {
                converged = true;
                break;
            }
        };
        let gap = grad[i] - grad[j];
        if gap <= config.tol {
            converged = true;
            break;
        }

        let curvature = gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]];
        let room = alpha[i].min(upper - alpha[j]);
        let step = if curvature > 1e-12 {
            (gap / curvature).min(room)
        } else {
            room
        };
        if step <= 0.0 {
            converged = true;
            break;
        }

        if step == alpha[i] {
            alpha[i] = 0.0;
        } else {
            alpha[i] -= step;
        }
        if step == upper - alpha[j] {
            alpha[j] = upper;
        } else {
            alpha[j] += step;
        }
        let (ki, kj) = (gram.row(i), gram.row(j));
        for t in 0..n {
            grad[t] += step * (kj[t] - ki[t]);
        }
        objective += -step * gap + 0.5 * step * step * curvature;
        trace.push(objective);
        iterations += 1;
    }

    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let mut support_vectors = Array2::zeros((support.len(), data.ncols()));
    for (row, &t) in support.iter().enumerate() {
        support_vectors.row_mut(row).assign(&data.row(t));
    }
    let mut model = OcSvmModel {
        gamma,
        rho: 0.0,
        alphas: support.iter().map(|&t| alpha[t]).collect(),
        support_vectors,
        converged,
    };

    // ρ is the smallest kernel sum over rows that could still take mass
    // (α < C); those rows then score f >= 0 exactly, and only rows at the
    // upper bound, at most ν n of them, can fall below zero. With every
    // row at the bound the largest kernel sum over support vectors is used.
    let sums: Vec<f64> = data
        .rows()
        .into_iter()
        .map(|r| model.kernel_sum(&r.to_vec()))
        .collect();
    let below_upper = (0..n).filter(|&t| alpha[t] < upper).map(|t| sums[t]);
    model.rho = match below_upper.clone().next() {
        Some(_) => below_upper.fold(f64::INFINITY, f64::min),
        None => support.iter().map(|&t| sums[t]).fold(f64::NEG_INFINITY, f64::max),
    };
    if !model.rho.is_finite() {
        return Err(Error::Numeric("offset is not finite".into()));
    }

    Ok(OcSvmFit {
        model,
        dual: alpha,
        upper,
        iterations,
        objective_trace: trace,
    })
}
