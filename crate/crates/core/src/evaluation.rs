//! Positive/negative error rates and synthetic labelled suites.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, UtteranceRecord};
use crate::error::{Error, Result};
use crate::numcore::Rng;

/// Synthetic utterance durations are drawn uniformly from this range (seconds).
pub const SYNTH_DURATION_RANGE: (f64, f64) = (5.0, 25.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    /// Fraction of target utterances classified as outliers.
    pub pos_err: f64,
    /// Fraction of non-target utterances classified as inliers.
    pub neg_err: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Inlier ⇔ `decision >= threshold`.
pub fn evaluate_classifier(decisions_pos: &[f64], decisions_neg: &[f64], threshold: f64) -> Result<ErrorRates> {
    if decisions_pos.is_empty() || decisions_neg.is_empty() {
        return Err(Error::EmptyInput("positive and negative sets must both be non-empty".into()));
    }
    let missed = decisions_pos.iter().filter(|&&d| d < threshold).count();
    let accepted = decisions_neg.iter().filter(|&&d| d >= threshold).count();
    Ok(ErrorRates {
        pos_err: missed as f64 / decisions_pos.len() as f64,
        neg_err: accepted as f64 / decisions_neg.len() as f64,
        n_pos: decisions_pos.len(),
        n_neg: decisions_neg.len(),
    })
}

/// Target rows ~ N(0, I); other rows ~ N(μ, I) with `||μ|| = separation` along
/// a seeded random direction. Ids are `tgt-NNNNN` and `oth-NNNNN`.
pub fn gen_synthetic_suite(
    seed: u64,
    n_target: usize,
    n_other: usize,
    dim: usize,
    separation: f64,
) -> Result<(Corpus, Corpus)> {
    if n_target == 0 || n_other == 0 || dim == 0 {
        return Err(Error::InvalidConfig("sizes and dimension must be at least 1".into()));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidConfig("separation must be non-negative".into()));
    }
    let root = Rng::new(seed);
    let mut dir_rng = root.split(0);
    let mut direction: Vec<f64> = (0..dim).map(|_| dir_rng.gaussian()).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v *= separation / norm);

    let draw = |stream: u64, n: usize, prefix: &str, shift: Option<&[f64]>| {
        let mut rng = root.split(stream);
        let (lo, hi) = SYNTH_DURATION_RANGE;
        let records = (0..n)
            .map(|i| {
                let embedding = (0..dim)
                    .map(|k| rng.gaussian() + shift.map_or(0.0, |m| m[k]))
                    .collect();
                let duration_sec = lo + (hi - lo) * rng.uniform();
                UtteranceRecord {
                    id: format!("{prefix}-{i:05}"),
                    duration_sec,
                    embedding,
                }
            })
            .collect();
        Corpus::new(records)
    };
    let target = draw(1, n_target, "tgt", None)?;
    let other = draw(2, n_other, "oth", Some(&direction))?;
    Ok((target, other))
}

/// Fixed-schema evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_type: String,
    pub threshold: f64,
    #[serde(flatten)]
    pub rates: ErrorRates,
}

impl EvaluationReport {
    /// Aligned plain-text table, rates in percent.
    pub fn table(&self) -> String {
        let name = self.model_type.to_uppercase();
        let w = name.len().max(6);
        format!(
            "{:<6} {:>w$}\n{:<6} {:>w$.1}\n{:<6} {:>w$.1}\n",
            "",
            name,
            "Pos.",
            100.0 * self.rates.pos_err,
            "Neg.",
            100.0 * self.rates.neg_err,
        )
    }
}
