//! Deep SVDD (one-class objective).
//!
//! Pipeline: initialize encoder/decoder → autoencoder pretraining →
//! fix the hypersphere center → fine-tune the encoder to pull training
//! codes toward the center. The center never moves after it is fixed.

mod net;

pub use net::{
    reconstruction_grad, reconstruction_loss, svdd_grad, svdd_loss, Arch, DecoderNet, EncoderNet,
};

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::numcore::{check_dim, sq_dist, Rng};

/// Center components closer to zero than this are pushed out to it.
pub const CENTER_EPS: f64 = 1e-6;

const STREAM_ENCODER_INIT: u64 = 0;
const STREAM_DECODER_INIT: u64 = 1;
const STREAM_AE_SHUFFLE: u64 = 2;
const STREAM_SVDD_SHUFFLE: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct DsvddConfig {
    pub ae_epochs: usize,
    pub ae_lr: f64,
    pub enc_epochs: usize,
    pub enc_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub seed: u64,
}

impl Default for DsvddConfig {
    fn default() -> Self {
        DsvddConfig {
            ae_epochs: 2500,
            ae_lr: 1e-2,
            enc_epochs: 1000,
            enc_lr: 1e-3,
            weight_decay: 1e-6,
            batch_size: 64,
            latent_dim: 32,
            seed: 0,
        }
    }
}

impl DsvddConfig {
    /// Learning rates may be zero (a frozen run); decay must be positive.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.ae_epochs == 0 || self.enc_epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.ae_lr >= 0.0 && self.ae_lr.is_finite() && self.enc_lr >= 0.0 && self.enc_lr.is_finite()) {
            return bad("learning rates must be finite and non-negative");
        }
        if !(self.weight_decay > 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be positive");
        }
        if self.batch_size == 0 || self.latent_dim == 0 {
            return bad("batch size and latent dimension must be positive");
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer state for one flat parameter vector.
struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, len: usize) -> Self {
        Adam {
            lr,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, weights: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for ((w, g), (m, v)) in weights
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Loss bookkeeping for one training phase.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    /// Full-data loss before the first update.
    pub initial_loss: f64,
    /// Full-data loss after the last update.
    pub final_loss: f64,
    /// Mean mini-batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

fn rows_of(data: &ArrayView2<f64>) -> Vec<Vec<f64>> {
    crate::numcore::rows(data)
}

/// Epoch loop shared by both phases: fixed per-epoch shuffle, then mini-batches.
fn run_epochs(
    n: usize,
    epochs: usize,
    batch_size: usize,
    mut rng: Rng,
    mut step: impl FnMut(&[usize]) -> f64,
) -> Result<Vec<f64>> {
    let batch = batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let loss = step(chunk);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            total += loss * chunk.len() as f64;
        }
        losses.push(total / n as f64);
    }
    Ok(losses)
}

fn check_input(data: &ArrayView2<f64>) -> Result<()> {
    if data.nrows() == 0 || data.ncols() == 0 {
        return Err(Error::EmptyInput("Deep SVDD needs non-empty training data".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite training data".into()));
    }
    Ok(())
}

/// Initial encoder weights for a given config and input width.
pub fn init_encoder(input_len: usize, config: &DsvddConfig) -> EncoderNet {
    let arch = Arch::new(input_len, config.latent_dim);
    EncoderNet::init(arch, &mut Rng::new(config.seed).split(STREAM_ENCODER_INIT))
}

/// Train encoder + mirrored decoder on reconstruction, then drop the decoder.
pub fn ae_pretrain(data: ArrayView2<f64>, config: &DsvddConfig) -> Result<(EncoderNet, TrainReport)> {
    config.validate()?;
    check_input(&data)?;
    let rows = rows_of(&data);
    let root = Rng::new(config.seed);
    let mut enc = init_encoder(data.ncols(), config);
    let mut dec = DecoderNet::init(enc.arch(), &mut root.split(STREAM_DECODER_INIT));
    let all: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();

    let initial_loss = reconstruction_loss(&enc, &dec, &all);
    let mut opt_enc = Adam::new(config.ae_lr, enc.weights().len());
    let mut opt_dec = Adam::new(config.ae_lr, dec.weights().len());
    let epoch_losses = run_epochs(
        rows.len(),
        config.ae_epochs,
        config.batch_size,
        root.split(STREAM_AE_SHUFFLE),
        |idx| {
            let batch: Vec<&[f64]> = idx.iter().map(|&i| rows[i].as_slice()).collect();
            let (loss, g_enc, g_dec) = reconstruction_grad(&enc, &dec, &batch);
            opt_enc.step(enc.weights_mut(), &g_enc);
            opt_dec.step(dec.weights_mut(), &g_dec);
            loss
        },
    )?;
    let final_loss = reconstruction_loss(&enc, &dec, &all);
    if !final_loss.is_finite() || enc.weights().iter().any(|w| !w.is_finite()) {
        return Err(Error::Divergence {
            epoch: config.ae_epochs,
            loss: final_loss,
        });
    }
    Ok((
        enc,
        TrainReport {
            initial_loss,
            final_loss,
            epoch_losses,
        },
    ))
}

/// Snap components with magnitude below [`CENTER_EPS`] out to ±CENTER_EPS
/// (zero goes to +CENTER_EPS).
pub fn snap_center(mut c: Vec<f64>) -> Vec<f64> {
    for v in &mut c {
        if v.abs() < CENTER_EPS {
            *v = if *v < 0.0 { -CENTER_EPS } else { CENTER_EPS };
        }
    }
    c
}

/// Component-wise mean of `codes`, snapped away from zero.
pub fn center_from_codes(codes: &[Vec<f64>]) -> Vec<f64> {
    let width = codes.first().map_or(0, Vec::len);
    let mut c = vec![0.0; width];
    for z in codes {
        c.iter_mut().zip(z).for_each(|(a, b)| *a += b);
    }
    let n = codes.len() as f64;
    snap_center(c.into_iter().map(|v| v / n).collect())
}

/// Mean encoder output over `data`, snapped away from zero.
pub fn fix_center(encoder: &EncoderNet, data: ArrayView2<f64>) -> Result<Vec<f64>> {
    check_input(&data)?;
    check_dim(encoder.arch().input_len, data.ncols())?;
    let codes: Vec<Vec<f64>> = data.rows().into_iter().map(|r| encoder.forward(&r.to_vec())).collect();
    Ok(center_from_codes(&codes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsvddModel {
    pub encoder: EncoderNet,
    pub center: Vec<f64>,
    pub config: DsvddConfig,
    /// Squared distances of the training rows after fine-tuning, in input order.
    pub train_distances: Vec<f64>,
}

fn mean_distance(enc: &EncoderNet, center: &[f64], rows: &[Vec<f64>]) -> f64 {
    rows.iter().map(|x| sq_dist(&enc.forward(x), center)).sum::<f64>() / rows.len() as f64
}

/// Fine-tune the encoder on the one-class objective. The report's losses are
/// mean squared distances to the center (without the decay term).
pub fn dsvdd_train(
    data: ArrayView2<f64>,
    encoder: EncoderNet,
    center: Vec<f64>,
    config: &DsvddConfig,
) -> Result<(DsvddModel, TrainReport)> {
    config.validate()?;
    check_input(&data)?;
    check_dim(encoder.arch().input_len, data.ncols())?;
    check_dim(encoder.arch().latent_dim, center.len())?;
    let rows = rows_of(&data);
    let mut enc = encoder;
    let initial_loss = mean_distance(&enc, &center, &rows);
    let mut opt = Adam::new(config.enc_lr, enc.weights().len());
    let epoch_losses = run_epochs(
        rows.len(),
        config.enc_epochs,
        config.batch_size,
        Rng::new(config.seed).split(STREAM_SVDD_SHUFFLE),
        |idx| {
            let batch: Vec<&[f64]> = idx.iter().map(|&i| rows[i].as_slice()).collect();
            let (loss, grad) = svdd_grad(&enc, &center, config.weight_decay, &batch);
            opt.step(enc.weights_mut(), &grad);
            loss
        },
    )?;
    let train_distances: Vec<f64> = rows.iter().map(|x| sq_dist(&enc.forward(x), &center)).collect();
    let final_loss = train_distances.iter().sum::<f64>() / rows.len() as f64;
    if !final_loss.is_finite() || enc.weights().iter().any(|w| !w.is_finite()) {
        return Err(Error::Divergence {
            epoch: config.enc_epochs,
            loss: final_loss,
        });
    }
    if final_loss > initial_loss {
        return Err(Error::Numeric(format!(
            "mean distance to center grew from {initial_loss} to {final_loss}"
        )));
    }
    let model = DsvddModel {
        encoder: enc,
        center,
        config: config.clone(),
        train_distances,
    };
    Ok((
        model,
        TrainReport {
            initial_loss,
            final_loss,
            epoch_losses,
        },
    ))
}

/// Both training phases plus the center fix.
pub struct DsvddFit {
    pub model: DsvddModel,
    pub pretrain: TrainReport,
    pub train: TrainReport,
}

pub fn dsvdd_fit(data: ArrayView2<f64>, config: &DsvddConfig) -> Result<DsvddFit> {
    let (encoder, pretrain) = ae_pretrain(data, config)?;
    let center = fix_center(&encoder, data)?;
    let (model, train) = dsvdd_train(data, encoder, center, config)?;
    Ok(DsvddFit {
        model,
        pretrain,
        train,
    })
}

/// Nearest-rank `q`-quantile of `values`, `q` in (0, 1].
pub fn nearest_rank(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("quantile of an empty set".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidConfig(format!("quantile must be in (0, 1], got {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // small slack so q·n landing a hair above an integer does not skip a rank
    let rank = ((q * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

impl DsvddModel {
    pub fn dim(&self) -> usize {
        self.encoder.arch().input_len
    }

    pub fn distance(&self, x: ArrayView1<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(sq_dist(&self.encoder.forward(&x.to_vec()), &self.center))
    }

    /// `-||φ(x) − c||²`; always ≤ 0, higher is more target-like.
    pub fn decision(&self, x: ArrayView1<f64>) -> Result<f64> {
        Ok(-self.distance(x)?)
    }

    pub fn decision_rows(&self, data: ArrayView2<f64>) -> Result<Vec<f64>> {
        crate::numcore::par_rows(data, |r| self.decision(r))
    }

    /// Squared-distance cutoff: the `q`-quantile of the training distances.
    pub fn threshold(&self, q: f64) -> Result<f64> {
        nearest_rank(&self.train_distances, q)
    }
}

/// Quantile of the training distances computed afresh from `train_data`.
pub fn dsvdd_threshold(model: &DsvddModel, train_data: ArrayView2<f64>, q: f64) -> Result<f64> {
    let dists: Vec<f64> = train_data
        .rows()
        .into_iter()
        .map(|r| model.distance(r))
        .collect::<Result<_>>()?;
    nearest_rank(&dists, q)
}
