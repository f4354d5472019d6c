//! Central finite differences against the hand-written backward passes,
//! over every weight of the 512-input network on a 3-sample batch.
//!
//! A dense-layer weight `W[j][k]` of the encoder only moves code `z_j`, by
//! `±ε·h_k`, so those coordinates are perturbed from cached codes; decoder
//! weights likewise reuse the cached codes. Conv weights go through the
//! library loss functions end to end. The loss formulas used on cached codes
//! are pinned to the library's losses at the unperturbed weights.

#![allow(clippy::needless_range_loop)]

use lingsel::dsvdd::{reconstruction_grad, reconstruction_loss, svdd_grad, svdd_loss, Arch, DecoderNet, EncoderNet};
use lingsel::numcore::{sq_dist, Rng};

pub const EPS: f64 = 1e-5;
pub const MAX_REL: f64 = 1e-4;
// Central differences at EPS on an O(1) loss carry ~1e-11 of roundoff, so
// gradients smaller than FLOOR are held to an absolute 1e-10 instead.
const FLOOR: f64 = 1e-6;
const LATENT: usize = 32;

fn batch(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(seed);
    (0..3).map(|_| (0..512).map(|_| rng.gaussian()).collect()).collect()
}

fn nets(seed: u64) -> (EncoderNet, DecoderNet) {
    let arch = Arch::new(512, LATENT);
    let mut rng = Rng::new(seed);
    (EncoderNet::init(arch, &mut rng), DecoderNet::init(arch, &mut rng))
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Worst {
    pub err: f64,
    pub at: usize,
}

impl Worst {
    fn record(&mut self, i: usize, analytic: f64, up: f64, down: f64) {
        let e = rel_err(analytic, (up - down) / (2.0 * EPS));
        if e > self.err {
            *self = Worst { err: e, at: i };
        }
    }
}

fn assert_close(a: f64, b: f64) {
    assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0), "{a} vs {b}");
}

fn conv_weight_count(enc: &EncoderNet) -> usize {
    let layers = enc.layers();
    assert_eq!(layers[2].0, "dense");
    layers[0].2.len() + layers[1].2.len()
}

fn mse(out: &[f64], x: &[f64]) -> f64 {
    out.iter().zip(x).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / x.len() as f64
}

fn recon_from_codes(dec: &DecoderNet, codes: &[Vec<f64>], xs: &[Vec<f64>]) -> f64 {
    codes.iter().zip(xs).map(|(z, x)| mse(&dec.forward(z), x)).sum::<f64>() / xs.len() as f64
}

/// Worst encoder and decoder errors for the reconstruction loss.
pub fn reconstruction_check() -> (Worst, Worst) {
    let xs = batch(11);
    let b: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let (enc, dec) = nets(5);
    let (loss, g_enc, g_dec) = reconstruction_grad(&enc, &dec, &b);
    assert_eq!(loss, reconstruction_loss(&enc, &dec, &b));
    let traces: Vec<_> = xs.iter().map(|x| enc.forward_trace(x)).collect();
    let codes: Vec<Vec<f64>> = traces.iter().map(|t| t.z.clone()).collect();
    assert_close(recon_from_codes(&dec, &codes, &xs), loss);

    let mut worst = Worst::default();
    let n_conv = conv_weight_count(&enc);
    let mut e = enc.clone();
    for i in 0..n_conv {
        let w = enc.weights()[i];
        e.weights_mut()[i] = w + EPS;
        let up = reconstruction_loss(&e, &dec, &b);
        e.weights_mut()[i] = w - EPS;
        let down = reconstruction_loss(&e, &dec, &b);
        e.weights_mut()[i] = w;
        worst.record(i, g_enc[i], up, down);
    }
    let flat = traces[0].act2.len();
    let mut shifted = codes.clone();
    for i in n_conv..enc.weights().len() {
        let (j, k) = ((i - n_conv) / flat, (i - n_conv) % flat);
        let mut eval = |sign: f64| {
            for (s, t) in shifted.iter_mut().zip(&traces) {
                s[j] = t.z[j] + sign * EPS * t.act2[k];
            }
            recon_from_codes(&dec, &shifted, &xs)
        };
        let (up, down) = (eval(1.0), eval(-1.0));
        for (s, c) in shifted.iter_mut().zip(&codes) {
            s[j] = c[j];
        }
        worst.record(i, g_enc[i], up, down);
    }
    let enc_worst = worst;

    let mut worst = Worst::default();
    let mut d = dec.clone();
    for i in 0..dec.weights().len() {
        let w = dec.weights()[i];
        d.weights_mut()[i] = w + EPS;
        let up = recon_from_codes(&d, &codes, &xs);
        d.weights_mut()[i] = w - EPS;
        let down = recon_from_codes(&d, &codes, &xs);
        d.weights_mut()[i] = w;
        worst.record(i, g_dec[i], up, down);
    }
    (enc_worst, worst)
}

/// Worst encoder error for the SVDD objective.
pub fn svdd_check() -> Worst {
    let xs = batch(12);
    let b: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let (enc, _) = nets(6);
    let mut rng = Rng::new(7);
    let center: Vec<f64> = (0..LATENT).map(|_| rng.gaussian()).collect();
    // a decay large enough to matter next to the distance term
    let wd = 1e-2;
    let (loss, grad) = svdd_grad(&enc, &center, wd, &b);
    assert_eq!(loss, svdd_loss(&enc, &center, wd, &b));

    let traces: Vec<_> = xs.iter().map(|x| enc.forward_trace(x)).collect();
    let sq_norm: f64 = enc.weights().iter().map(|w| w * w).sum();
    let objective = |codes: &mut dyn Iterator<Item = f64>, sq_norm: f64| {
        codes.sum::<f64>() / xs.len() as f64 + 0.5 * wd * sq_norm
    };
    let base = objective(&mut traces.iter().map(|t| sq_dist(&t.z, &center)), sq_norm);
    assert_close(base, loss);

    let mut worst = Worst::default();
    let n_conv = conv_weight_count(&enc);
    let mut e = enc.clone();
    for i in 0..n_conv {
        let w = enc.weights()[i];
        e.weights_mut()[i] = w + EPS;
        let up = svdd_loss(&e, &center, wd, &b);
        e.weights_mut()[i] = w - EPS;
        let down = svdd_loss(&e, &center, wd, &b);
        e.weights_mut()[i] = w;
        worst.record(i, grad[i], up, down);
    }
    let flat = traces[0].act2.len();
    for i in n_conv..enc.weights().len() {
        let (j, k) = ((i - n_conv) / flat, (i - n_conv) % flat);
        let w = enc.weights()[i];
        let eval = |sign: f64| {
            let norm = sq_norm - w * w + (w + sign * EPS).powi(2);
            let dists = traces.iter().map(|t| {
                let mut z = t.z.clone();
                z[j] += sign * EPS * t.act2[k];
                sq_dist(&z, &center)
            });
            objective(&mut dists.into_iter(), norm)
        };
        worst.record(i, grad[i], eval(1.0), eval(-1.0));
    }
    worst
}
