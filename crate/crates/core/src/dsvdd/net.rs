//! Fixed bias-free 1-D convolutional encoder/decoder with hand-written
//! forward and backward passes.
//!
//! Encoder: `conv(1→8, k5, s2, p2) → lrelu → conv(8→4, k5, s2, p2) → lrelu → dense(4·L2 → latent)`.
//! Decoder: `dense(latent → 4·L2) → lrelu → convT(4→8) → lrelu → convT(8→1)`.
//!
//! All weights of a network live in one flat vector; the layer slices are
//! fixed by [`Arch`].

use crate::numcore::Rng;

pub const KERNEL: usize = 5;
pub const STRIDE: usize = 2;
pub const PAD: usize = 2;
pub const CH1: usize = 8;
pub const CH2: usize = 4;
pub const LEAKY_SLOPE: f64 = 0.1;

/// Layer geometry for a given input length and latent width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    pub input_len: usize,
    pub len1: usize,
    pub len2: usize,
    pub latent_dim: usize,
}

fn conv_out_len(len: usize) -> usize {
    (len + 2 * PAD - KERNEL) / STRIDE + 1
}

impl Arch {
    pub fn new(input_len: usize, latent_dim: usize) -> Self {
        let len1 = conv_out_len(input_len);
        let len2 = conv_out_len(len1);
        Arch {
            input_len,
            len1,
            len2,
            latent_dim,
        }
    }

    pub fn flat_len(&self) -> usize {
        CH2 * self.len2
    }

    /// Encoder layer sizes: conv1, conv2, dense.
    pub fn encoder_shapes(&self) -> [(&'static str, [usize; 3]); 3] {
        [
            ("conv1", [CH1, 1, KERNEL]),
            ("conv2", [CH2, CH1, KERNEL]),
            ("dense", [self.latent_dim, self.flat_len(), 1]),
        ]
    }

    /// Decoder layer sizes: dense, deconv1, deconv2.
    pub fn decoder_shapes(&self) -> [(&'static str, [usize; 3]); 3] {
        [
            ("dense", [self.flat_len(), self.latent_dim, 1]),
            ("deconv1", [CH2, CH1, KERNEL]),
            ("deconv2", [CH1, 1, KERNEL]),
        ]
    }
}

fn offsets(shapes: &[(&'static str, [usize; 3]); 3]) -> [std::ops::Range<usize>; 3] {
    let mut start = 0;
    shapes.map(|(_, s)| {
        let len = s.iter().product::<usize>();
        let r = start..start + len;
        start += len;
        r
    })
}

fn init_weights(shapes: &[(&'static str, [usize; 3]); 3], fan_in: [usize; 3], rng: &mut Rng) -> Vec<f64> {
    let mut w = Vec::new();
    for ((_, s), fan) in shapes.iter().zip(fan_in) {
        let std = (1.0 / fan as f64).sqrt();
        let n: usize = s.iter().product();
        w.extend((0..n).map(|_| std * rng.gaussian()));
    }
    w
}

// ---- primitive layers -------------------------------------------------------

/// Indices `t < n_t` for which tap `k` lands inside `0..n_pos` at
/// `t·S + k − P`.
fn taps(k: usize, n_t: usize, n_pos: usize) -> std::ops::Range<usize> {
    let (s, p, k) = (STRIDE as isize, PAD as isize, k as isize);
    let lo = ((p - k).max(0) + s - 1) / s;
    let hi = ((n_pos as isize - 1 + p - k).div_euclid(s) + 1).clamp(0, n_t as isize);
    (lo.min(hi) as usize)..(hi as usize)
}

/// Position `t·S + k − P` equals `S·(t + off) + phase`.
fn phase_of(k: usize) -> (usize, isize) {
    let d = k as isize - PAD as isize;
    (d.rem_euclid(STRIDE as isize) as usize, d.div_euclid(STRIDE as isize))
}

/// Split a sequence into its `S` strided phases so every tap reads a
/// contiguous run.
fn deinterleave(x: &[f64]) -> [Vec<f64>; STRIDE] {
    std::array::from_fn(|ph| x.iter().skip(ph).step_by(STRIDE).copied().collect())
}

fn interleave_add(phases: &[Vec<f64>; STRIDE], out: &mut [f64]) {
    for (ph, v) in phases.iter().enumerate() {
        out.iter_mut().skip(ph).step_by(STRIDE).zip(v).for_each(|(o, x)| *o += x);
    }
}

fn zeroed_phases(len: usize) -> [Vec<f64>; STRIDE] {
    std::array::from_fn(|ph| vec![0.0; len.saturating_sub(ph).div_ceil(STRIDE)])
}

/// Slice of phase data read by tap `k` over output range `r`.
fn tap_slice<'a>(phases: &'a [Vec<f64>; STRIDE], k: usize, r: &std::ops::Range<usize>) -> &'a [f64] {
    let (ph, off) = phase_of(k);
    let start = (r.start as isize + off) as usize;
    &phases[ph][start..start + r.len()]
}

fn tap_slice_mut<'a>(phases: &'a mut [Vec<f64>; STRIDE], k: usize, r: &std::ops::Range<usize>) -> &'a mut [f64] {
    let (ph, off) = phase_of(k);
    let start = (r.start as isize + off) as usize;
    &mut phases[ph][start..start + r.len()]
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

/// `out[o][t] = Σ_c Σ_k w[o][c][k] · in[c][t·S + k − P]`
fn conv_forward(input: &[f64], in_ch: usize, in_len: usize, w: &[f64], out_ch: usize, out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_ch * out_len];
    for c in 0..in_ch {
        let xp = deinterleave(&input[c * in_len..][..in_len]);
        for o in 0..out_ch {
            let wk = &w[(o * in_ch + c) * KERNEL..][..KERNEL];
            let y = &mut out[o * out_len..][..out_len];
            for (k, &wv) in wk.iter().enumerate() {
                let r = taps(k, out_len, in_len);
                let xs = tap_slice(&xp, k, &r);
                axpy(&mut y[r], wv, xs);
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    in_ch: usize,
    in_len: usize,
    w: &[f64],
    out_ch: usize,
    out_len: usize,
    grad_out: &[f64],
    grad_w: &mut [f64],
    mut grad_in: Option<&mut [f64]>,
) {
    for c in 0..in_ch {
        let xp = deinterleave(&input[c * in_len..][..in_len]);
        let mut gp = zeroed_phases(in_len);
        for o in 0..out_ch {
            let go = &grad_out[o * out_len..][..out_len];
            let widx = (o * in_ch + c) * KERNEL;
            for k in 0..KERNEL {
                let r = taps(k, out_len, in_len);
                grad_w[widx + k] += dot4(&go[r.clone()], tap_slice(&xp, k, &r));
                if grad_in.is_some() {
                    axpy(tap_slice_mut(&mut gp, k, &r), w[widx + k], &go[r]);
                }
            }
        }
        if let Some(gi) = grad_in.as_deref_mut() {
            interleave_add(&gp, &mut gi[c * in_len..][..in_len]);
        }
    }
}

/// Adjoint of [`conv_forward`]; weights laid out `[in][out][k]`.
fn deconv_forward(input: &[f64], in_ch: usize, in_len: usize, w: &[f64], out_ch: usize, out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_ch * out_len];
    for o in 0..out_ch {
        let mut yp = zeroed_phases(out_len);
        for i in 0..in_ch {
            let x = &input[i * in_len..][..in_len];
            let wk = &w[(i * out_ch + o) * KERNEL..][..KERNEL];
            for (k, &wv) in wk.iter().enumerate() {
                let r = taps(k, in_len, out_len);
                axpy(tap_slice_mut(&mut yp, k, &r), wv, &x[r]);
            }
        }
        interleave_add(&yp, &mut out[o * out_len..][..out_len]);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn deconv_backward(
    input: &[f64],
    in_ch: usize,
    in_len: usize,
    w: &[f64],
    out_ch: usize,
    out_len: usize,
    grad_out: &[f64],
    grad_w: &mut [f64],
    mut grad_in: Option<&mut [f64]>,
) {
    for o in 0..out_ch {
        let gp = deinterleave(&grad_out[o * out_len..][..out_len]);
        for i in 0..in_ch {
            let x = &input[i * in_len..][..in_len];
            let widx = (i * out_ch + o) * KERNEL;
            for k in 0..KERNEL {
                let r = taps(k, in_len, out_len);
                let gs = tap_slice(&gp, k, &r);
                grad_w[widx + k] += dot4(gs, &x[r.clone()]);
                if let Some(gi) = grad_in.as_deref_mut() {
                    axpy(&mut gi[i * in_len..][r], w[widx + k], gs);
                }
            }
        }
    }
}

/// Dot product with four independent accumulators.
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y = W x` with `W` row-major `[out][in]`.
fn dense_forward(input: &[f64], w: &[f64], out_dim: usize) -> Vec<f64> {
    let in_dim = input.len();
    (0..out_dim).map(|o| dot4(&w[o * in_dim..][..in_dim], input)).collect()
}

fn dense_backward(input: &[f64], w: &[f64], grad_out: &[f64], grad_w: &mut [f64], mut grad_in: Option<&mut [f64]>) {
    let in_dim = input.len();
    for (o, &g) in grad_out.iter().enumerate() {
        let row = &mut grad_w[o * in_dim..][..in_dim];
        row.iter_mut().zip(input).for_each(|(gw, x)| *gw += g * x);
        if let Some(gi) = grad_in.as_deref_mut() {
            gi.iter_mut()
                .zip(&w[o * in_dim..][..in_dim])
                .for_each(|(gi, wv)| *gi += g * wv);
        }
    }
}

fn leaky(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { LEAKY_SLOPE * v }).collect()
}

/// Multiplies `grad` by the leaky-rectifier derivative at `pre`.
fn leaky_backward(pre: &[f64], grad: &mut [f64]) {
    grad.iter_mut().zip(pre).for_each(|(g, &p)| {
        if p <= 0.0 {
            *g *= LEAKY_SLOPE
        }
    });
}

// ---- encoder ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderNet {
    arch: Arch,
    weights: Vec<f64>,
}

/// Intermediate activations kept for the backward pass.
pub struct EncoderTrace {
    pre1: Vec<f64>,
    act1: Vec<f64>,
    pre2: Vec<f64>,
    /// Flattened input of the dense layer.
    pub act2: Vec<f64>,
    pub z: Vec<f64>,
}

impl EncoderNet {
    pub fn init(arch: Arch, rng: &mut Rng) -> Self {
        let fan_in = [KERNEL, CH1 * KERNEL, arch.flat_len()];
        let weights = init_weights(&arch.encoder_shapes(), fan_in, rng);
        EncoderNet { arch, weights }
    }

    pub fn from_weights(arch: Arch, weights: Vec<f64>) -> Option<Self> {
        let expected: usize = arch.encoder_shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        (weights.len() == expected).then_some(EncoderNet { arch, weights })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Named per-layer weight slices. There are no bias parameters.
    pub fn layers(&self) -> Vec<(&'static str, [usize; 3], &[f64])> {
        let shapes = self.arch.encoder_shapes();
        let ranges = offsets(&shapes);
        shapes
            .iter()
            .zip(ranges)
            .map(|((name, s), r)| (*name, *s, &self.weights[r]))
            .collect()
    }

    pub fn forward_trace(&self, x: &[f64]) -> EncoderTrace {
        let a = self.arch;
        let [r1, r2, r3] = offsets(&a.encoder_shapes());
        let pre1 = conv_forward(x, 1, a.input_len, &self.weights[r1], CH1, a.len1);
        let act1 = leaky(&pre1);
        let pre2 = conv_forward(&act1, CH1, a.len1, &self.weights[r2], CH2, a.len2);
        let act2 = leaky(&pre2);
        let z = dense_forward(&act2, &self.weights[r3], a.latent_dim);
        EncoderTrace {
            pre1,
            act1,
            pre2,
            act2,
            z,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).z
    }

    /// Accumulates `dL/dW` into `grad` given `dL/dz`.
    pub fn backward(&self, x: &[f64], trace: &EncoderTrace, grad_z: &[f64], grad: &mut [f64]) {
        let a = self.arch;
        let [r1, r2, r3] = offsets(&a.encoder_shapes());
        let mut g_act2 = vec![0.0; trace.act2.len()];
        dense_backward(&trace.act2, &self.weights[r3.clone()], grad_z, &mut grad[r3], Some(&mut g_act2));
        leaky_backward(&trace.pre2, &mut g_act2);
        let mut g_act1 = vec![0.0; trace.act1.len()];
        conv_backward(
            &trace.act1,
            CH1,
            a.len1,
            &self.weights[r2.clone()],
            CH2,
            a.len2,
            &g_act2,
            &mut grad[r2],
            Some(&mut g_act1),
        );
        leaky_backward(&trace.pre1, &mut g_act1);
        conv_backward(x, 1, a.input_len, &self.weights[r1.clone()], CH1, a.len1, &g_act1, &mut grad[r1], None);
    }
}

// ---- decoder ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderNet {
    arch: Arch,
    weights: Vec<f64>,
}

pub struct DecoderTrace {
    pre1: Vec<f64>,
    act1: Vec<f64>,
    pre2: Vec<f64>,
    act2: Vec<f64>,
    pub output: Vec<f64>,
}

impl DecoderNet {
    pub fn init(arch: Arch, rng: &mut Rng) -> Self {
        let fan_in = [arch.latent_dim, CH2 * KERNEL, CH1 * KERNEL];
        let weights = init_weights(&arch.decoder_shapes(), fan_in, rng);
        DecoderNet { arch, weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn forward_trace(&self, z: &[f64]) -> DecoderTrace {
        let a = self.arch;
        let [r1, r2, r3] = offsets(&a.decoder_shapes());
        let pre1 = dense_forward(z, &self.weights[r1], a.flat_len());
        let act1 = leaky(&pre1);
        let pre2 = deconv_forward(&act1, CH2, a.len2, &self.weights[r2], CH1, a.len1);
        let act2 = leaky(&pre2);
        let output = deconv_forward(&act2, CH1, a.len1, &self.weights[r3], 1, a.input_len);
        DecoderTrace {
            pre1,
            act1,
            pre2,
            act2,
            output,
        }
    }

    pub fn forward(&self, z: &[f64]) -> Vec<f64> {
        self.forward_trace(z).output
    }

    /// Accumulates `dL/dW` into `grad`; returns `dL/dz`.
    pub fn backward(&self, z: &[f64], trace: &DecoderTrace, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let a = self.arch;
        let [r1, r2, r3] = offsets(&a.decoder_shapes());
        let mut g_act2 = vec![0.0; trace.act2.len()];
        deconv_backward(
            &trace.act2,
            CH1,
            a.len1,
            &self.weights[r3.clone()],
            1,
            a.input_len,
            grad_out,
            &mut grad[r3],
            Some(&mut g_act2),
        );
        leaky_backward(&trace.pre2, &mut g_act2);
        let mut g_act1 = vec![0.0; trace.act1.len()];
        deconv_backward(
            &trace.act1,
            CH2,
            a.len2,
            &self.weights[r2.clone()],
            CH1,
            a.len1,
            &g_act2,
            &mut grad[r2],
            Some(&mut g_act1),
        );
        leaky_backward(&trace.pre1, &mut g_act1);
        let mut g_z = vec![0.0; z.len()];
        dense_backward(z, &self.weights[r1.clone()], &g_act1, &mut grad[r1], Some(&mut g_z));
        g_z
    }
}

// ---- losses -----------------------------------------------------------------

/// Mean over the batch of the per-element mean squared reconstruction error.
pub fn reconstruction_loss(enc: &EncoderNet, dec: &DecoderNet, batch: &[&[f64]]) -> f64 {
    let d = enc.arch.input_len as f64;
    batch
        .iter()
        .map(|x| {
            let out = dec.forward(&enc.forward(x));
            out.iter().zip(x.iter()).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / d
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Reconstruction loss and its gradients (encoder, decoder).
pub fn reconstruction_grad(enc: &EncoderNet, dec: &DecoderNet, batch: &[&[f64]]) -> (f64, Vec<f64>, Vec<f64>) {
    let mut g_enc = vec![0.0; enc.weights.len()];
    let mut g_dec = vec![0.0; dec.weights.len()];
    let d = enc.arch.input_len as f64;
    let scale = 2.0 / (d * batch.len() as f64);
    let mut loss = 0.0;
    for x in batch {
        let et = enc.forward_trace(x);
        let dt = dec.forward_trace(&et.z);
        let resid: Vec<f64> = dt.output.iter().zip(x.iter()).map(|(o, t)| o - t).collect();
        loss += resid.iter().map(|r| r * r).sum::<f64>() / d;
        let g_out: Vec<f64> = resid.iter().map(|r| scale * r).collect();
        let g_z = dec.backward(&et.z, &dt, &g_out, &mut g_dec);
        enc.backward(x, &et, &g_z, &mut g_enc);
    }
    (loss / batch.len() as f64, g_enc, g_dec)
}

/// `(1/B) Σ ||φ(x) − c||² + (λ/2) ||W||²`.
pub fn svdd_loss(enc: &EncoderNet, center: &[f64], weight_decay: f64, batch: &[&[f64]]) -> f64 {
    let dist = batch
        .iter()
        .map(|x| crate::numcore::sq_dist(&enc.forward(x), center))
        .sum::<f64>()
        / batch.len() as f64;
    dist + 0.5 * weight_decay * enc.weights.iter().map(|w| w * w).sum::<f64>()
}

/// One-class objective and its gradient; the returned loss includes the decay term.
pub fn svdd_grad(enc: &EncoderNet, center: &[f64], weight_decay: f64, batch: &[&[f64]]) -> (f64, Vec<f64>) {
    let mut grad: Vec<f64> = enc.weights.iter().map(|w| weight_decay * w).collect();
    let scale = 2.0 / batch.len() as f64;
    let mut dist = 0.0;
    for x in batch {
        let t = enc.forward_trace(x);
        let diff: Vec<f64> = t.z.iter().zip(center).map(|(z, c)| z - c).collect();
        dist += diff.iter().map(|v| v * v).sum::<f64>();
        let g_z: Vec<f64> = diff.iter().map(|v| scale * v).collect();
        enc.backward(x, &t, &g_z, &mut grad);
    }
    let reg = 0.5 * weight_decay * enc.weights.iter().map(|w| w * w).sum::<f64>();
    (dist / batch.len() as f64 + reg, grad)
}
