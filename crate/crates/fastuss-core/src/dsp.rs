//! STFT / iSTFT and the band-split encoder / band-wise decoder.
//!
//! Analysis uses centered frames with reflect padding and a periodic Hann
//! window. Synthesis applies the same window and divides by the summed
//! squared window, which reconstructs the input exactly wherever that sum is
//! nonzero. The shipped hop is n_fft/3, for which the squared-window sum is
//! analytically constant over interior samples.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{matmul, rms_group_norm, swish_scalar, Tensor};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Spectrogram<T> {
    /// [2 x T x n_bins]: real and imaginary planes.
    pub values: Tensor<T>,
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    /// Length of the waveform this spectrogram was computed from, when known.
    pub orig_len: Option<usize>,
}

impl<T: Real> Spectrogram<T> {
    pub fn n_frames(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn n_bins(&self) -> usize {
        self.values.shape()[2]
    }

    #[inline]
    pub fn re(&self, t: usize, k: usize) -> T {
        let (frames, bins) = (self.n_frames(), self.n_bins());
        debug_assert!(t < frames);
        self.values.data()[t * bins + k]
    }

    #[inline]
    pub fn im(&self, t: usize, k: usize) -> T {
        let (frames, bins) = (self.n_frames(), self.n_bins());
        self.values.data()[frames * bins + t * bins + k]
    }

    /// One frame as interleaved [re0, im0, re1, im1, ...].
    pub fn frame_interleaved(&self, t: usize) -> Vec<T> {
        let bins = self.n_bins();
        let mut out = Vec::with_capacity(2 * bins);
        for k in 0..bins {
            out.push(self.re(t, k));
            out.push(self.im(t, k));
        }
        out
    }
}

/// Periodic Hann window of length n.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Max deviation of sum_k w^2(t - k*hop) from its interior mean, over one
/// interior period. Zero (to rounding) means the pair is COLA for squared
/// windows.
pub fn cola_deviation(window: &[f64], hop: usize) -> f64 {
    let n = window.len();
    // evaluate over an interior stretch far from the edges
    let lo = 2 * n;
    let hi = 3 * n;
    let sums: Vec<f64> = (lo..hi)
        .map(|t| {
            let mut s = 0.0;
            let mut k = (t.saturating_sub(n - 1)) / hop;
            while k * hop <= t {
                let j = t - k * hop;
                if j < n {
                    s += window[j] * window[j];
                }
                k += 1;
            }
            s
        })
        .collect();
    let mean = sums.iter().sum::<f64>() / sums.len() as f64;
    sums.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max)
}

fn reflect_pad<T: Real>(x: &[T], pad: usize) -> Result<Vec<T>> {
    if x.len() < pad + 1 {
        return Err(Error::Config(format!(
            "signal of {} samples too short for reflect padding of {pad}",
            x.len()
        )));
    }
    let mut out = Vec::with_capacity(x.len() + 2 * pad);
    for i in (1..=pad).rev() {
        out.push(x[i]);
    }
    out.extend_from_slice(x);
    for i in (x.len() - pad - 1..x.len() - 1).rev() {
        out.push(x[i]);
    }
    Ok(out)
}

/// Centered STFT with reflect padding.
pub fn stft<T: Real>(
    x: &[T],
    n_fft: usize,
    hop: usize,
    window: &[f64],
    sample_rate: u32,
) -> Result<Spectrogram<T>> {
    if hop == 0 || hop > n_fft {
        return Err(Error::Config(format!("hop {hop} must be in 1..=n_fft {n_fft}")));
    }
    if window.len() != n_fft {
        return Err(Error::Config("window length != n_fft".into()));
    }
    if x.is_empty() {
        return Err(Error::Config("empty signal".into()));
    }
    let pad = n_fft / 2;
    let padded = reflect_pad(x, pad)?;
    if padded.len() < n_fft {
        return Err(Error::Config("signal shorter than one frame".into()));
    }
    let n_frames = 1 + (padded.len() - n_fft) / hop;
    let n_bins = n_fft / 2 + 1;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut values = Tensor::<T>::zeros(vec![2, n_frames, n_bins]);
    let mut buf = vec![Complex::new(0.0f64, 0.0f64); n_fft];
    for t in 0..n_frames {
        for i in 0..n_fft {
            buf[i] = Complex::new(padded[t * hop + i].to_f() * window[i], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..n_bins {
            values.data_mut()[t * n_bins + k] = T::from_f(buf[k].re);
            values.data_mut()[n_frames * n_bins + t * n_bins + k] = T::from_f(buf[k].im);
        }
    }
    Ok(Spectrogram {
        values,
        sample_rate,
        n_fft,
        hop,
        orig_len: Some(x.len()),
    })
}

/// Inverse STFT via windowed overlap-add divided by the squared-window sum.
pub fn istft<T: Real>(spec: &Spectrogram<T>, window: &[f64]) -> Result<Vec<T>> {
    let orig_len = spec.orig_len.ok_or_else(|| {
        Error::Config("spectrogram does not record the source length; use istft_with_len".into())
    })?;
    istft_with_len(spec, window, orig_len)
}

pub fn istft_with_len<T: Real>(
    spec: &Spectrogram<T>,
    window: &[f64],
    out_len: usize,
) -> Result<Vec<T>> {
    let n_fft = spec.n_fft;
    let hop = spec.hop;
    if window.len() != n_fft {
        return Err(Error::Config("window length != n_fft".into()));
    }
    let n_frames = spec.n_frames();
    let n_bins = spec.n_bins();
    let padded_len = (n_frames - 1) * hop + n_fft;

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n_fft);
    let mut acc = vec![0.0f64; padded_len];
    let mut wsum = vec![0.0f64; padded_len];
    let mut buf = vec![Complex::new(0.0f64, 0.0f64); n_fft];
    for t in 0..n_frames {
        for k in 0..n_bins {
            buf[k] = Complex::new(spec.re(t, k).to_f(), spec.im(t, k).to_f());
        }
        // Hermitian symmetry for the upper half
        for k in n_bins..n_fft {
            buf[k] = buf[n_fft - k].conj();
        }
        ifft.process(&mut buf);
        let scale = 1.0 / n_fft as f64;
        for i in 0..n_fft {
            acc[t * hop + i] += buf[i].re * scale * window[i];
            wsum[t * hop + i] += window[i] * window[i];
        }
    }
    let pad = n_fft / 2;
    if pad + out_len > padded_len {
        return Err(Error::Config(format!(
            "requested {out_len} samples but spectrogram covers only {}",
            padded_len.saturating_sub(pad)
        )));
    }
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let p = pad + i;
        let v = if wsum[p] > 1e-12 { acc[p] / wsum[p] } else { 0.0 };
        out.push(T::from_f(v));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Band layout
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandLayout {
    pub n_bins: usize,
    /// Contiguous, disjoint [start, end) ranges covering [0, n_bins).
    pub bands: Vec<(usize, usize)>,
}

impl BandLayout {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn width(&self, b: usize) -> usize {
        let (s, e) = self.bands[b];
        e - s
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Deterministic mel-spaced partition of `n_bins` bins into `n_bands`
/// contiguous bands with non-decreasing widths.
///
/// Edges are placed uniformly in mel (nominal 24 kHz Nyquist), snapped to
/// integer bins while keeping every band at least one bin wide, and the
/// resulting width multiset is sorted ascending so narrow bands sit at low
/// frequencies and widths never decrease toward Nyquist.
pub fn make_band_layout(n_bins: usize, n_bands: usize) -> Result<BandLayout> {
    if n_bands == 0 {
        return Err(Error::Config("need at least one band".into()));
    }
    if n_bands > n_bins {
        return Err(Error::Config(format!(
            "cannot split {n_bins} bins into {n_bands} bands"
        )));
    }
    let nyquist = 24_000.0f64;
    let mel_max = hz_to_mel(nyquist);
    let mut edges = vec![0usize; n_bands + 1];
    edges[n_bands] = n_bins;
    for b in 1..n_bands {
        let hz = mel_to_hz(mel_max * b as f64 / n_bands as f64);
        let ideal = (hz / nyquist * (n_bins as f64 - 1.0)).round() as usize;
        let lo = edges[b - 1] + 1;
        let hi = n_bins - (n_bands - b);
        edges[b] = ideal.clamp(lo, hi);
    }
    let mut widths: Vec<usize> = (0..n_bands).map(|b| edges[b + 1] - edges[b]).collect();
    widths.sort_unstable();
    let mut bands = Vec::with_capacity(n_bands);
    let mut start = 0;
    for w in widths {
        bands.push((start, start + w));
        start += w;
    }
    debug_assert_eq!(start, n_bins);
    Ok(BandLayout { n_bins, bands })
}

// ---------------------------------------------------------------------------
// Band-split encoder / band-wise decoder
// ---------------------------------------------------------------------------

/// Per-band weights for the encoder: RMS norm over the interleaved
/// real/imaginary bins, then an affine map to D channels.
pub struct BandEncoderWeights<'a, T> {
    /// per band: gamma [2w], weight [2w x D], bias [D]
    pub bands: Vec<(&'a Tensor<T>, &'a Tensor<T>, &'a Tensor<T>)>,
}

/// Per-band weights for the decoder MLP: D -> 4D -> 2w with a sigmoid-gated
/// output pair.
pub struct BandDecoderWeights<'a, T> {
    /// per band: gamma [D], hidden ([D x 4D], [4D]), value ([4D x 2w], [2w]),
    /// gate ([4D x 2w], [2w])
    pub bands: Vec<BandDecoderBand<'a, T>>,
}

pub struct BandDecoderBand<'a, T> {
    pub norm_gamma: &'a Tensor<T>,
    pub hidden_w: &'a Tensor<T>,
    pub hidden_b: &'a Tensor<T>,
    pub value_w: &'a Tensor<T>,
    pub value_b: &'a Tensor<T>,
    pub gate_w: &'a Tensor<T>,
    pub gate_b: &'a Tensor<T>,
}

fn add_row_bias<T: Real>(x: &mut Tensor<T>, bias: &Tensor<T>) {
    let (m, n) = (x.shape()[0], x.shape()[1]);
    debug_assert_eq!(bias.len(), n);
    for i in 0..m {
        for j in 0..n {
            let v = x.at2(i, j).to_f() + bias.data()[j].to_f();
            x.set2(i, j, T::from_f(v));
        }
    }
}

/// Encode a spectrogram into the [D x T x F] feature grid.
pub fn band_encode<T: Real>(
    spec: &Spectrogram<T>,
    layout: &BandLayout,
    weights: &BandEncoderWeights<T>,
) -> Result<Tensor<T>> {
    if layout.n_bins != spec.n_bins() {
        return Err(Error::Shape("band layout does not match spectrogram bins".into()));
    }
    if weights.bands.len() != layout.n_bands() {
        return Err(Error::Shape("encoder weights do not match band count".into()));
    }
    let t_frames = spec.n_frames();
    let f_bands = layout.n_bands();
    let d = weights.bands[0].2.len();

    let mut z = Tensor::<T>::zeros(vec![d, t_frames, f_bands]);
    for (b, &(gamma, w, bias)) in weights.bands.iter().enumerate() {
        let (s, e) = layout.bands[b];
        let width2 = 2 * (e - s);
        if gamma.len() != width2 || w.shape() != [width2, d] {
            return Err(Error::Shape(format!("encoder band {b} weight shape mismatch")));
        }
        // gather [T x 2w] interleaved re/im for this band
        let mut x = Tensor::<T>::zeros(vec![t_frames, width2]);
        for t in 0..t_frames {
            for (i, k) in (s..e).enumerate() {
                x.set2(t, 2 * i, spec.re(t, k));
                x.set2(t, 2 * i + 1, spec.im(t, k));
            }
        }
        let normed = rms_group_norm(&x, gamma, 1, NORM_EPS)?;
        let mut proj = matmul(&normed, w)?;
        add_row_bias(&mut proj, bias);
        for t in 0..t_frames {
            for c in 0..d {
                z.data_mut()[c * (t_frames * f_bands) + t * f_bands + b] = proj.at2(t, c);
            }
        }
    }
    Ok(z)
}

/// Decode a [D x T x F] feature grid back to a spectrogram.
pub fn band_decode<T: Real>(
    features: &Tensor<T>,
    layout: &BandLayout,
    weights: &BandDecoderWeights<T>,
    sample_rate: u32,
    n_fft: usize,
    hop: usize,
) -> Result<Spectrogram<T>> {
    let d = features.shape()[0];
    let t_frames = features.shape()[1];
    let f_bands = features.shape()[2];
    if f_bands != layout.n_bands() || weights.bands.len() != f_bands {
        return Err(Error::Shape("decoder weights do not match band count".into()));
    }
    let n_bins = layout.n_bins;
    let mut values = Tensor::<T>::zeros(vec![2, t_frames, n_bins]);
    for (b, wb) in weights.bands.iter().enumerate() {
        let (s, e) = layout.bands[b];
        let width2 = 2 * (e - s);
        if wb.hidden_w.shape()[0] != d || wb.value_w.shape()[1] != width2 {
            return Err(Error::Shape(format!("decoder band {b} weight shape mismatch")));
        }
        let mut x = Tensor::<T>::zeros(vec![t_frames, d]);
        for t in 0..t_frames {
            for c in 0..d {
                x.set2(t, c, features.data()[c * (t_frames * f_bands) + t * f_bands + b]);
            }
        }
        let normed = rms_group_norm(&x, wb.norm_gamma, 1, NORM_EPS)?;
        let mut hidden = matmul(&normed, wb.hidden_w)?;
        add_row_bias(&mut hidden, wb.hidden_b);
        for v in hidden.data_mut() {
            *v = T::from_f(v.to_f().tanh());
        }
        let mut value = matmul(&hidden, wb.value_w)?;
        add_row_bias(&mut value, wb.value_b);
        let mut gate = matmul(&hidden, wb.gate_w)?;
        add_row_bias(&mut gate, wb.gate_b);
        for t in 0..t_frames {
            for (i, k) in (s..e).enumerate() {
                let sig_re = sigmoid(gate.at2(t, 2 * i).to_f());
                let sig_im = sigmoid(gate.at2(t, 2 * i + 1).to_f());
                let re = value.at2(t, 2 * i).to_f() * sig_re;
                let im = value.at2(t, 2 * i + 1).to_f() * sig_im;
                values.data_mut()[t * n_bins + k] = T::from_f(re);
                values.data_mut()[t_frames * n_bins + t * n_bins + k] = T::from_f(im);
            }
        }
    }
    Ok(Spectrogram {
        values,
        sample_rate,
        n_fft,
        hop,
        orig_len: None,
    })
}

fn sigmoid(x: f64) -> f64 {
    // reuse swish(x) = x * sigmoid(x) identity at x != 0 is not worth it
    let _ = swish_scalar;
    1.0 / (1.0 + (-x).exp())
}
