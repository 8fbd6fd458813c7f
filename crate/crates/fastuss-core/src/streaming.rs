//! Frame-by-frame causal inference.
//!
//! The prompt block is processed once at setup; its attention keys/values are
//! cached and never touched again. Each incoming frame then runs the
//! frequency paths in full (they are per-frame) and advances the temporal
//! paths through cached attention and causal-convolution tap buffers. Every
//! arithmetic step reproduces the offline causal forward pass in the same
//! order, so streaming and offline outputs agree bit for bit.

use crate::blocks::{
    AttnConfig, AttnWeights, ConvStage, FfnConfig, FfnVariant, FfnWeights, NORM_EPS,
};
use crate::dsp::{band_decode, band_encode, hann_window, Spectrogram};
use crate::error::{Error, Result};
use crate::masks::{build_mask_unchecked, is_stream_realizable};
use crate::model::{
    bind_block, bind_decoder, bind_encoder, condition, cross_prompt_forward, n_prompt_tokens,
    separate, validate_prompts, ModelConfig, PromptId, WeightBundle,
};
use crate::real::Real;
use crate::rng::fnv1a64;
use crate::tensor::{matmul, rms_group_norm, softmax_rows, swish_scalar, Tensor};
use std::collections::VecDeque;
use std::sync::Arc;

/// Grows-by-one-per-step key/value rows for one attention layer instance.
pub struct KvCache<T> {
    e: usize,
    k: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> KvCache<T> {
    fn new(e: usize) -> Self {
        KvCache {
            e,
            k: Vec::new(),
            v: Vec::new(),
        }
    }

    fn push(&mut self, k_row: &[T], v_row: &[T]) {
        debug_assert_eq!(k_row.len(), self.e);
        self.k.extend_from_slice(k_row);
        self.v.extend_from_slice(v_row);
    }

    pub fn rows(&self) -> usize {
        self.k.len() / self.e
    }

    fn k_row(&self, i: usize) -> &[T] {
        &self.k[i * self.e..(i + 1) * self.e]
    }

    fn v_row(&self, i: usize) -> &[T] {
        &self.v[i * self.e..(i + 1) * self.e]
    }
}

/// Last K-1 inputs of a causal convolution (oldest first, zero-initialized;
/// matches the offline left padding).
struct ConvHist<T> {
    taps: VecDeque<Vec<T>>,
}

impl<T: Real> ConvHist<T> {
    fn new(kernel: usize, dim: usize) -> Self {
        let mut taps = VecDeque::new();
        for _ in 0..kernel.saturating_sub(1) {
            taps.push_back(vec![T::zero(); dim]);
        }
        ConvHist { taps }
    }

    fn push(&mut self, v: Vec<T>) {
        if !self.taps.is_empty() {
            self.taps.pop_front();
            self.taps.push_back(v);
        }
    }
}

/// Tap buffers for one causal FFN instance: pre-conv inputs and gated
/// activations.
struct FfnHist<T> {
    x: ConvHist<T>,
    g: ConvHist<T>,
}

impl<T: Real> FfnHist<T> {
    fn new(cfg: &FfnConfig, dim: usize) -> Self {
        FfnHist {
            x: ConvHist::new(cfg.kernel, dim),
            g: ConvHist::new(cfg.kernel, cfg.hidden),
        }
    }
}

struct OlaState<T> {
    acc: Vec<f64>,
    emitted: Vec<T>,
}

pub struct StepOutput<T> {
    /// Extraction-stage output features for this frame, one [D x F] tensor
    /// per prompt.
    pub features: Vec<Tensor<T>>,
    /// Audio samples finalized by this frame, one chunk per prompt (empty
    /// until the synthesis window fills).
    pub audio: Vec<Vec<T>>,
}

pub struct StreamState<T: Real> {
    config: ModelConfig,
    bundle: Arc<WeightBundle<T>>,
    prompts: Vec<PromptId>,
    /// Refined prompt embeddings [N x D x F], frozen at init.
    prompt_features: Tensor<T>,
    /// per cross-prompt block, per band
    xp_kv: Vec<Vec<KvCache<T>>>,
    xp_ffn1: Vec<Vec<Option<FfnHist<T>>>>,
    xp_ffn2: Vec<Vec<Option<FfnHist<T>>>>,
    /// per prompt, per extraction block, per band
    tse_kv: Vec<Vec<Vec<KvCache<T>>>>,
    tse_ffn1: Vec<Vec<Vec<Option<FfnHist<T>>>>>,
    tse_ffn2: Vec<Vec<Vec<Option<FfnHist<T>>>>>,
    ola: Vec<OlaState<T>>,
    window: Vec<f64>,
    frames_fed: usize,
}

fn norm_row<T: Real>(u: &[T], gamma: &Tensor<T>, groups: usize) -> Result<Vec<T>> {
    let t = Tensor::new(vec![1, u.len()], u.to_vec())?;
    Ok(rms_group_norm(&t, gamma, groups, NORM_EPS)?.into_data())
}

fn linear_row<T: Real>(u: &[T], w: &Tensor<T>, b: &Tensor<T>) -> Result<Vec<T>> {
    let t = Tensor::new(vec![1, u.len()], u.to_vec())?;
    let mut y = matmul(&t, w)?.into_data();
    for (o, bias) in y.iter_mut().zip(b.data()) {
        *o = T::from_f(o.to_f() + bias.to_f());
    }
    Ok(y)
}

/// One causal-conv tap pass: the current input is the newest tap, buffered
/// history fills the older taps. Summation order matches the offline kernel.
fn causal_conv_step<T: Real>(
    hist: &ConvHist<T>,
    current: &[T],
    w: &Tensor<T>,
    bias: &Tensor<T>,
    groups: usize,
) -> Vec<T> {
    let cout = w.shape()[0];
    let cin_g = w.shape()[1];
    let k = w.shape()[2];
    let cout_g = cout / groups;
    let tap = |kk: usize| -> &[T] {
        if kk + 1 == k {
            current
        } else {
            &hist.taps[hist.taps.len() + kk + 1 - k]
        }
    };
    let mut out = vec![T::zero(); cout];
    for co in 0..cout {
        let g = co / cout_g;
        let mut acc = 0.0f64;
        for cg in 0..cin_g {
            let ci = g * cin_g + cg;
            for kk in 0..k {
                acc += w.data()[(co * cin_g + cg) * k + kk].to_f() * tap(kk)[ci].to_f();
            }
        }
        out[co] = T::from_f(acc + bias.data()[co].to_f());
    }
    out
}

fn shuffle_row<T: Real>(x: &[T], groups: usize) -> Vec<T> {
    let c = x.len();
    let per = c / groups;
    let mut out = vec![T::zero(); c];
    for old in 0..c {
        let (g, i) = (old / per, old % per);
        out[i * groups + g] = x[old];
    }
    out
}

/// Advance one causal FFN by one token.
fn ffn_step<T: Real>(
    u: &[T],
    w: &FfnWeights<T>,
    cfg: &FfnConfig,
    hist: &mut FfnHist<T>,
) -> Result<Vec<T>> {
    let dense = match &w.conv {
        ConvStage::Dense(d) => d,
        ConvStage::Dws(_) => {
            return Err(Error::Config(
                "causal streaming does not support depthwise-separable ffns".into(),
            ))
        }
    };
    let normed = norm_row(u, w.norm_gamma, cfg.norm_groups)?;
    let a = causal_conv_step(&hist.x, &normed, dense.a_w, dense.a_b, cfg.conv_groups);
    let b = causal_conv_step(&hist.x, &normed, dense.b_w, dense.b_b, cfg.conv_groups);
    let mut g: Vec<T> = a
        .iter()
        .zip(&b)
        .map(|(&av, &bv)| T::from_f(swish_scalar(av.to_f()) * bv.to_f()))
        .collect();
    if cfg.channel_shuffle {
        g = shuffle_row(&g, cfg.conv_groups);
    }
    let y = causal_conv_step(&hist.g, &g, dense.out_w, dense.out_b, cfg.conv_groups);
    hist.x.push(normed);
    hist.g.push(g);
    Ok(u.iter()
        .zip(&y)
        .map(|(&uv, &yv)| T::from_f(uv.to_f() + yv.to_f()))
        .collect())
}

fn rope_row(e_head: usize, pos: usize, row: &mut [f64]) {
    for p in 0..e_head / 2 {
        let theta = pos as f64 * crate::blocks::ROPE_BASE.powf(-2.0 * p as f64 / e_head as f64);
        let (sin, cos) = theta.sin_cos();
        let x = row[2 * p];
        let y = row[2 * p + 1];
        row[2 * p] = x * cos - y * sin;
        row[2 * p + 1] = x * sin + y * cos;
    }
}

/// Advance one cached-attention layer by one token: project, rotate, append
/// to the cache, attend over everything cached so far.
fn attn_step<T: Real>(
    u: &[T],
    w: &AttnWeights<T>,
    cfg: &AttnConfig,
    rope: bool,
    pos: usize,
    cache: &mut KvCache<T>,
) -> Result<Vec<T>> {
    let d = u.len();
    let base = match w.norm_gamma {
        Some(gamma) => norm_row(u, gamma, cfg.norm_groups)?,
        None => u.to_vec(),
    };
    let q = linear_row(&base, w.wq, w.bq)?;
    let k = linear_row(&base, w.wk, w.bk)?;
    let v = linear_row(&base, w.wv, w.bv)?;

    let e_head = cfg.head_dim();
    let mut q_rot = vec![T::zero(); cfg.dim];
    let mut k_rot = vec![T::zero(); cfg.dim];
    for h in 0..cfg.heads {
        let mut qh: Vec<f64> = q[h * e_head..(h + 1) * e_head].iter().map(|x| x.to_f()).collect();
        let mut kh: Vec<f64> = k[h * e_head..(h + 1) * e_head].iter().map(|x| x.to_f()).collect();
        if rope {
            rope_row(e_head, pos, &mut qh);
            rope_row(e_head, pos, &mut kh);
        }
        for (i, (&qv, &kv)) in qh.iter().zip(&kh).enumerate() {
            q_rot[h * e_head + i] = T::from_f(qv);
            k_rot[h * e_head + i] = T::from_f(kv);
        }
    }
    cache.push(&k_rot, &v);

    let rows = cache.rows();
    let scale = 1.0 / (e_head as f64).sqrt();
    let mut ctx = vec![T::zero(); cfg.dim];
    for h in 0..cfg.heads {
        let mut scores = Tensor::<T>::zeros(vec![1, rows]);
        for j in 0..rows {
            let kj = cache.k_row(j);
            let mut acc = 0.0f64;
            for i in 0..e_head {
                acc += q_rot[h * e_head + i].to_f() * kj[h * e_head + i].to_f();
            }
            // cast the raw dot product first, then scale, matching the
            // offline matmul-then-scale rounding exactly
            let dot = T::from_f(acc);
            scores.set2(0, j, T::from_f(dot.to_f() * scale));
        }
        let lam = softmax_rows(&scores, None)?;
        for c in 0..e_head {
            let mut acc = 0.0f64;
            for j in 0..rows {
                acc += lam.at2(0, j).to_f() * cache.v_row(j)[h * e_head + c].to_f();
            }
            ctx[h * e_head + c] = T::from_f(acc);
        }
    }
    let y = linear_row(&ctx, w.wo, w.bo)?;
    Ok((0..d).map(|c| T::from_f(u[c].to_f() + y[c].to_f())).collect())
}

fn require_causal_ffn(cfg: &FfnConfig, what: &str) -> Result<()> {
    if cfg.is_absent() {
        return Ok(());
    }
    if !cfg.causal {
        return Err(Error::Config(format!(
            "{what} feed-forward is not configured causal; streaming would diverge"
        )));
    }
    if cfg.variant == FfnVariant::PromptAware {
        return Err(Error::Config(format!(
            "{what}: prompt-aware ffn is not supported in the streaming engine"
        )));
    }
    Ok(())
}

fn make_ffn_hist<T: Real>(cfg: &FfnConfig, dim: usize) -> Option<FfnHist<T>> {
    (!cfg.is_absent()).then(|| FfnHist::new(cfg, dim))
}

/// Full attention over the prompt block; equivalent to masked offline
/// attention because prompts see only prompts. Fills the cache.
fn prompt_block_attention<T: Real>(
    seq: &Tensor<T>,
    w: &AttnWeights<T>,
    cfg: &AttnConfig,
    rope: bool,
    positions: &[usize],
    cache: &mut KvCache<T>,
) -> Result<Tensor<T>> {
    let np = seq.shape()[0];
    let d = seq.shape()[1];
    let base = match w.norm_gamma {
        Some(gamma) => rms_group_norm(seq, gamma, cfg.norm_groups, NORM_EPS)?,
        None => seq.clone(),
    };
    let e = cfg.dim;
    let e_head = cfg.head_dim();
    let mut q_all = Tensor::<T>::zeros(vec![np, e]);
    let mut k_all = Tensor::<T>::zeros(vec![np, e]);
    let mut v_all = Tensor::<T>::zeros(vec![np, e]);
    for row in 0..np {
        let q = linear_row(base.row(row), w.wq, w.bq)?;
        let k = linear_row(base.row(row), w.wk, w.bk)?;
        let v = linear_row(base.row(row), w.wv, w.bv)?;
        for h in 0..cfg.heads {
            let mut qh: Vec<f64> =
                q[h * e_head..(h + 1) * e_head].iter().map(|x| x.to_f()).collect();
            let mut kh: Vec<f64> =
                k[h * e_head..(h + 1) * e_head].iter().map(|x| x.to_f()).collect();
            if rope {
                rope_row(e_head, positions[row], &mut qh);
                rope_row(e_head, positions[row], &mut kh);
            }
            for (i, (&qv, &kv)) in qh.iter().zip(&kh).enumerate() {
                q_all.set2(row, h * e_head + i, T::from_f(qv));
                k_all.set2(row, h * e_head + i, T::from_f(kv));
            }
        }
        for (i, &vv) in v.iter().enumerate() {
            v_all.set2(row, i, vv);
        }
    }
    for row in 0..np {
        cache.push(k_all.row(row), v_all.row(row));
    }

    let scale = 1.0 / (e_head as f64).sqrt();
    let mut out = seq.clone();
    for row in 0..np {
        let mut ctx = vec![T::zero(); e];
        for h in 0..cfg.heads {
            let mut scores = Tensor::<T>::zeros(vec![1, np]);
            for j in 0..np {
                let mut acc = 0.0f64;
                for i in 0..e_head {
                    acc += q_all.at2(row, h * e_head + i).to_f()
                        * k_all.at2(j, h * e_head + i).to_f();
                }
                let dot = T::from_f(acc);
                scores.set2(0, j, T::from_f(dot.to_f() * scale));
            }
            let lam = softmax_rows(&scores, None)?;
            for c in 0..e_head {
                let mut acc = 0.0f64;
                for j in 0..np {
                    acc += lam.at2(0, j).to_f() * v_all.at2(j, h * e_head + c).to_f();
                }
                ctx[h * e_head + c] = T::from_f(acc);
            }
        }
        let y = linear_row(&ctx, w.wo, w.bo)?;
        for c in 0..d {
            out.set2(row, c, T::from_f(seq.at2(row, c).to_f() + y[c].to_f()));
        }
    }
    Ok(out)
}

/// Run the prompt block through every layer, fill the caches, freeze the
/// refined prompt embeddings, and return a ready-to-step state.
pub fn stream_init<T: Real>(
    config: &ModelConfig,
    bundle: Arc<WeightBundle<T>>,
    prompts: &[PromptId],
) -> Result<StreamState<T>> {
    config.validate()?;
    validate_prompts(prompts, config.max_prompts)?;
    let probe = build_mask_unchecked(config.mask_variant, prompts.len(), config.sos, 2);
    if !is_stream_realizable(&probe) {
        return Err(Error::Config(format!(
            "mask variant {} is not stream-realizable",
            config.mask_variant.name()
        )));
    }
    require_causal_ffn(&config.cross_prompt.time.ffn1, "cross-prompt temporal")?;
    require_causal_ffn(&config.cross_prompt.time.ffn2, "cross-prompt temporal")?;
    require_causal_ffn(&config.tse.time.ffn1, "extraction temporal")?;
    require_causal_ffn(&config.tse.time.ffn2, "extraction temporal")?;

    let d = config.dim;
    let f_bands = config.frontend.n_bands;
    let n = prompts.len();
    let np = n_prompt_tokens(config, n);
    let (xp_freq_cfg, xp_time_cfg) = config.sub_configs(&config.cross_prompt);

    // prompt-block tokens broadcast over bands: [D x N' x F]
    let embed = bundle.get("prompt_embed")?;
    let mut x = Tensor::<T>::zeros(vec![d, np, f_bands]);
    for (row, &p) in prompts.iter().enumerate() {
        for c in 0..d {
            for f in 0..f_bands {
                x.data_mut()[c * (np * f_bands) + row * f_bands + f] = embed.at2(p.index(), c);
            }
        }
    }
    if config.sos {
        let sos = bundle.get("sos_embed")?;
        for c in 0..d {
            for f in 0..f_bands {
                x.data_mut()[c * (np * f_bands) + (np - 1) * f_bands + f] = sos.data()[c];
            }
        }
    }

    let b_xp = config.cross_prompt.blocks;
    let mut xp_kv: Vec<Vec<KvCache<T>>> = (0..b_xp)
        .map(|_| (0..f_bands).map(|_| KvCache::new(xp_time_cfg.attn.dim)).collect())
        .collect();
    let mut xp_ffn1: Vec<Vec<Option<FfnHist<T>>>> = (0..b_xp)
        .map(|_| (0..f_bands).map(|_| make_ffn_hist(&xp_time_cfg.ffn1, d)).collect())
        .collect();
    let mut xp_ffn2: Vec<Vec<Option<FfnHist<T>>>> = (0..b_xp)
        .map(|_| (0..f_bands).map(|_| make_ffn_hist(&xp_time_cfg.ffn2, d)).collect())
        .collect();

    let freq_positions: Vec<usize> = (0..f_bands).collect();
    for block in 0..b_xp {
        let w = bind_block(&bundle, "xp", block, &config.cross_prompt)?;
        // frequency path across the prompt tokens
        for row in 0..np {
            let mut seq = Tensor::<T>::zeros(vec![f_bands, d]);
            for f in 0..f_bands {
                for c in 0..d {
                    seq.set2(f, c, x.data()[c * (np * f_bands) + row * f_bands + f]);
                }
            }
            let out = crate::blocks::tf_loco_sub_block(
                &seq,
                &w.freq,
                &xp_freq_cfg,
                None,
                &freq_positions,
                0,
            )?;
            for f in 0..f_bands {
                for c in 0..d {
                    x.data_mut()[c * (np * f_bands) + row * f_bands + f] = out.at2(f, c);
                }
            }
        }
        // temporal path: prompts attend bidirectionally among themselves;
        // caches and causal tap buffers are filled here
        for f in 0..f_bands {
            let mut cur = Tensor::<T>::zeros(vec![np, d]);
            for row in 0..np {
                for c in 0..d {
                    cur.set2(row, c, x.data()[c * (np * f_bands) + row * f_bands + f]);
                }
            }
            if let Some(hist) = xp_ffn1[block][f].as_mut() {
                let wf = crate::model::bind_ffn(
                    &bundle,
                    &format!("xp.block{block}.time.ffn1"),
                    &xp_time_cfg.ffn1,
                )?
                .expect("non-absent ffn binds");
                for row in 0..np {
                    let stepped = ffn_step(cur.row(row), &wf, &xp_time_cfg.ffn1, hist)?;
                    cur.row_mut(row).copy_from_slice(&stepped);
                }
            }
            let aw = crate::model::bind_attn(&bundle, &format!("xp.block{block}.time.attn"))?;
            let positions = vec![0usize; np];
            let mut cur = prompt_block_attention(
                &cur,
                &aw,
                &xp_time_cfg.attn,
                config.rope,
                &positions,
                &mut xp_kv[block][f],
            )?;
            if let Some(hist) = xp_ffn2[block][f].as_mut() {
                let wf = crate::model::bind_ffn(
                    &bundle,
                    &format!("xp.block{block}.time.ffn2"),
                    &xp_time_cfg.ffn2,
                )?
                .expect("non-absent ffn binds");
                for row in 0..np {
                    let stepped = ffn_step(cur.row(row), &wf, &xp_time_cfg.ffn2, hist)?;
                    cur.row_mut(row).copy_from_slice(&stepped);
                }
            }
            for row in 0..np {
                for c in 0..d {
                    x.data_mut()[c * (np * f_bands) + row * f_bands + f] = cur.at2(row, c);
                }
            }
        }
    }

    let mut prompt_features = Tensor::<T>::zeros(vec![n, d, f_bands]);
    for row in 0..n {
        for c in 0..d {
            for f in 0..f_bands {
                prompt_features.data_mut()[row * (d * f_bands) + c * f_bands + f] =
                    x.data()[c * (np * f_bands) + row * f_bands + f];
            }
        }
    }

    let b_tse = config.tse.blocks;
    let (_, tse_time_cfg) = config.sub_configs(&config.tse);
    let tse_kv = (0..n)
        .map(|_| {
            (0..b_tse)
                .map(|_| {
                    (0..f_bands)
                        .map(|_| KvCache::new(tse_time_cfg.attn.dim))
                        .collect()
                })
                .collect()
        })
        .collect();
    let tse_ffn1 = (0..n)
        .map(|_| {
            (0..b_tse)
                .map(|_| {
                    (0..f_bands)
                        .map(|_| make_ffn_hist(&tse_time_cfg.ffn1, d))
                        .collect()
                })
                .collect()
        })
        .collect();
    let tse_ffn2 = (0..n)
        .map(|_| {
            (0..b_tse)
                .map(|_| {
                    (0..f_bands)
                        .map(|_| make_ffn_hist(&tse_time_cfg.ffn2, d))
                        .collect()
                })
                .collect()
        })
        .collect();

    let window = hann_window(config.frontend.n_fft);
    Ok(StreamState {
        prompts: prompts.to_vec(),
        prompt_features,
        xp_kv,
        xp_ffn1,
        xp_ffn2,
        tse_kv,
        tse_ffn1,
        tse_ffn2,
        ola: (0..n)
            .map(|_| OlaState {
                acc: Vec::new(),
                emitted: Vec::new(),
            })
            .collect(),
        window,
        frames_fed: 0,
        config: config.clone(),
        bundle,
    })
}

impl<T: Real> StreamState<T> {
    pub fn frames_fed(&self) -> usize {
        self.frames_fed
    }

    pub fn n_prompts(&self) -> usize {
        self.prompts.len()
    }

    /// Refined prompt embeddings [N x D x F], frozen at init.
    pub fn prompt_features(&self) -> &Tensor<T> {
        &self.prompt_features
    }

    /// Cached token count of one cross-prompt attention layer instance.
    pub fn kv_rows(&self, block: usize, band: usize) -> usize {
        self.xp_kv[block][band].rows()
    }

    /// Checksum over the prompt-block keys/values of every cache; stable
    /// across steps because prompt entries are never rewritten.
    pub fn prompt_kv_checksum(&self) -> u64 {
        let np = n_prompt_tokens(&self.config, self.prompts.len());
        let mut bytes = Vec::new();
        for per_block in &self.xp_kv {
            for cache in per_block {
                for row in 0..np.min(cache.rows()) {
                    for v in cache.k_row(row).iter().chain(cache.v_row(row)) {
                        bytes.extend_from_slice(&v.to_f().to_le_bytes());
                    }
                }
            }
        }
        fnv1a64(&bytes)
    }

    /// Feed one spectrogram column (interleaved re/im pairs, one per bin).
    pub fn step(&mut self, frame: &[T]) -> Result<StepOutput<T>> {
        let fe = self.config.frontend.clone();
        let n_bins = fe.n_bins();
        if frame.len() != 2 * n_bins {
            return Err(Error::Shape(format!(
                "frame has {} values, expected {} (2 per bin)",
                frame.len(),
                2 * n_bins
            )));
        }
        let d = self.config.dim;
        let f_bands = fe.n_bands;
        let layout = self.config.band_layout()?;

        // de-interleave into a one-frame spectrogram and band-encode
        let mut values = Tensor::<T>::zeros(vec![2, 1, n_bins]);
        for k in 0..n_bins {
            values.data_mut()[k] = frame[2 * k];
            values.data_mut()[n_bins + k] = frame[2 * k + 1];
        }
        let spec1 = Spectrogram {
            values,
            sample_rate: fe.sample_rate,
            n_fft: fe.n_fft,
            hop: fe.hop,
            orig_len: None,
        };
        let bundle = self.bundle.clone();
        let enc = bind_encoder(&bundle, &layout)?;
        let z = band_encode(&spec1, &layout, &enc)?; // [D x 1 x F]

        let (xp_freq_cfg, xp_time_cfg) = self.config.sub_configs(&self.config.cross_prompt);
        let freq_positions: Vec<usize> = (0..f_bands).collect();
        let pos = 1 + self.frames_fed; // prompts share position 0

        // token per band for this frame
        let mut token = Tensor::<T>::zeros(vec![f_bands, d]);
        for f in 0..f_bands {
            for c in 0..d {
                token.set2(f, c, z.data()[c * f_bands + f]);
            }
        }
        for block in 0..self.config.cross_prompt.blocks {
            let w = bind_block(&bundle, "xp", block, &self.config.cross_prompt)?;
            token = crate::blocks::tf_loco_sub_block(
                &token,
                &w.freq,
                &xp_freq_cfg,
                None,
                &freq_positions,
                0,
            )?;
            for f in 0..f_bands {
                let mut u: Vec<T> = token.row(f).to_vec();
                if let Some(hist) = self.xp_ffn1[block][f].as_mut() {
                    let wf = crate::model::bind_ffn(
                        &bundle,
                        &format!("xp.block{block}.time.ffn1"),
                        &xp_time_cfg.ffn1,
                    )?
                    .expect("non-absent ffn binds");
                    u = ffn_step(&u, &wf, &xp_time_cfg.ffn1, hist)?;
                }
                let aw = crate::model::bind_attn(&bundle, &format!("xp.block{block}.time.attn"))?;
                u = attn_step(
                    &u,
                    &aw,
                    &xp_time_cfg.attn,
                    self.config.rope,
                    pos,
                    &mut self.xp_kv[block][f],
                )?;
                if let Some(hist) = self.xp_ffn2[block][f].as_mut() {
                    let wf = crate::model::bind_ffn(
                        &bundle,
                        &format!("xp.block{block}.time.ffn2"),
                        &xp_time_cfg.ffn2,
                    )?
                    .expect("non-absent ffn binds");
                    u = ffn_step(&u, &wf, &xp_time_cfg.ffn2, hist)?;
                }
                token.row_mut(f).copy_from_slice(&u);
            }
        }

        // conditioning and extraction per prompt
        let (tse_freq_cfg, tse_time_cfg) = self.config.sub_configs(&self.config.tse);
        let dec = bind_decoder(&bundle, &layout)?;
        let mut features = Vec::with_capacity(self.prompts.len());
        let mut audio = Vec::with_capacity(self.prompts.len());
        let tse_pos = self.frames_fed; // extraction positions count from 0
        for n in 0..self.prompts.len() {
            let mut cond = Tensor::<T>::zeros(vec![f_bands, d]);
            for f in 0..f_bands {
                for c in 0..d {
                    let p = self.prompt_features.data()[n * (d * f_bands) + c * f_bands + f];
                    cond.set2(f, c, T::from_f(token.at2(f, c).to_f() * p.to_f()));
                }
            }
            for block in 0..self.config.tse.blocks {
                let w = bind_block(&bundle, "tse", block, &self.config.tse)?;
                cond = crate::blocks::tf_loco_sub_block(
                    &cond,
                    &w.freq,
                    &tse_freq_cfg,
                    None,
                    &freq_positions,
                    0,
                )?;
                for f in 0..f_bands {
                    let mut u: Vec<T> = cond.row(f).to_vec();
                    if let Some(hist) = self.tse_ffn1[n][block][f].as_mut() {
                        let wf = crate::model::bind_ffn(
                            &bundle,
                            &format!("tse.block{block}.time.ffn1"),
                            &tse_time_cfg.ffn1,
                        )?
                        .expect("non-absent ffn binds");
                        u = ffn_step(&u, &wf, &tse_time_cfg.ffn1, hist)?;
                    }
                    let aw =
                        crate::model::bind_attn(&bundle, &format!("tse.block{block}.time.attn"))?;
                    u = attn_step(
                        &u,
                        &aw,
                        &tse_time_cfg.attn,
                        self.config.rope,
                        tse_pos,
                        &mut self.tse_kv[n][block][f],
                    )?;
                    if let Some(hist) = self.tse_ffn2[n][block][f].as_mut() {
                        let wf = crate::model::bind_ffn(
                            &bundle,
                            &format!("tse.block{block}.time.ffn2"),
                            &tse_time_cfg.ffn2,
                        )?
                        .expect("non-absent ffn binds");
                        u = ffn_step(&u, &wf, &tse_time_cfg.ffn2, hist)?;
                    }
                    cond.row_mut(f).copy_from_slice(&u);
                }
            }
            // decode this frame and overlap-add
            let mut feat = Tensor::<T>::zeros(vec![d, 1, f_bands]);
            for f in 0..f_bands {
                for c in 0..d {
                    feat.data_mut()[c * f_bands + f] = cond.at2(f, c);
                }
            }
            let out_spec = band_decode(&feat, &layout, &dec, fe.sample_rate, fe.n_fft, fe.hop)?;
            let emitted = self.overlap_add(n, &out_spec)?;
            features.push(feat);
            audio.push(emitted);
        }

        self.frames_fed += 1;
        Ok(StepOutput { features, audio })
    }

    fn overlap_add(&mut self, prompt: usize, one_frame: &Spectrogram<T>) -> Result<Vec<T>> {
        let (n_fft, hop) = (self.config.frontend.n_fft, self.config.frontend.hop);
        let n_bins = self.config.frontend.n_bins();
        let t = self.frames_fed;
        use rustfft::num_complex::Complex;
        use rustfft::FftPlanner;
        let mut planner = FftPlanner::<f64>::new();
        let ifft = planner.plan_fft_inverse(n_fft);
        let mut buf = vec![Complex::new(0.0f64, 0.0); n_fft];
        for k in 0..n_bins {
            buf[k] = Complex::new(one_frame.re(0, k).to_f(), one_frame.im(0, k).to_f());
        }
        for k in n_bins..n_fft {
            buf[k] = buf[n_fft - k].conj();
        }
        ifft.process(&mut buf);
        let scale = 1.0 / n_fft as f64;

        let ola = &mut self.ola[prompt];
        let need = t * hop + n_fft;
        if ola.acc.len() < need {
            ola.acc.resize(need, 0.0);
        }
        for i in 0..n_fft {
            ola.acc[t * hop + i] += buf[i].re * scale * self.window[i];
        }

        // padded positions < (t+1)*hop are final; output starts at n_fft/2
        let pad = n_fft / 2;
        let final_padded = (t + 1) * hop;
        let already = self.ola[prompt].emitted.len();
        let mut fresh = Vec::new();
        let mut out_idx = already;
        loop {
            let p = pad + out_idx;
            if p >= final_padded {
                break;
            }
            let wsum = self.wsum_at(p);
            let acc = self.ola[prompt].acc[p];
            let v = if wsum > 1e-12 { acc / wsum } else { 0.0 };
            fresh.push(T::from_f(v));
            out_idx += 1;
        }
        self.ola[prompt].emitted.extend_from_slice(&fresh);
        Ok(fresh)
    }

    /// Squared-window sum covering padded position p, over every frame fed
    /// so far; same accumulation order as the offline synthesis.
    fn wsum_at(&self, p: usize) -> f64 {
        let (n_fft, hop) = (self.config.frontend.n_fft, self.config.frontend.hop);
        let last_frame = self.frames_fed; // current frame index during a step
        let first = if p >= n_fft { (p - (n_fft - 1)).div_ceil(hop) } else { 0 };
        let mut s = 0.0;
        let mut k = first;
        while k * hop <= p && k <= last_frame {
            let j = p - k * hop;
            if j < n_fft {
                s += self.window[j] * self.window[j];
            }
            k += 1;
        }
        s
    }

    /// Audio emitted so far for one prompt.
    pub fn emitted(&self, prompt: usize) -> &[T] {
        &self.ola[prompt].emitted
    }

    /// Drain the tail after the last frame and return complete signals of
    /// `out_len` samples per prompt.
    pub fn finish(mut self, out_len: usize) -> Result<Vec<Vec<T>>> {
        if self.frames_fed == 0 {
            return Err(Error::Config("no frames fed".into()));
        }
        self.frames_fed -= 1; // wsum_at treats this as the last frame index
        let pad = self.config.frontend.n_fft / 2;
        let mut outs = Vec::with_capacity(self.prompts.len());
        for n in 0..self.prompts.len() {
            let mut full: Vec<T> = self.ola[n].emitted.clone();
            let mut idx = full.len();
            while idx < out_len {
                let p = pad + idx;
                let v = if p < self.ola[n].acc.len() {
                    let wsum = self.wsum_at(p);
                    if wsum > 1e-12 {
                        self.ola[n].acc[p] / wsum
                    } else {
                        0.0
                    }
                } else {
                    0.0
                };
                full.push(T::from_f(v));
                idx += 1;
            }
            full.truncate(out_len);
            outs.push(full);
        }
        Ok(outs)
    }
}

/// Offline forward pass under the causal mask; the reference the streaming
/// engine is checked against. Exactly [`separate`] plus a mask guard.
pub fn offline_causal_forward<T: Real>(
    x: &[T],
    prompts: &[PromptId],
    bundle: &WeightBundle<T>,
    config: &ModelConfig,
) -> Result<Vec<Vec<T>>> {
    if config.mask_variant != crate::masks::MaskVariant::Causal {
        return Err(Error::Config(
            "offline causal forward requires the causal mask variant".into(),
        ));
    }
    separate(x, prompts, bundle, config)
}

/// Offline features after conditioning and extraction, per prompt; the
/// feature-level oracle for streaming equivalence.
pub fn offline_causal_features<T: Real>(
    x: &[T],
    prompts: &[PromptId],
    bundle: &WeightBundle<T>,
    config: &ModelConfig,
) -> Result<Vec<Tensor<T>>> {
    use crate::model::conditional_tse_forward;
    let spec = stft_helper(x, config)?;
    let layout = config.band_layout()?;
    let enc = bind_encoder(bundle, &layout)?;
    let z = band_encode(&spec, &layout, &enc)?;
    let (p_refined, z_refined) = cross_prompt_forward(&z, prompts, bundle, config)?;
    let d = config.dim;
    let f_bands = layout.n_bands();
    let mut outs = Vec::new();
    for n in 0..prompts.len() {
        let mut p_n = Tensor::<T>::zeros(vec![d, f_bands]);
        for c in 0..d {
            for f in 0..f_bands {
                p_n.set2(c, f, p_refined.data()[n * (d * f_bands) + c * f_bands + f]);
            }
        }
        let conditioned = condition(&z_refined, &p_n)?;
        outs.push(conditional_tse_forward(&conditioned, bundle, config)?);
    }
    Ok(outs)
}

pub fn stft_helper<T: Real>(x: &[T], config: &ModelConfig) -> Result<Spectrogram<T>> {
    let fe = &config.frontend;
    let window = hann_window(fe.n_fft);
    crate::dsp::stft(x, fe.n_fft, fe.hop, &window, fe.sample_rate)
}
