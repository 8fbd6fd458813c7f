//! TF dual-path building blocks: gated convolutional feed-forward
//! (Conv-SwiGLU), multi-head self-attention with rotary positions, the
//! FFN -> MHSA -> FFN sub-block, and the frequency-then-temporal block.
//!
//! All residual connections live inside the ops, so a zero-weight network is
//! the identity map end to end.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{
    conv1d, conv_transpose1d, matmul, rms_group_norm, softmax_rows, swish, Tensor,
};
use serde::{Deserialize, Serialize};

pub const NORM_EPS: f64 = 1e-5;
pub const ROPE_BASE: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FfnVariant {
    Standard,
    Pointwise,
    PromptAware,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnConfig {
    pub variant: FfnVariant,
    /// Inner channel count C.
    pub hidden: usize,
    pub kernel: usize,
    pub stride: usize,
    pub conv_groups: usize,
    pub channel_shuffle: bool,
    pub depthwise_separable: bool,
    pub norm_groups: usize,
    pub causal: bool,
}

impl FfnConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.variant == FfnVariant::Absent {
            return Ok(());
        }
        if self.variant == FfnVariant::Pointwise && (self.kernel != 1 || self.stride != 1) {
            return Err(Error::Config(
                "pointwise ffn requires kernel 1 and stride 1".into(),
            ));
        }
        if self.kernel < self.stride {
            return Err(Error::Config(format!(
                "stride {} exceeds kernel {}: length restoration impossible",
                self.stride, self.kernel
            )));
        }
        if self.causal && self.stride != 1 {
            return Err(Error::Config("causal ffn requires stride 1".into()));
        }
        if self.causal && self.depthwise_separable {
            return Err(Error::Config(
                "causal depthwise-separable ffn is not supported".into(),
            ));
        }
        if self.depthwise_separable && self.conv_groups != dim {
            return Err(Error::Config(
                "depthwise-separable ffn requires conv_groups == input channels".into(),
            ));
        }
        if !self.depthwise_separable
            && (dim % self.conv_groups != 0 || self.hidden % self.conv_groups != 0)
        {
            return Err(Error::Config(format!(
                "channels ({dim}, {}) not divisible by conv groups {}",
                self.hidden, self.conv_groups
            )));
        }
        if dim % self.norm_groups != 0 {
            return Err(Error::Config(format!(
                "dim {dim} not divisible by norm groups {}",
                self.norm_groups
            )));
        }
        Ok(())
    }

    pub fn is_absent(&self) -> bool {
        self.variant == FfnVariant::Absent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttnConfig {
    /// Total attention dimension E (split across heads).
    pub dim: usize,
    pub heads: usize,
    pub norm_groups: usize,
}

impl AttnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "attention dim {} not divisible by heads {}",
                self.dim, self.heads
            )));
        }
        if (self.dim / self.heads) % 2 != 0 {
            return Err(Error::Config(
                "rotary positions need an even per-head dimension".into(),
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubBlockConfig {
    pub dim: usize,
    pub ffn1: FfnConfig,
    pub ffn2: FfnConfig,
    pub attn: AttnConfig,
    pub rope: bool,
}

impl SubBlockConfig {
    pub fn validate(&self) -> Result<()> {
        self.ffn1.validate(self.dim)?;
        self.ffn2.validate(self.dim)?;
        self.attn.validate()
    }
}

// ---------------------------------------------------------------------------
// Weight views
// ---------------------------------------------------------------------------

/// Dense conv stack: two input convs (value + gate) and one output conv.
/// The output weight is a transposed-conv kernel [C x D/G x K] in the
/// bidirectional case and a causal conv kernel [D x C/G x K] in causal mode.
pub struct DenseConvWeights<'a, T> {
    pub a_w: &'a Tensor<T>,
    pub a_b: &'a Tensor<T>,
    pub b_w: &'a Tensor<T>,
    pub b_b: &'a Tensor<T>,
    pub out_w: &'a Tensor<T>,
    pub out_b: &'a Tensor<T>,
}

/// Depthwise-separable conv stack: depthwise K-tap + pointwise on the way in,
/// pointwise + transposed depthwise on the way out.
pub struct DwsConvWeights<'a, T> {
    pub a_dw: &'a Tensor<T>,
    pub a_pw: &'a Tensor<T>,
    pub a_pb: &'a Tensor<T>,
    pub b_dw: &'a Tensor<T>,
    pub b_pw: &'a Tensor<T>,
    pub b_pb: &'a Tensor<T>,
    pub out_pw: &'a Tensor<T>,
    pub out_dw: &'a Tensor<T>,
    pub out_b: &'a Tensor<T>,
}

pub enum ConvStage<'a, T> {
    Dense(DenseConvWeights<'a, T>),
    Dws(DwsConvWeights<'a, T>),
}

/// Position-wise SwiGLU linears applied to prompt rows in the prompt-aware
/// variant.
pub struct PromptLinears<'a, T> {
    pub a_w: &'a Tensor<T>,
    pub a_b: &'a Tensor<T>,
    pub b_w: &'a Tensor<T>,
    pub b_b: &'a Tensor<T>,
    pub out_w: &'a Tensor<T>,
    pub out_b: &'a Tensor<T>,
}

pub struct FfnWeights<'a, T> {
    pub norm_gamma: &'a Tensor<T>,
    pub conv: ConvStage<'a, T>,
    pub prompt: Option<PromptLinears<'a, T>>,
}

pub struct AttnWeights<'a, T> {
    /// Pre-attention norm; None applies attention to the raw input.
    pub norm_gamma: Option<&'a Tensor<T>>,
    pub wq: &'a Tensor<T>,
    pub bq: &'a Tensor<T>,
    pub wk: &'a Tensor<T>,
    pub bk: &'a Tensor<T>,
    pub wv: &'a Tensor<T>,
    pub bv: &'a Tensor<T>,
    pub wo: &'a Tensor<T>,
    pub bo: &'a Tensor<T>,
}

pub struct SubBlockWeights<'a, T> {
    pub ffn1: Option<FfnWeights<'a, T>>,
    pub attn: AttnWeights<'a, T>,
    pub ffn2: Option<FfnWeights<'a, T>>,
}

// ---------------------------------------------------------------------------
// Feed-forward
// ---------------------------------------------------------------------------

fn add_row_bias<T: Real>(x: &mut Tensor<T>, bias: &Tensor<T>) {
    let (m, n) = (x.shape()[0], x.shape()[1]);
    for i in 0..m {
        for j in 0..n {
            let v = x.at2(i, j).to_f() + bias.data()[j].to_f();
            x.set2(i, j, T::from_f(v));
        }
    }
}

/// Permute channels between groups: view rows as (G, C/G), transpose to
/// (C/G, G). A pure permutation of rows.
fn channel_shuffle<T: Real>(x: &Tensor<T>, groups: usize) -> Result<Tensor<T>> {
    let (c, l) = (x.shape()[0], x.shape()[1]);
    if c % groups != 0 {
        return Err(Error::Config("shuffle channels not divisible by groups".into()));
    }
    let per = c / groups;
    let mut out = Tensor::zeros(vec![c, l]);
    for old in 0..c {
        let (g, i) = (old / per, old % per);
        let new = i * groups + g;
        out.data_mut()[new * l..(new + 1) * l].copy_from_slice(&x.data()[old * l..(old + 1) * l]);
    }
    Ok(out)
}

fn right_pad_cols<T: Real>(x: &Tensor<T>, new_len: usize) -> Tensor<T> {
    let (c, l) = (x.shape()[0], x.shape()[1]);
    if new_len == l {
        return x.clone();
    }
    let mut out = Tensor::zeros(vec![c, new_len]);
    for ch in 0..c {
        out.data_mut()[ch * new_len..ch * new_len + l].copy_from_slice(&x.row(ch));
    }
    out
}

fn take_cols<T: Real>(x: &Tensor<T>, start: usize, len: usize) -> Tensor<T> {
    let (c, l) = (x.shape()[0], x.shape()[1]);
    debug_assert!(start + len <= l);
    let mut out = Tensor::zeros(vec![c, len]);
    for ch in 0..c {
        out.data_mut()[ch * len..(ch + 1) * len]
            .copy_from_slice(&x.data()[ch * l + start..ch * l + start + len]);
    }
    out
}

fn conv_stage_in<T: Real>(
    x: &Tensor<T>,
    stage: &ConvStage<T>,
    gate: bool,
    cfg: &FfnConfig,
    pad: (usize, usize),
) -> Result<Tensor<T>> {
    match stage {
        ConvStage::Dense(w) => {
            let (wt, bias) = if gate { (w.b_w, w.b_b) } else { (w.a_w, w.a_b) };
            conv1d(x, wt, bias, cfg.stride, pad, cfg.conv_groups)
        }
        ConvStage::Dws(w) => {
            let (dw, pw, pb) = if gate {
                (w.b_dw, w.b_pw, w.b_pb)
            } else {
                (w.a_dw, w.a_pw, w.a_pb)
            };
            let d = x.shape()[0];
            let no_bias = Tensor::zeros(vec![d]);
            let h = conv1d(x, dw, &no_bias, cfg.stride, pad, d)?;
            conv1d(&h, pw, pb, 1, (0, 0), 1)
        }
    }
}

fn conv_stage_out<T: Real>(g: &Tensor<T>, stage: &ConvStage<T>, cfg: &FfnConfig) -> Result<Tensor<T>> {
    match stage {
        ConvStage::Dense(w) => {
            conv_transpose1d(g, w.out_w, w.out_b, cfg.stride, (0, 0), cfg.conv_groups)
        }
        ConvStage::Dws(w) => {
            let c = g.shape()[0];
            let d = w.out_pw.shape()[0];
            let no_bias = Tensor::zeros(vec![d]);
            let h = conv1d(g, w.out_pw, &no_bias, 1, (0, 0), 1)?;
            let _ = c;
            conv_transpose1d(&h, w.out_dw, w.out_b, cfg.stride, (0, 0), d)
        }
    }
}

/// Gated convolutional feed-forward with residual:
/// y = seq + Out( Swish(ConvA(Norm(seq))) * ConvB(Norm(seq)) ).
///
/// Bidirectional mode right-pads the sequence to a stride multiple, convolves
/// with (left, right) = ((K-1)/2, K-1-(K-1)/2) padding, and trims the
/// transposed-conv output back to the input length. Causal mode left-pads
/// by K-1 and replaces the transposed conv with a causal conv.
pub fn conv_swiglu_ffn<T: Real>(
    seq: &Tensor<T>,
    w: &FfnWeights<T>,
    cfg: &FfnConfig,
) -> Result<Tensor<T>> {
    let l = seq.shape()[0];
    let d = seq.shape()[1];
    cfg.validate(d)?;
    let normed = rms_group_norm(seq, w.norm_gamma, cfg.norm_groups, NORM_EPS)?;
    let xt = normed.transpose2(); // [D x L]

    let gated = if cfg.causal {
        let pad = (cfg.kernel - 1, 0);
        let a = conv_stage_in(&xt, &w.conv, false, cfg, pad)?;
        let b = conv_stage_in(&xt, &w.conv, true, cfg, pad)?;
        let mut g = swish(&a);
        for (gv, bv) in g.data_mut().iter_mut().zip(b.data()) {
            *gv = T::from_f(gv.to_f() * bv.to_f());
        }
        let g = if cfg.channel_shuffle {
            channel_shuffle(&g, cfg.conv_groups)?
        } else {
            g
        };
        // causal output conv C -> D, left padding K-1
        match &w.conv {
            ConvStage::Dense(dw) => conv1d(&g, dw.out_w, dw.out_b, 1, pad, cfg.conv_groups)?,
            ConvStage::Dws(_) => unreachable!("validated against causal dws"),
        }
    } else {
        let m_len = l.div_ceil(cfg.stride) * cfg.stride;
        let xp = right_pad_cols(&xt, m_len);
        let pad_l = (cfg.kernel - 1) / 2;
        let pad = (pad_l, cfg.kernel - 1 - pad_l);
        let a = conv_stage_in(&xp, &w.conv, false, cfg, pad)?;
        let b = conv_stage_in(&xp, &w.conv, true, cfg, pad)?;
        let mut g = swish(&a);
        for (gv, bv) in g.data_mut().iter_mut().zip(b.data()) {
            *gv = T::from_f(gv.to_f() * bv.to_f());
        }
        let g = if cfg.channel_shuffle {
            channel_shuffle(&g, cfg.conv_groups)?
        } else {
            g
        };
        let raw = conv_stage_out(&g, &w.conv, cfg)?;
        let raw_len = raw.shape()[1];
        if raw_len < l {
            return Err(Error::Config(format!(
                "cannot restore length {l} from deconv output {raw_len}"
            )));
        }
        let left = pad_l.min(raw_len - l);
        take_cols(&raw, left, l)
    };

    let yt = gated.transpose2(); // [L x D]
    let mut out = seq.clone();
    for (o, y) in out.data_mut().iter_mut().zip(yt.data()) {
        *o = T::from_f(o.to_f() + y.to_f());
    }
    Ok(out)
}

/// Prompt-aware feed-forward: the first `n_prompt` rows go through a
/// position-wise SwiGLU built from linear layers; the remaining rows go
/// through [`conv_swiglu_ffn`]. With `n_prompt` = 0 this is exactly the
/// convolutional path.
pub fn prompt_aware_ffn<T: Real>(
    seq: &Tensor<T>,
    n_prompt: usize,
    w: &FfnWeights<T>,
    cfg: &FfnConfig,
) -> Result<Tensor<T>> {
    let l = seq.shape()[0];
    let d = seq.shape()[1];
    if n_prompt >= l {
        return Err(Error::Config(format!(
            "{n_prompt} prompt rows leave no mixture rows in a length-{l} sequence"
        )));
    }
    let lins = w.prompt.as_ref().ok_or_else(|| {
        Error::Config("prompt-aware ffn is missing its prompt linear weights".into())
    })?;

    let mut out = Tensor::zeros(vec![l, d]);

    if n_prompt > 0 {
        let mut prows = Tensor::zeros(vec![n_prompt, d]);
        for i in 0..n_prompt {
            prows.row_mut(i).copy_from_slice(seq.row(i));
        }
        let normed = rms_group_norm(&prows, w.norm_gamma, cfg.norm_groups, NORM_EPS)?;
        let mut a = matmul(&normed, lins.a_w)?;
        add_row_bias(&mut a, lins.a_b);
        let mut b = matmul(&normed, lins.b_w)?;
        add_row_bias(&mut b, lins.b_b);
        let mut g = swish(&a);
        for (gv, bv) in g.data_mut().iter_mut().zip(b.data()) {
            *gv = T::from_f(gv.to_f() * bv.to_f());
        }
        let mut y = matmul(&g, lins.out_w)?;
        add_row_bias(&mut y, lins.out_b);
        for i in 0..n_prompt {
            for c in 0..d {
                out.set2(i, c, T::from_f(prows.at2(i, c).to_f() + y.at2(i, c).to_f()));
            }
        }
    }

    let t = l - n_prompt;
    if t > 0 {
        let mut frows = Tensor::zeros(vec![t, d]);
        for i in 0..t {
            frows.row_mut(i).copy_from_slice(seq.row(n_prompt + i));
        }
        let fout = conv_swiglu_ffn(&frows, w, cfg)?;
        for i in 0..t {
            out.row_mut(n_prompt + i).copy_from_slice(fout.row(i));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

/// Rotary rotation of an [L x E_head] projection: pair i turns by
/// angle pos * base^(-2i / E_head).
pub fn rope_rotate<T: Real>(qk: &Tensor<T>, positions: &[usize]) -> Result<Tensor<T>> {
    let (l, e) = (qk.shape()[0], qk.shape()[1]);
    if e % 2 != 0 {
        return Err(Error::Config("rotary head dimension must be even".into()));
    }
    if positions.len() != l {
        return Err(Error::Shape("positions length != sequence length".into()));
    }
    let mut out = Tensor::zeros(vec![l, e]);
    for i in 0..l {
        let pos = positions[i] as f64;
        for p in 0..e / 2 {
            let theta = pos * ROPE_BASE.powf(-2.0 * p as f64 / e as f64);
            let (sin, cos) = theta.sin_cos();
            let x = qk.at2(i, 2 * p).to_f();
            let y = qk.at2(i, 2 * p + 1).to_f();
            out.set2(i, 2 * p, T::from_f(x * cos - y * sin));
            out.set2(i, 2 * p + 1, T::from_f(x * sin + y * cos));
        }
    }
    Ok(out)
}

fn slice_cols<T: Real>(x: &Tensor<T>, start: usize, len: usize) -> Tensor<T> {
    let (m, n) = (x.shape()[0], x.shape()[1]);
    let mut out = Tensor::zeros(vec![m, len]);
    for i in 0..m {
        out.row_mut(i).copy_from_slice(&x.data()[i * n + start..i * n + start + len]);
    }
    out
}

/// Multi-head self-attention with residual:
/// y = seq + W_O concat_h(softmax(Q_h K_h^T / sqrt(E/H) + mask) V_h),
/// with Q/K/V projected from the (optionally normed) input and rotary
/// rotation applied to Q and K when positions are given.
pub fn mhsa<T: Real>(
    seq: &Tensor<T>,
    w: &AttnWeights<T>,
    cfg: &AttnConfig,
    mask: Option<&[bool]>,
    rope_positions: Option<&[usize]>,
) -> Result<Tensor<T>> {
    let l = seq.shape()[0];
    cfg.validate()?;
    if let Some(m) = mask {
        if m.len() != l * l {
            return Err(Error::Shape(format!(
                "mask has {} entries, expected {}x{}",
                m.len(),
                l,
                l
            )));
        }
    }
    let base = match w.norm_gamma {
        Some(gamma) => rms_group_norm(seq, gamma, cfg.norm_groups, NORM_EPS)?,
        None => seq.clone(),
    };
    let mut q = matmul(&base, w.wq)?;
    add_row_bias(&mut q, w.bq);
    let mut k = matmul(&base, w.wk)?;
    add_row_bias(&mut k, w.bk);
    let mut v = matmul(&base, w.wv)?;
    add_row_bias(&mut v, w.bv);

    let additive = mask.map(|bits| {
        let mut t = Tensor::<T>::zeros(vec![l, l]);
        for i in 0..l {
            for j in 0..l {
                if !bits[i * l + j] {
                    t.set2(i, j, T::from_f(f64::NEG_INFINITY));
                }
            }
        }
        t
    });

    let e_head = cfg.head_dim();
    let scale = 1.0 / (e_head as f64).sqrt();
    let mut ctx = Tensor::<T>::zeros(vec![l, cfg.dim]);
    for h in 0..cfg.heads {
        let mut qh = slice_cols(&q, h * e_head, e_head);
        let mut kh = slice_cols(&k, h * e_head, e_head);
        let vh = slice_cols(&v, h * e_head, e_head);
        if let Some(pos) = rope_positions {
            qh = rope_rotate(&qh, pos)?;
            kh = rope_rotate(&kh, pos)?;
        }
        let mut scores = matmul(&qh, &kh.transpose2())?;
        for s in scores.data_mut() {
            *s = T::from_f(s.to_f() * scale);
        }
        let lam = softmax_rows(&scores, additive.as_ref())?;
        let ctx_h = matmul(&lam, &vh)?;
        for i in 0..l {
            for j in 0..e_head {
                ctx.set2(i, h * e_head + j, ctx_h.at2(i, j));
            }
        }
    }
    let mut out = matmul(&ctx, w.wo)?;
    add_row_bias(&mut out, w.bo);
    for (o, s) in out.data_mut().iter_mut().zip(seq.data()) {
        *o = T::from_f(o.to_f() + s.to_f());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sub-block and block
// ---------------------------------------------------------------------------

fn apply_ffn<T: Real>(
    seq: &Tensor<T>,
    w: Option<&FfnWeights<T>>,
    cfg: &FfnConfig,
    n_prompt: usize,
) -> Result<Tensor<T>> {
    match cfg.variant {
        FfnVariant::Absent => Ok(seq.clone()),
        FfnVariant::PromptAware => {
            let w = w.ok_or_else(|| Error::Config("missing ffn weights".into()))?;
            prompt_aware_ffn(seq, n_prompt, w, cfg)
        }
        _ => {
            let w = w.ok_or_else(|| Error::Config("missing ffn weights".into()))?;
            conv_swiglu_ffn(seq, w, cfg)
        }
    }
}

/// FFN1 (unless absent) -> norm + MHSA -> FFN2 (unless absent), all residual.
pub fn tf_loco_sub_block<T: Real>(
    seq: &Tensor<T>,
    w: &SubBlockWeights<T>,
    cfg: &SubBlockConfig,
    mask: Option<&[bool]>,
    positions: &[usize],
    n_prompt: usize,
) -> Result<Tensor<T>> {
    let s1 = apply_ffn(seq, w.ffn1.as_ref(), &cfg.ffn1, n_prompt)?;
    let rope_pos = cfg.rope.then_some(positions);
    let s2 = mhsa(&s1, &w.attn, &cfg.attn, mask, rope_pos)?;
    apply_ffn(&s2, w.ffn2.as_ref(), &cfg.ffn2, n_prompt)
}

/// Weights for one frequency-then-temporal block.
pub struct BlockWeights<'a, T> {
    pub freq: SubBlockWeights<'a, T>,
    pub time: SubBlockWeights<'a, T>,
}

/// One dual-path block over a [D x T' x F] grid: every frame position runs
/// the length-F sequence through the frequency sub-block (no mask), then
/// every band runs the length-T' sequence through the temporal sub-block
/// (mask and positional convention supplied by the caller).
#[allow(clippy::too_many_arguments)]
pub fn tf_loco_block<T: Real>(
    x: &Tensor<T>,
    w: &BlockWeights<T>,
    freq_cfg: &SubBlockConfig,
    time_cfg: &SubBlockConfig,
    time_mask: Option<&[bool]>,
    time_positions: &[usize],
    n_prompt: usize,
) -> Result<Tensor<T>> {
    let d = x.shape()[0];
    let t_len = x.shape()[1];
    let f_len = x.shape()[2];
    let mut cur = x.clone();

    let freq_positions: Vec<usize> = (0..f_len).collect();
    for t in 0..t_len {
        let mut seq = Tensor::<T>::zeros(vec![f_len, d]);
        for f in 0..f_len {
            for c in 0..d {
                seq.set2(f, c, cur.data()[c * (t_len * f_len) + t * f_len + f]);
            }
        }
        let out = tf_loco_sub_block(&seq, &w.freq, freq_cfg, None, &freq_positions, 0)?;
        for f in 0..f_len {
            for c in 0..d {
                cur.data_mut()[c * (t_len * f_len) + t * f_len + f] = out.at2(f, c);
            }
        }
    }

    for f in 0..f_len {
        let mut seq = Tensor::<T>::zeros(vec![t_len, d]);
        for t in 0..t_len {
            for c in 0..d {
                seq.set2(t, c, cur.data()[c * (t_len * f_len) + t * f_len + f]);
            }
        }
        let out = tf_loco_sub_block(&seq, &w.time, time_cfg, time_mask, time_positions, n_prompt)?;
        for t in 0..t_len {
            for c in 0..d {
                cur.data_mut()[c * (t_len * f_len) + t * f_len + f] = out.at2(t, c);
            }
        }
    }
    Ok(cur)
}

/// Lower-triangular (with diagonal) self-attention mask over `n` tokens.
pub fn tril_mask(n: usize) -> Vec<bool> {
    let mut bits = vec![false; n * n];
    for i in 0..n {
        for j in 0..=i {
            bits[i * n + j] = true;
        }
    }
    bits
}
