//! Continuous separation of long inputs: sliding-window chunking, per-chunk
//! separation, and triangular overlap-add recombination.

use crate::error::{Error, Result};
use crate::model::{separate, ModelConfig, PromptId, WeightBundle};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkPlan {
    pub chunk_len: usize,
    pub hop: usize,
    /// [start, end) spans covering the signal; the last span is clamped.
    pub windows: Vec<(usize, usize)>,
    pub crossfade_len: usize,
}

/// Plan the sliding windows: hop = chunk * (1 - overlap), last chunk clamped
/// to the signal end.
pub fn chunk_plan(
    total_len: usize,
    chunk_s: f64,
    overlap_frac: f64,
    sample_rate: u32,
) -> Result<ChunkPlan> {
    if !(0.0..1.0).contains(&overlap_frac) {
        return Err(Error::Config("overlap must be in [0, 1)".into()));
    }
    if chunk_s <= 0.0 {
        return Err(Error::Config("chunk length must be positive".into()));
    }
    if total_len == 0 {
        return Err(Error::Config("empty signal".into()));
    }
    let chunk_len = (chunk_s * sample_rate as f64).round() as usize;
    if chunk_len == 0 {
        return Err(Error::Config("chunk shorter than one sample".into()));
    }
    let hop = ((chunk_len as f64) * (1.0 - overlap_frac)).round().max(1.0) as usize;
    let mut windows = Vec::new();
    if total_len <= chunk_len {
        windows.push((0, total_len));
    } else {
        let mut start = 0;
        loop {
            let end = (start + chunk_len).min(total_len);
            windows.push((start, end));
            if end == total_len {
                break;
            }
            start += hop;
        }
    }
    Ok(ChunkPlan {
        chunk_len,
        hop,
        windows,
        crossfade_len: chunk_len.saturating_sub(hop),
    })
}

/// Anything that maps a waveform plus prompts to per-prompt waveforms.
pub trait Separator<T> {
    fn separate(&self, x: &[T], prompts: &[PromptId]) -> Result<Vec<Vec<T>>>;
}

pub struct ModelSeparator<'a, T: Real> {
    pub bundle: &'a WeightBundle<T>,
    pub config: &'a ModelConfig,
}

impl<T: Real> Separator<T> for ModelSeparator<'_, T> {
    fn separate(&self, x: &[T], prompts: &[PromptId]) -> Result<Vec<Vec<T>>> {
        separate(x, prompts, self.bundle, self.config)
    }
}

/// Pass-through stand-in used to verify the stitching machinery: every
/// prompt's output is the input itself.
pub struct BypassSeparator;

impl<T: Real> Separator<T> for BypassSeparator {
    fn separate(&self, x: &[T], prompts: &[PromptId]) -> Result<Vec<Vec<T>>> {
        Ok(vec![x.to_vec(); prompts.len()])
    }
}

/// Separate long audio chunk by chunk and blend the overlaps with triangular
/// weights normalized to an exact partition of unity.
pub fn css_separate<T: Real>(
    sep: &dyn Separator<T>,
    x: &[T],
    prompts: &[PromptId],
    chunk_s: f64,
    overlap_frac: f64,
    sample_rate: u32,
) -> Result<Vec<Vec<T>>> {
    let plan = chunk_plan(x.len(), chunk_s, overlap_frac, sample_rate)?;
    if plan.windows.len() == 1 {
        // single chunk covers everything; identical to plain separation
        return sep.separate(x, prompts);
    }
    let n = prompts.len();
    let l = x.len();
    // raw triangular weight totals per sample
    let mut den = vec![0.0f64; l];
    for &(start, end) in &plan.windows {
        let span = end - start;
        for i in 0..span {
            den[start + i] += (i + 1).min(span - i) as f64;
        }
    }
    // normalized blend: every covering chunk takes raw/total except the last,
    // which takes the complement so the weights sum to exactly one; a sample
    // covered by a single chunk is copied verbatim
    let mut acc = vec![vec![0.0f64; l]; n];
    let mut partial = vec![0.0f64; l];
    let n_chunks = plan.windows.len();
    for (c, &(start, end)) in plan.windows.iter().enumerate() {
        let piece = &x[start..end];
        let outs = sep.separate(piece, prompts)?;
        let span = end - start;
        for i in 0..span {
            let idx = start + i;
            let last_cover = c + 1 == n_chunks || plan.windows[c + 1].0 > idx;
            let w = if last_cover {
                1.0 - partial[idx]
            } else {
                (i + 1).min(span - i) as f64 / den[idx]
            };
            partial[idx] += w;
            for (out, o) in outs.iter().zip(acc.iter_mut()) {
                o[idx] += w * out[i].to_f();
            }
        }
    }
    let result = acc
        .into_iter()
        .map(|row| row.into_iter().map(T::from_f).collect())
        .collect();
    Ok(result)
}

/// Normalized blending weights at every sample; the last covering chunk gets
/// the complement so the weights sum to exactly one.
pub fn crossfade_weights(plan: &ChunkPlan, total_len: usize) -> Vec<Vec<(usize, f64)>> {
    let mut per_sample: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total_len];
    for (c, &(start, end)) in plan.windows.iter().enumerate() {
        let span = end - start;
        for i in 0..span {
            let w = (i + 1).min(span - i) as f64;
            per_sample[start + i].push((c, w));
        }
    }
    for entries in per_sample.iter_mut() {
        let total: f64 = entries.iter().map(|(_, w)| *w).sum();
        let k = entries.len();
        let mut partial = 0.0f64;
        for (idx, (_, w)) in entries.iter_mut().enumerate() {
            if idx + 1 == k {
                *w = 1.0 - partial;
            } else {
                *w /= total;
                partial += *w;
            }
        }
    }
    per_sample
}
