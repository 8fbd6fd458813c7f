//! Attention-mask construction for prompt-conditioned sequences.
//!
//! A mask covers a sequence of N' prompt tokens (prompts plus the optional
//! separator token, which is grouped with the prompt block) followed by T
//! mixture frames. Entry (i, j) = true means token j influences the update
//! of token i. The four sub-blocks are
//!   A: prompt rows  x prompt cols     B: prompt rows  x frame cols
//!   C: frame rows   x prompt cols     D: frame rows   x frame cols

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskVariant {
    Full,
    BlindPrompt,
    IndPrompt,
    IndAll,
    Causal,
}

impl MaskVariant {
    pub const ALL: [MaskVariant; 5] = [
        MaskVariant::Full,
        MaskVariant::BlindPrompt,
        MaskVariant::IndPrompt,
        MaskVariant::IndAll,
        MaskVariant::Causal,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FULL" => Ok(MaskVariant::Full),
            "BLINDPROMPT" => Ok(MaskVariant::BlindPrompt),
            "INDPROMPT" => Ok(MaskVariant::IndPrompt),
            "INDALL" => Ok(MaskVariant::IndAll),
            "CAUSAL" => Ok(MaskVariant::Causal),
            other => Err(Error::Config(format!("unknown mask variant '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MaskVariant::Full => "FULL",
            MaskVariant::BlindPrompt => "BLINDPROMPT",
            MaskVariant::IndPrompt => "INDPROMPT",
            MaskVariant::IndAll => "INDALL",
            MaskVariant::Causal => "CAUSAL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    pub n_prompt: usize,
    pub n_frames: usize,
    bits: Vec<bool>,
}

impl AttentionMask {
    pub fn size(&self) -> usize {
        self.n_prompt + self.n_frames
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.size() + j]
    }

    /// Rows as 0/1 strings, e.g. "11000".
    pub fn render_rows(&self) -> Vec<String> {
        let n = self.size();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if self.get(i, j) { '1' } else { '0' })
                    .collect()
            })
            .collect()
    }
}

fn expected_bit(variant: MaskVariant, n_prompt: usize, i: usize, j: usize) -> bool {
    let pi = i < n_prompt;
    let pj = j < n_prompt;
    match (pi, pj) {
        // A block
        (true, true) => match variant {
            MaskVariant::BlindPrompt => i == j,
            _ => true,
        },
        // B block
        (true, false) => matches!(variant, MaskVariant::Full),
        // C block
        (false, true) => !matches!(variant, MaskVariant::IndAll),
        // D block
        (false, false) => match variant {
            MaskVariant::Causal => i >= j,
            _ => true,
        },
    }
}

/// Build the mask for `n_prompts` prompts (plus a separator token when
/// `has_sos`) followed by `n_frames` mixture frames.
pub fn build_mask(
    variant: MaskVariant,
    n_prompts: usize,
    has_sos: bool,
    n_frames: usize,
) -> Result<AttentionMask> {
    if n_prompts == 0 {
        return Err(Error::Config(
            "prompting model needs at least one prompt token".into(),
        ));
    }
    if n_frames == 0 {
        return Err(Error::Config("mask needs at least one frame".into()));
    }
    Ok(build_mask_unchecked(variant, n_prompts, has_sos, n_frames))
}

/// Mask construction without the public N/T >= 1 guards; streaming setup uses
/// this for the frames-not-yet-fed state.
pub(crate) fn build_mask_unchecked(
    variant: MaskVariant,
    n_prompts: usize,
    has_sos: bool,
    n_frames: usize,
) -> AttentionMask {
    let n_prompt = n_prompts + usize::from(has_sos);
    let n = n_prompt + n_frames;
    let mut bits = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            bits[i * n + j] = expected_bit(variant, n_prompt, i, j);
        }
    }
    AttentionMask {
        n_prompt,
        n_frames,
        bits,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaskReport {
    Valid,
    /// First entry violating the claimed variant's block equations.
    Violation { i: usize, j: usize, expected: bool },
}

/// Check a mask against the block equations of the claimed variant.
///
/// Blocks are scanned in the order A, C, D, B, each row-major, so a causality
/// violation inside D is reported before the prompt-visibility block B.
pub fn validate_mask(mask: &AttentionMask, variant: MaskVariant) -> MaskReport {
    let np = mask.n_prompt;
    let n = mask.size();
    let block_ranges: [(std::ops::Range<usize>, std::ops::Range<usize>); 4] = [
        (0..np, 0..np), // A
        (np..n, 0..np), // C
        (np..n, np..n), // D
        (0..np, np..n), // B
    ];
    for (rows, cols) in block_ranges {
        for i in rows {
            for j in cols.clone() {
                let expected = expected_bit(variant, np, i, j);
                if mask.get(i, j) != expected {
                    return MaskReport::Violation { i, j, expected };
                }
            }
        }
    }
    MaskReport::Valid
}

/// True iff the mask admits exact prompt-then-frame incremental evaluation:
/// prompts never read frames (B = 0) and frames read only past frames
/// (D lower-triangular with diagonal).
pub fn is_stream_realizable(mask: &AttentionMask) -> bool {
    let np = mask.n_prompt;
    let n = mask.size();
    for i in 0..np {
        for j in np..n {
            if mask.get(i, j) {
                return false;
            }
        }
    }
    for i in np..n {
        for j in (i + 1)..n {
            if mask.get(i, j) {
                return false;
            }
        }
    }
    true
}
