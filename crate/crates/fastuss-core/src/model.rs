//! Model assembly: prompt vocabulary, configuration presets, weight
//! initialization, the cross-prompt stage, conditioning, the conditional
//! extraction stage, and end-to-end separation.

use crate::blocks::{
    tf_loco_block, tril_mask, AttnConfig, AttnWeights, BlockWeights, ConvStage, DenseConvWeights,
    DwsConvWeights, FfnConfig, FfnVariant, FfnWeights, PromptLinears, SubBlockConfig,
    SubBlockWeights,
};
use crate::dsp::{
    band_decode, band_encode, hann_window, istft_with_len, make_band_layout, stft,
    BandDecoderBand, BandDecoderWeights, BandEncoderWeights, BandLayout,
};
use crate::error::{Error, Result};
use crate::masks::{build_mask_unchecked, AttentionMask, MaskVariant};
use crate::real::Real;
use crate::rng::{fnv1a64, Xoshiro256};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const PROMPT_VOCAB_SIZE: usize = 8;

/// The eight stem prompts. Only Speech and SFX may repeat in one prompt set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptId {
    Speech,
    Sfx,
    SfxMix,
    Bass,
    Drums,
    Vocals,
    OtherInst,
    MusicMix,
}

impl PromptId {
    pub const ALL: [PromptId; 8] = [
        PromptId::Speech,
        PromptId::Sfx,
        PromptId::SfxMix,
        PromptId::Bass,
        PromptId::Drums,
        PromptId::Vocals,
        PromptId::OtherInst,
        PromptId::MusicMix,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&p| p == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            PromptId::Speech => "Speech",
            PromptId::Sfx => "SFX",
            PromptId::SfxMix => "SFX-mix",
            PromptId::Bass => "Bass",
            PromptId::Drums => "Drums",
            PromptId::Vocals => "Vocals",
            PromptId::OtherInst => "Other-inst",
            PromptId::MusicMix => "Music-mix",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '_', '.'], "-");
        let norm = norm.trim_end_matches('-');
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.name().to_ascii_lowercase() == norm)
            .ok_or_else(|| Error::Vocab(format!("unknown prompt '{s}'")))
    }

    pub fn can_repeat(self) -> bool {
        matches!(self, PromptId::Speech | PromptId::Sfx)
    }
}

pub fn validate_prompts(prompts: &[PromptId], max_prompts: usize) -> Result<()> {
    if prompts.is_empty() {
        return Err(Error::Vocab("at least one prompt is required".into()));
    }
    if prompts.len() > max_prompts {
        return Err(Error::Vocab(format!(
            "{} prompts exceed the maximum of {max_prompts}",
            prompts.len()
        )));
    }
    let mut counts = [0usize; PROMPT_VOCAB_SIZE];
    for &p in prompts {
        counts[p.index()] += 1;
        if counts[p.index()] > 1 && !p.can_repeat() {
            return Err(Error::Vocab(format!("prompt '{}' may not repeat", p.name())));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_bands: usize,
}

impl FrontendConfig {
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn frames_per_second(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub ffn1: FfnConfig,
    pub ffn2: FfnConfig,
    pub attn: AttnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub blocks: usize,
    pub freq: PathConfig,
    pub time: PathConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub frontend: FrontendConfig,
    /// Embedding dimension D.
    pub dim: usize,
    pub cross_prompt: StageConfig,
    pub tse: StageConfig,
    /// Mask variant of the cross-prompt temporal path.
    pub mask_variant: MaskVariant,
    pub rope: bool,
    pub sos: bool,
    pub max_prompts: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for stage in [&self.cross_prompt, &self.tse] {
            for path in [&stage.freq, &stage.time] {
                path.ffn1.validate(self.dim)?;
                path.ffn2.validate(self.dim)?;
                path.attn.validate()?;
            }
        }
        if self.frontend.hop == 0 || self.frontend.hop > self.frontend.n_fft {
            return Err(Error::Config("frontend hop must be in 1..=n_fft".into()));
        }
        if self.frontend.n_bands > self.frontend.n_bins() {
            return Err(Error::Config("more bands than spectrogram bins".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        fnv1a64(json.as_bytes())
    }

    pub fn band_layout(&self) -> Result<BandLayout> {
        make_band_layout(self.frontend.n_bins(), self.frontend.n_bands)
    }

    pub fn sub_configs(&self, stage: &StageConfig) -> (SubBlockConfig, SubBlockConfig) {
        let mk = |path: &PathConfig| SubBlockConfig {
            dim: self.dim,
            ffn1: path.ffn1.clone(),
            ffn2: path.ffn2.clone(),
            attn: path.attn,
            rope: self.rope,
        };
        (mk(&stage.freq), mk(&stage.time))
    }
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

fn ffn_k4(hidden: usize, stride: usize, norm_groups: usize) -> FfnConfig {
    FfnConfig {
        variant: FfnVariant::Standard,
        hidden,
        kernel: 4,
        stride,
        conv_groups: 1,
        channel_shuffle: false,
        depthwise_separable: false,
        norm_groups,
        causal: false,
    }
}

fn ffn_pointwise(hidden: usize, norm_groups: usize) -> FfnConfig {
    FfnConfig {
        variant: FfnVariant::Pointwise,
        hidden,
        kernel: 1,
        stride: 1,
        conv_groups: 1,
        channel_shuffle: false,
        depthwise_separable: false,
        norm_groups,
        causal: false,
    }
}

fn absent_ffn(norm_groups: usize) -> FfnConfig {
    FfnConfig {
        variant: FfnVariant::Absent,
        hidden: 0,
        kernel: 1,
        stride: 1,
        conv_groups: 1,
        channel_shuffle: false,
        depthwise_separable: false,
        norm_groups,
        causal: false,
    }
}

#[derive(Debug, Clone, Copy)]
struct PresetOpts {
    stride: usize,
    ffn1: bool,
    /// grouped convolutions with channel shuffle on the strided K=4 paths
    grouped_k4: bool,
    /// grouped convolutions with channel shuffle on the cross-prompt
    /// temporal pointwise convs (the scope that fits the ID4 reference MAC)
    grouped_pointwise: bool,
    depthwise_separable: bool,
    prompt_aware_time: bool,
    mask: MaskVariant,
    causal_convs: bool,
}

impl Default for PresetOpts {
    fn default() -> Self {
        PresetOpts {
            stride: 1,
            ffn1: true,
            grouped_k4: false,
            grouped_pointwise: false,
            depthwise_separable: false,
            prompt_aware_time: false,
            mask: MaskVariant::Full,
            causal_convs: false,
        }
    }
}

const NORM_GROUPS: usize = 8;

fn full_scale(name: &str, o: PresetOpts) -> ModelConfig {
    let d = 64;
    let k4 = |hidden: usize| -> FfnConfig {
        let mut f = ffn_k4(hidden, o.stride, NORM_GROUPS);
        if o.grouped_k4 {
            f.conv_groups = 8;
            f.channel_shuffle = true;
        }
        if o.depthwise_separable {
            f.depthwise_separable = true;
            f.conv_groups = d;
        }
        if o.causal_convs {
            f.causal = true;
        }
        f
    };
    let xp_freq = PathConfig {
        ffn1: if o.ffn1 { k4(384) } else { absent_ffn(NORM_GROUPS) },
        ffn2: k4(384),
        attn: AttnConfig {
            dim: 256,
            heads: 4,
            norm_groups: NORM_GROUPS,
        },
    };
    // frequency-path FFNs stay bidirectional even in the causal presets;
    // the frequency axis carries no temporal dependence
    let xp_freq = if o.causal_convs {
        let mut p = xp_freq;
        p.ffn1.causal = false;
        p.ffn2.causal = false;
        p
    } else {
        xp_freq
    };
    let mut pw = ffn_pointwise(384, NORM_GROUPS);
    if o.grouped_pointwise {
        pw.conv_groups = 8;
        pw.channel_shuffle = true;
    }
    if o.causal_convs {
        pw.causal = true;
    }
    let mut xp_time_ffn2 = pw.clone();
    if o.prompt_aware_time {
        xp_time_ffn2.variant = FfnVariant::PromptAware;
    }
    let xp_time = PathConfig {
        ffn1: if o.ffn1 { pw.clone() } else { absent_ffn(NORM_GROUPS) },
        ffn2: xp_time_ffn2,
        attn: AttnConfig {
            dim: 256,
            heads: 4,
            norm_groups: NORM_GROUPS,
        },
    };
    let tse_attn = AttnConfig {
        dim: 96,
        heads: 4,
        norm_groups: NORM_GROUPS,
    };
    let tse_freq = PathConfig {
        ffn1: if o.ffn1 {
            let mut f = k4(256);
            f.causal = false;
            f
        } else {
            absent_ffn(NORM_GROUPS)
        },
        ffn2: {
            let mut f = k4(256);
            f.causal = false;
            f
        },
        attn: tse_attn,
    };
    let tse_time = PathConfig {
        ffn1: if o.ffn1 { k4(256) } else { absent_ffn(NORM_GROUPS) },
        ffn2: k4(256),
        attn: tse_attn,
    };
    ModelConfig {
        name: name.to_string(),
        frontend: FrontendConfig {
            sample_rate: 48_000,
            n_fft: 2250,
            hop: 750,
            n_bands: 61,
        },
        dim: d,
        cross_prompt: StageConfig {
            blocks: 4,
            freq: xp_freq,
            time: xp_time,
        },
        tse: StageConfig {
            blocks: 2,
            freq: tse_freq,
            time: tse_time,
        },
        mask_variant: o.mask,
        rope: true,
        sos: true,
        max_prompts: 6,
    }
}

fn toy(name: &str, causal: bool) -> ModelConfig {
    let ng = 2;
    let k4 = |c| {
        let mut f = ffn_k4(c, 1, ng);
        f.causal = false;
        f
    };
    let k4_causal = |c| {
        let mut f = ffn_k4(c, 1, ng);
        f.causal = causal;
        f
    };
    let mut pw = ffn_pointwise(16, ng);
    if causal {
        pw.causal = true;
    }
    let attn = AttnConfig {
        dim: 8,
        heads: 2,
        norm_groups: ng,
    };
    ModelConfig {
        name: name.to_string(),
        frontend: FrontendConfig {
            sample_rate: 8000,
            n_fft: 256,
            hop: 64,
            n_bands: 4,
        },
        dim: 8,
        cross_prompt: StageConfig {
            blocks: 1,
            freq: PathConfig {
                ffn1: k4(16),
                ffn2: k4(16),
                attn,
            },
            time: PathConfig {
                ffn1: pw.clone(),
                ffn2: pw,
                attn,
            },
        },
        tse: StageConfig {
            blocks: 1,
            freq: PathConfig {
                ffn1: k4(16),
                ffn2: k4(16),
                attn,
            },
            time: PathConfig {
                ffn1: k4_causal(16),
                ffn2: k4_causal(16),
                attn,
            },
        },
        mask_variant: if causal { MaskVariant::Causal } else { MaskVariant::Full },
        rope: true,
        sos: true,
        max_prompts: 6,
    }
}

pub const PRESET_NAMES: [&str; 18] = [
    "ID1", "ID2", "ID3", "ID4", "ID5", "ID6", "ID7", "ID7P", "ID8", "ID9", "BLINDPROMPT",
    "INDPROMPT", "INDALL", "CAUSAL", "FASTUSS-11.7G", "FASTUSS-8.3G", "TOY", "TOY-CAUSAL",
];

/// Resolve a preset name to a full configuration.
pub fn preset(id: &str) -> Result<ModelConfig> {
    let key = id.trim().to_ascii_uppercase().replace('\u{b6}', "P");
    let cfg = match key.as_str() {
        "ID1" => full_scale("ID1", PresetOpts::default()),
        "ID2" => full_scale(
            "ID2",
            PresetOpts {
                stride: 2,
                ..Default::default()
            },
        ),
        "ID3" => full_scale(
            "ID3",
            PresetOpts {
                stride: 4,
                ..Default::default()
            },
        ),
        "ID4" => full_scale(
            "ID4",
            PresetOpts {
                grouped_pointwise: true,
                ..Default::default()
            },
        ),
        "ID5" => full_scale(
            "ID5",
            PresetOpts {
                ffn1: false,
                ..Default::default()
            },
        ),
        "ID6" => full_scale(
            "ID6",
            PresetOpts {
                stride: 2,
                ffn1: false,
                ..Default::default()
            },
        ),
        "ID7" => full_scale(
            "ID7",
            PresetOpts {
                stride: 4,
                ffn1: false,
                ..Default::default()
            },
        ),
        "ID7P" => full_scale(
            "ID7P",
            PresetOpts {
                stride: 4,
                ffn1: false,
                prompt_aware_time: true,
                ..Default::default()
            },
        ),
        "ID8" | "FASTUSS-8.3G" => full_scale(
            "ID8",
            PresetOpts {
                stride: 4,
                ffn1: false,
                grouped_k4: true,
                ..Default::default()
            },
        ),
        "ID9" => full_scale(
            "ID9",
            PresetOpts {
                stride: 4,
                ffn1: false,
                depthwise_separable: true,
                ..Default::default()
            },
        ),
        "FASTUSS-11.7G" => full_scale(
            "ID7",
            PresetOpts {
                stride: 4,
                ffn1: false,
                ..Default::default()
            },
        ),
        "BLINDPROMPT" => full_scale(
            "BLINDPROMPT",
            PresetOpts {
                mask: MaskVariant::BlindPrompt,
                ..Default::default()
            },
        ),
        "INDPROMPT" => full_scale(
            "INDPROMPT",
            PresetOpts {
                mask: MaskVariant::IndPrompt,
                ..Default::default()
            },
        ),
        "INDALL" => full_scale(
            "INDALL",
            PresetOpts {
                mask: MaskVariant::IndAll,
                ..Default::default()
            },
        ),
        "CAUSAL" => full_scale(
            "CAUSAL",
            PresetOpts {
                mask: MaskVariant::Causal,
                causal_convs: true,
                ..Default::default()
            },
        ),
        "TOY" => toy("TOY", false),
        "TOY-CAUSAL" => toy("TOY-CAUSAL", true),
        other => return Err(Error::Config(format!("unknown preset '{other}'"))),
    };
    cfg.validate()?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Weight bundle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
    Uniform { fan_in: usize },
    Ones,
    Zeros,
}

#[derive(Debug, Clone)]
pub struct WeightSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

fn ffn_specs(out: &mut Vec<WeightSpec>, prefix: &str, dim: usize, cfg: &FfnConfig) {
    if cfg.is_absent() {
        return;
    }
    let push = |out: &mut Vec<WeightSpec>, name: String, shape: Vec<usize>, init: Init| {
        out.push(WeightSpec { name, shape, init })
    };
    let (c, k, g) = (cfg.hidden, cfg.kernel, cfg.conv_groups);
    push(out, format!("{prefix}.norm_gamma"), vec![dim], Init::Ones);
    if cfg.depthwise_separable {
        for side in ["conv_a", "conv_b"] {
            push(
                out,
                format!("{prefix}.{side}.dw"),
                vec![dim, 1, k],
                Init::Uniform { fan_in: k },
            );
            push(
                out,
                format!("{prefix}.{side}.pw.weight"),
                vec![c, dim, 1],
                Init::Uniform { fan_in: dim },
            );
            push(out, format!("{prefix}.{side}.pw.bias"), vec![c], Init::Zeros);
        }
        push(
            out,
            format!("{prefix}.out.pw.weight"),
            vec![dim, c, 1],
            Init::Uniform { fan_in: c },
        );
        push(
            out,
            format!("{prefix}.out.dw"),
            vec![dim, 1, k],
            Init::Uniform { fan_in: k },
        );
        push(out, format!("{prefix}.out.bias"), vec![dim], Init::Zeros);
    } else {
        for side in ["conv_a", "conv_b"] {
            push(
                out,
                format!("{prefix}.{side}.weight"),
                vec![c, dim / g, k],
                Init::Uniform {
                    fan_in: (dim / g) * k,
                },
            );
            push(out, format!("{prefix}.{side}.bias"), vec![c], Init::Zeros);
        }
        let out_shape = if cfg.causal {
            vec![dim, c / g, k]
        } else {
            vec![c, dim / g, k]
        };
        push(
            out,
            format!("{prefix}.out.weight"),
            out_shape,
            Init::Uniform {
                fan_in: (c / g) * k,
            },
        );
        push(out, format!("{prefix}.out.bias"), vec![dim], Init::Zeros);
    }
    if cfg.variant == FfnVariant::PromptAware {
        for side in ["plin_a", "plin_b"] {
            push(
                out,
                format!("{prefix}.{side}.weight"),
                vec![dim, c],
                Init::Uniform { fan_in: dim },
            );
            push(out, format!("{prefix}.{side}.bias"), vec![c], Init::Zeros);
        }
        push(
            out,
            format!("{prefix}.plin_out.weight"),
            vec![c, dim],
            Init::Uniform { fan_in: c },
        );
        push(out, format!("{prefix}.plin_out.bias"), vec![dim], Init::Zeros);
    }
}

fn attn_specs(out: &mut Vec<WeightSpec>, prefix: &str, dim: usize, cfg: &AttnConfig) {
    let e = cfg.dim;
    out.push(WeightSpec {
        name: format!("{prefix}.norm_gamma"),
        shape: vec![dim],
        init: Init::Ones,
    });
    for side in ["wq", "wk", "wv"] {
        out.push(WeightSpec {
            name: format!("{prefix}.{side}.weight"),
            shape: vec![dim, e],
            init: Init::Uniform { fan_in: dim },
        });
        out.push(WeightSpec {
            name: format!("{prefix}.{side}.bias"),
            shape: vec![e],
            init: Init::Zeros,
        });
    }
    out.push(WeightSpec {
        name: format!("{prefix}.wo.weight"),
        shape: vec![e, dim],
        init: Init::Uniform { fan_in: e },
    });
    out.push(WeightSpec {
        name: format!("{prefix}.wo.bias"),
        shape: vec![dim],
        init: Init::Zeros,
    });
}

/// Every tensor of the model, in canonical order, with shapes and init rules
/// fully determined by the configuration.
pub fn weight_specs(config: &ModelConfig) -> Result<Vec<WeightSpec>> {
    config.validate()?;
    let layout = config.band_layout()?;
    let d = config.dim;
    let mut out = Vec::new();
    out.push(WeightSpec {
        name: "prompt_embed".into(),
        shape: vec![PROMPT_VOCAB_SIZE, d],
        init: Init::Uniform { fan_in: d },
    });
    if config.sos {
        out.push(WeightSpec {
            name: "sos_embed".into(),
            shape: vec![d],
            init: Init::Uniform { fan_in: d },
        });
    }
    for (b, &(s, e)) in layout.bands.iter().enumerate() {
        let w2 = 2 * (e - s);
        out.push(WeightSpec {
            name: format!("encoder.band{b}.norm_gamma"),
            shape: vec![w2],
            init: Init::Ones,
        });
        out.push(WeightSpec {
            name: format!("encoder.band{b}.weight"),
            shape: vec![w2, d],
            init: Init::Uniform { fan_in: w2 },
        });
        out.push(WeightSpec {
            name: format!("encoder.band{b}.bias"),
            shape: vec![d],
            init: Init::Zeros,
        });
    }
    for (stage_name, stage) in [("xp", &config.cross_prompt), ("tse", &config.tse)] {
        for i in 0..stage.blocks {
            for (path_name, path) in [("freq", &stage.freq), ("time", &stage.time)] {
                let prefix = format!("{stage_name}.block{i}.{path_name}");
                ffn_specs(&mut out, &format!("{prefix}.ffn1"), d, &path.ffn1);
                attn_specs(&mut out, &format!("{prefix}.attn"), d, &path.attn);
                ffn_specs(&mut out, &format!("{prefix}.ffn2"), d, &path.ffn2);
            }
        }
    }
    let h = 4 * d;
    for (b, &(s, e)) in layout.bands.iter().enumerate() {
        let w2 = 2 * (e - s);
        out.push(WeightSpec {
            name: format!("decoder.band{b}.norm_gamma"),
            shape: vec![d],
            init: Init::Ones,
        });
        out.push(WeightSpec {
            name: format!("decoder.band{b}.hidden.weight"),
            shape: vec![d, h],
            init: Init::Uniform { fan_in: d },
        });
        out.push(WeightSpec {
            name: format!("decoder.band{b}.hidden.bias"),
            shape: vec![h],
            init: Init::Zeros,
        });
        for side in ["value", "gate"] {
            out.push(WeightSpec {
                name: format!("decoder.band{b}.{side}.weight"),
                shape: vec![h, w2],
                init: Init::Uniform { fan_in: h },
            });
            out.push(WeightSpec {
                name: format!("decoder.band{b}.{side}.bias"),
                shape: vec![w2],
                init: Init::Zeros,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct WeightBundle<T> {
    pub config_hash: u64,
    pub seed: u64,
    entries: Vec<(String, Tensor<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Real> WeightBundle<T> {
    pub fn from_entries(
        config_hash: u64,
        seed: u64,
        entries: Vec<(String, Tensor<T>)>,
    ) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, (name, _)) in entries.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate tensor name '{name}'")));
            }
        }
        Ok(WeightBundle {
            config_hash,
            seed,
            entries,
            index,
        })
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].1)
            .ok_or_else(|| Error::Config(format!("missing weight tensor '{name}'")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing weight tensor '{name}'")))?;
        Ok(&mut self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_params(&self) -> u64 {
        self.entries.iter().map(|(_, t)| t.len() as u64).sum()
    }

    /// Zero every tensor whose name contains the pattern; test hook for the
    /// residual-identity checks.
    pub fn zero_matching(&mut self, pattern: &str) {
        for (name, t) in self.entries.iter_mut() {
            if name.contains(pattern) {
                for v in t.data_mut() {
                    *v = T::zero();
                }
            }
        }
    }
}

/// Deterministically initialize a weight bundle: each tensor gets its own
/// PRNG stream keyed by (seed, tensor name) and is filled with
/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); gammas start at one, biases at
/// zero.
pub fn init_weights<T: Real>(config: &ModelConfig, seed: u64) -> Result<WeightBundle<T>> {
    let specs = weight_specs(config)?;
    let mut entries = Vec::with_capacity(specs.len());
    for spec in specs {
        let n: usize = spec.shape.iter().product();
        let tensor = match spec.init {
            Init::Ones => Tensor::filled(spec.shape, T::one()),
            Init::Zeros => Tensor::zeros(spec.shape),
            Init::Uniform { fan_in } => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut rng = Xoshiro256::for_name(seed, &spec.name);
                let data: Vec<T> = (0..n).map(|_| T::from_f(rng.uniform(bound))).collect();
                Tensor::new(spec.shape, data)?
            }
        };
        entries.push((spec.name, tensor));
    }
    WeightBundle::from_entries(config.hash(), seed, entries)
}

// ---------------------------------------------------------------------------
// Weight binding
// ---------------------------------------------------------------------------

pub(crate) fn bind_ffn<'a, T: Real>(
    bundle: &'a WeightBundle<T>,
    prefix: &str,
    cfg: &FfnConfig,
) -> Result<Option<FfnWeights<'a, T>>> {
    if cfg.is_absent() {
        return Ok(None);
    }
    let conv = if cfg.depthwise_separable {
        ConvStage::Dws(DwsConvWeights {
            a_dw: bundle.get(&format!("{prefix}.conv_a.dw"))?,
            a_pw: bundle.get(&format!("{prefix}.conv_a.pw.weight"))?,
            a_pb: bundle.get(&format!("{prefix}.conv_a.pw.bias"))?,
            b_dw: bundle.get(&format!("{prefix}.conv_b.dw"))?,
            b_pw: bundle.get(&format!("{prefix}.conv_b.pw.weight"))?,
            b_pb: bundle.get(&format!("{prefix}.conv_b.pw.bias"))?,
            out_pw: bundle.get(&format!("{prefix}.out.pw.weight"))?,
            out_dw: bundle.get(&format!("{prefix}.out.dw"))?,
            out_b: bundle.get(&format!("{prefix}.out.bias"))?,
        })
    } else {
        ConvStage::Dense(DenseConvWeights {
            a_w: bundle.get(&format!("{prefix}.conv_a.weight"))?,
            a_b: bundle.get(&format!("{prefix}.conv_a.bias"))?,
            b_w: bundle.get(&format!("{prefix}.conv_b.weight"))?,
            b_b: bundle.get(&format!("{prefix}.conv_b.bias"))?,
            out_w: bundle.get(&format!("{prefix}.out.weight"))?,
            out_b: bundle.get(&format!("{prefix}.out.bias"))?,
        })
    };
    let prompt = if cfg.variant == FfnVariant::PromptAware {
        Some(PromptLinears {
            a_w: bundle.get(&format!("{prefix}.plin_a.weight"))?,
            a_b: bundle.get(&format!("{prefix}.plin_a.bias"))?,
            b_w: bundle.get(&format!("{prefix}.plin_b.weight"))?,
            b_b: bundle.get(&format!("{prefix}.plin_b.bias"))?,
            out_w: bundle.get(&format!("{prefix}.plin_out.weight"))?,
            out_b: bundle.get(&format!("{prefix}.plin_out.bias"))?,
        })
    } else {
        None
    };
    Ok(Some(FfnWeights {
        norm_gamma: bundle.get(&format!("{prefix}.norm_gamma"))?,
        conv,
        prompt,
    }))
}

pub(crate) fn bind_attn<'a, T: Real>(
    bundle: &'a WeightBundle<T>,
    prefix: &str,
) -> Result<AttnWeights<'a, T>> {
    Ok(AttnWeights {
        norm_gamma: Some(bundle.get(&format!("{prefix}.norm_gamma"))?),
        wq: bundle.get(&format!("{prefix}.wq.weight"))?,
        bq: bundle.get(&format!("{prefix}.wq.bias"))?,
        wk: bundle.get(&format!("{prefix}.wk.weight"))?,
        bk: bundle.get(&format!("{prefix}.wk.bias"))?,
        wv: bundle.get(&format!("{prefix}.wv.weight"))?,
        bv: bundle.get(&format!("{prefix}.wv.bias"))?,
        wo: bundle.get(&format!("{prefix}.wo.weight"))?,
        bo: bundle.get(&format!("{prefix}.wo.bias"))?,
    })
}

pub(crate) fn bind_sub_block<'a, T: Real>(
    bundle: &'a WeightBundle<T>,
    prefix: &str,
    path: &PathConfig,
) -> Result<SubBlockWeights<'a, T>> {
    Ok(SubBlockWeights {
        ffn1: bind_ffn(bundle, &format!("{prefix}.ffn1"), &path.ffn1)?,
        attn: bind_attn(bundle, &format!("{prefix}.attn"))?,
        ffn2: bind_ffn(bundle, &format!("{prefix}.ffn2"), &path.ffn2)?,
    })
}

pub(crate) fn bind_block<'a, T: Real>(
    bundle: &'a WeightBundle<T>,
    stage_name: &str,
    block: usize,
    stage: &StageConfig,
) -> Result<BlockWeights<'a, T>> {
    Ok(BlockWeights {
        freq: bind_sub_block(bundle, &format!("{stage_name}.block{block}.freq"), &stage.freq)?,
        time: bind_sub_block(bundle, &format!("{stage_name}.block{block}.time"), &stage.time)?,
    })
}

pub(crate) fn bind_encoder<'a, T: Real>(
    bundle: &'a WeightBundle<T>,
    layout: &BandLayout,
) -> Result<BandEncoderWeights<'a, T>> {
    let mut bands = Vec::with_capacity(layout.n_bands());
    for b in 0..layout.n_bands() {
        bands.push((
            bundle.get(&format!("encoder.band{b}.norm_gamma"))?,
            bundle.get(&format!("encoder.band{b}.weight"))?,
            bundle.get(&format!("encoder.band{b}.bias"))?,
        ));
    }
    Ok(BandEncoderWeights { bands })
}

pub(crate) fn bind_decoder<'a, T: Real>(
    bundle: &'a WeightBundle<T>,
    layout: &BandLayout,
) -> Result<BandDecoderWeights<'a, T>> {
    let mut bands = Vec::with_capacity(layout.n_bands());
    for b in 0..layout.n_bands() {
        bands.push(BandDecoderBand {
            norm_gamma: bundle.get(&format!("decoder.band{b}.norm_gamma"))?,
            hidden_w: bundle.get(&format!("decoder.band{b}.hidden.weight"))?,
            hidden_b: bundle.get(&format!("decoder.band{b}.hidden.bias"))?,
            value_w: bundle.get(&format!("decoder.band{b}.value.weight"))?,
            value_b: bundle.get(&format!("decoder.band{b}.value.bias"))?,
            gate_w: bundle.get(&format!("decoder.band{b}.gate.weight"))?,
            gate_b: bundle.get(&format!("decoder.band{b}.gate.bias"))?,
        });
    }
    Ok(BandDecoderWeights { bands })
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

/// Number of prompt-block tokens including the separator.
pub fn n_prompt_tokens(config: &ModelConfig, n_prompts: usize) -> usize {
    n_prompts + usize::from(config.sos)
}

/// Temporal positions for the cross-prompt path: every prompt-block token
/// shares position 0 (order robustness), frames count 1..=T.
pub fn xp_time_positions(n_prompt: usize, n_frames: usize) -> Vec<usize> {
    let mut pos = vec![0usize; n_prompt];
    pos.extend(1..=n_frames);
    pos
}

pub(crate) fn mask_bits(mask: &AttentionMask) -> Vec<bool> {
    let n = mask.size();
    let mut bits = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            bits[i * n + j] = mask.get(i, j);
        }
    }
    bits
}

/// Prepend prompt (and separator) embeddings to the encoded mixture on the
/// frame axis, run the cross-prompt blocks under the configured mask, and
/// split the result back into refined prompt embeddings and mixture frames.
pub fn cross_prompt_forward<T: Real>(
    z: &Tensor<T>,
    prompts: &[PromptId],
    bundle: &WeightBundle<T>,
    config: &ModelConfig,
) -> Result<(Tensor<T>, Tensor<T>)> {
    validate_prompts(prompts, config.max_prompts)?;
    let d = config.dim;
    let t_frames = z.shape()[1];
    let f_bands = z.shape()[2];
    if z.shape()[0] != d {
        return Err(Error::Shape("feature dim does not match config".into()));
    }
    let n = prompts.len();
    let np = n_prompt_tokens(config, n);
    let total = np + t_frames;

    let embed = bundle.get("prompt_embed")?;
    let mut x = Tensor::<T>::zeros(vec![d, total, f_bands]);
    for (row, &p) in prompts.iter().enumerate() {
        for c in 0..d {
            let v = embed.at2(p.index(), c);
            for f in 0..f_bands {
                x.data_mut()[c * (total * f_bands) + row * f_bands + f] = v;
            }
        }
    }
    if config.sos {
        let sos = bundle.get("sos_embed")?;
        for c in 0..d {
            for f in 0..f_bands {
                x.data_mut()[c * (total * f_bands) + (np - 1) * f_bands + f] = sos.data()[c];
            }
        }
    }
    for c in 0..d {
        for t in 0..t_frames {
            for f in 0..f_bands {
                x.data_mut()[c * (total * f_bands) + (np + t) * f_bands + f] =
                    z.data()[c * (t_frames * f_bands) + t * f_bands + f];
            }
        }
    }

    let mask = build_mask_unchecked(config.mask_variant, n, config.sos, t_frames);
    let bits = mask_bits(&mask);
    let positions = xp_time_positions(np, t_frames);
    let (freq_cfg, time_cfg) = config.sub_configs(&config.cross_prompt);

    for i in 0..config.cross_prompt.blocks {
        let w = bind_block(bundle, "xp", i, &config.cross_prompt)?;
        x = tf_loco_block(&x, &w, &freq_cfg, &time_cfg, Some(&bits), &positions, np)?;
    }

    let mut p_out = Tensor::<T>::zeros(vec![n, d, f_bands]);
    for row in 0..n {
        for c in 0..d {
            for f in 0..f_bands {
                p_out.data_mut()[row * (d * f_bands) + c * f_bands + f] =
                    x.data()[c * (total * f_bands) + row * f_bands + f];
            }
        }
    }
    let mut z_out = Tensor::<T>::zeros(vec![d, t_frames, f_bands]);
    for c in 0..d {
        for t in 0..t_frames {
            for f in 0..f_bands {
                z_out.data_mut()[c * (t_frames * f_bands) + t * f_bands + f] =
                    x.data()[c * (total * f_bands) + (np + t) * f_bands + f];
            }
        }
    }
    Ok((p_out, z_out))
}

/// Element-wise conditioning: features scaled band-wise by one refined
/// prompt embedding, broadcast over frames.
pub fn condition<T: Real>(z: &Tensor<T>, p_n: &Tensor<T>) -> Result<Tensor<T>> {
    let (d, t_frames, f_bands) = (z.shape()[0], z.shape()[1], z.shape()[2]);
    if p_n.shape() != [d, f_bands] {
        return Err(Error::Shape(format!(
            "conditioning vector {:?} does not match features [{d}, {f_bands}]",
            p_n.shape()
        )));
    }
    let mut out = z.clone();
    for c in 0..d {
        for t in 0..t_frames {
            for f in 0..f_bands {
                let idx = c * (t_frames * f_bands) + t * f_bands + f;
                out.data_mut()[idx] = T::from_f(
                    z.data()[idx].to_f() * p_n.data()[c * f_bands + f].to_f(),
                );
            }
        }
    }
    Ok(out)
}

/// Run the conditioned features through the extraction blocks. The same
/// weights serve every prompt.
pub fn conditional_tse_forward<T: Real>(
    z_n: &Tensor<T>,
    bundle: &WeightBundle<T>,
    config: &ModelConfig,
) -> Result<Tensor<T>> {
    let t_frames = z_n.shape()[1];
    let (freq_cfg, time_cfg) = config.sub_configs(&config.tse);
    let mask = matches!(config.mask_variant, MaskVariant::Causal).then(|| tril_mask(t_frames));
    let positions: Vec<usize> = (0..t_frames).collect();
    let mut x = z_n.clone();
    for i in 0..config.tse.blocks {
        let w = bind_block(bundle, "tse", i, &config.tse)?;
        x = tf_loco_block(
            &x,
            &w,
            &freq_cfg,
            &time_cfg,
            mask.as_deref(),
            &positions,
            0,
        )?;
    }
    Ok(x)
}

/// Full separation: analysis, cross-prompt conditioning, one extraction pass
/// per prompt, synthesis. Outputs are ordered like the prompt list and each
/// has exactly the input length.
pub fn separate<T: Real>(
    x: &[T],
    prompts: &[PromptId],
    bundle: &WeightBundle<T>,
    config: &ModelConfig,
) -> Result<Vec<Vec<T>>> {
    if x.is_empty() {
        return Err(Error::Config("input signal is empty".into()));
    }
    validate_prompts(prompts, config.max_prompts)?;
    let fe = &config.frontend;
    let window = hann_window(fe.n_fft);
    let spec = stft(x, fe.n_fft, fe.hop, &window, fe.sample_rate)?;
    let layout = config.band_layout()?;
    let enc = bind_encoder(bundle, &layout)?;
    let z = band_encode(&spec, &layout, &enc)?;
    let (p_refined, z_refined) = cross_prompt_forward(&z, prompts, bundle, config)?;

    let d = config.dim;
    let f_bands = layout.n_bands();
    let dec = bind_decoder(bundle, &layout)?;
    let mut outputs = Vec::with_capacity(prompts.len());
    for n in 0..prompts.len() {
        let mut p_n = Tensor::<T>::zeros(vec![d, f_bands]);
        for c in 0..d {
            for f in 0..f_bands {
                p_n.set2(c, f, p_refined.data()[n * (d * f_bands) + c * f_bands + f]);
            }
        }
        let conditioned = condition(&z_refined, &p_n)?;
        let extracted = conditional_tse_forward(&conditioned, bundle, config)?;
        let out_spec = band_decode(&extracted, &layout, &dec, fe.sample_rate, fe.n_fft, fe.hop)?;
        let wave = istft_with_len(&out_spec, &window, x.len())?;
        outputs.push(wave);
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_vocabulary_parses_and_rejects() {
        assert_eq!(PromptId::parse("Speech").unwrap(), PromptId::Speech);
        assert_eq!(PromptId::parse("sfx-mix").unwrap(), PromptId::SfxMix);
        assert_eq!(PromptId::parse("Other inst.").unwrap(), PromptId::OtherInst);
        assert_eq!(PromptId::parse("Music-mix").unwrap(), PromptId::MusicMix);
        assert!(PromptId::parse("Guitar").is_err());
    }

    #[test]
    fn repeat_rules_enforced() {
        validate_prompts(&[PromptId::Speech, PromptId::Speech], 6).unwrap();
        validate_prompts(&[PromptId::Sfx, PromptId::Sfx, PromptId::Sfx], 6).unwrap();
        assert!(validate_prompts(&[PromptId::Bass, PromptId::Bass], 6).is_err());
        assert!(validate_prompts(&[], 6).is_err());
        let seven = vec![PromptId::Speech; 7];
        assert!(validate_prompts(&seven, 6).is_err());
    }

    #[test]
    fn preset_id1_time_path_is_pointwise() {
        let cfg = preset("ID1").unwrap();
        assert_eq!(cfg.cross_prompt.time.ffn1.kernel, 1);
        assert_eq!(cfg.cross_prompt.time.ffn2.kernel, 1);
        assert_eq!(cfg.cross_prompt.time.ffn1.variant, FfnVariant::Pointwise);
        assert_eq!(cfg.cross_prompt.freq.ffn1.kernel, 4);
    }

    #[test]
    fn preset_id7_strided_without_ffn1() {
        let cfg = preset("ID7").unwrap();
        assert_eq!(cfg.cross_prompt.freq.ffn2.stride, 4);
        assert!(cfg.cross_prompt.freq.ffn1.is_absent());
        assert!(cfg.tse.time.ffn1.is_absent());
        assert_eq!(cfg.tse.time.ffn2.stride, 4);
        // pointwise time path never strided
        assert_eq!(cfg.cross_prompt.time.ffn2.stride, 1);
    }

    #[test]
    fn preset_aliases_resolve() {
        assert_eq!(preset("FasTUSS-11.7G").unwrap().name, "ID7");
        assert_eq!(preset("FasTUSS-8.3G").unwrap().name, "ID8");
        assert_eq!(preset("id7\u{b6}").unwrap().name, "ID7P");
    }

    #[test]
    fn all_presets_validate() {
        for name in PRESET_NAMES {
            preset(name).unwrap();
        }
        assert!(preset("ID99").is_err());
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let cfg = preset("TOY").unwrap();
        let a: WeightBundle<f32> = init_weights(&cfg, 7).unwrap();
        let b: WeightBundle<f32> = init_weights(&cfg, 7).unwrap();
        for ((na, ta), (nb, tb)) in a.iter().zip(b.iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.data(), tb.data());
        }
        let c: WeightBundle<f32> = init_weights(&cfg, 8).unwrap();
        let differs = a
            .iter()
            .zip(c.iter())
            .any(|((_, ta), (_, tc))| ta.data() != tc.data());
        assert!(differs);
    }

    fn toy_features(config: &ModelConfig, t: usize, seed: u64) -> Tensor<f64> {
        let mut rng = Xoshiro256::seeded(seed);
        let f = config.frontend.n_bands;
        let n = config.dim * t * f;
        Tensor::new(
            vec![config.dim, t, f],
            (0..n).map(|_| rng.uniform(0.7)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cross_prompt_zero_block_weights_is_residual_identity() {
        let cfg = preset("TOY").unwrap();
        let mut bundle: WeightBundle<f64> = init_weights(&cfg, 3).unwrap();
        bundle.zero_matching("xp.block");
        let z = toy_features(&cfg, 5, 31);
        let (p, z_out) = cross_prompt_forward(
            &z,
            &[PromptId::Speech, PromptId::Bass],
            &bundle,
            &cfg,
        )
        .unwrap();
        assert!(z_out.max_abs_diff(&z) < 1e-15);
        // refined prompts equal the broadcast embeddings
        let embed = bundle.get("prompt_embed").unwrap();
        for (row, p_id) in [PromptId::Speech, PromptId::Bass].iter().enumerate() {
            for c in 0..cfg.dim {
                for f in 0..cfg.frontend.n_bands {
                    let got = p.data()[row * (cfg.dim * cfg.frontend.n_bands) + c * cfg.frontend.n_bands + f];
                    assert_eq!(got, embed.at2(p_id.index(), c));
                }
            }
        }
    }

    #[test]
    fn cross_prompt_permutation_equivariance_full_mask() {
        let cfg = preset("TOY").unwrap();
        let bundle: WeightBundle<f64> = init_weights(&cfg, 4).unwrap();
        let z = toy_features(&cfg, 4, 32);
        let prompts = [PromptId::Speech, PromptId::Bass, PromptId::Drums];
        let (p1, z1) = cross_prompt_forward(&z, &prompts, &bundle, &cfg).unwrap();
        let permuted = [PromptId::Drums, PromptId::Speech, PromptId::Bass];
        let (p2, z2) = cross_prompt_forward(&z, &permuted, &bundle, &cfg).unwrap();
        assert!(z1.max_abs_diff(&z2) < 1e-9);
        let df = cfg.dim * cfg.frontend.n_bands;
        // permuted row r2 holds the prompt that sat at `src` in the first run
        for (r2, &src) in [2usize, 0, 1].iter().enumerate() {
            for i in 0..df {
                let a = p2.data()[r2 * df + i];
                let b = p1.data()[src * df + i];
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn condition_ones_zeros_and_hand_product() {
        let cfg = preset("TOY").unwrap();
        let z = toy_features(&cfg, 3, 33);
        let f = cfg.frontend.n_bands;
        let ones = Tensor::filled(vec![cfg.dim, f], 1.0);
        assert!(condition(&z, &ones).unwrap().max_abs_diff(&z) < 1e-15);
        let zeros = Tensor::zeros(vec![cfg.dim, f]);
        assert!(condition(&z, &zeros)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));

        let z2 = Tensor::new(vec![2, 2, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let p = Tensor::new(vec![2, 2], vec![2.0, -1.0, 0.5, 3.0]).unwrap();
        let y = condition(&z2, &p).unwrap();
        let want = [2.0f64, -2.0, 6.0, -4.0, 2.5, 18.0, 3.5, 24.0];
        for (a, b) in y.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn tse_zero_weights_is_identity_and_weights_are_shared() {
        let cfg = preset("TOY").unwrap();
        let mut bundle: WeightBundle<f64> = init_weights(&cfg, 5).unwrap();
        bundle.zero_matching("tse.block");
        let z = toy_features(&cfg, 4, 34);
        let out = conditional_tse_forward(&z, &bundle, &cfg).unwrap();
        assert!(out.max_abs_diff(&z) < 1e-15);

        let bundle2: WeightBundle<f64> = init_weights(&cfg, 6).unwrap();
        let a = conditional_tse_forward(&z, &bundle2, &cfg).unwrap();
        let b = conditional_tse_forward(&z, &bundle2, &cfg).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn tse_matches_block_composition_oracle() {
        let cfg = preset("TOY").unwrap();
        let bundle: WeightBundle<f64> = init_weights(&cfg, 61).unwrap();
        let z = toy_features(&cfg, 4, 35);
        let got = conditional_tse_forward(&z, &bundle, &cfg).unwrap();

        let (freq_cfg, time_cfg) = cfg.sub_configs(&cfg.tse);
        let positions: Vec<usize> = (0..4).collect();
        let mut x = z.clone();
        for i in 0..cfg.tse.blocks {
            let w = bind_block(&bundle, "tse", i, &cfg.tse).unwrap();
            x = tf_loco_block(&x, &w, &freq_cfg, &time_cfg, None, &positions, 0).unwrap();
        }
        assert_eq!(got.data(), x.data());
    }

    #[test]
    fn separate_output_count_and_lengths() {
        let cfg = preset("TOY").unwrap();
        let bundle: WeightBundle<f32> = init_weights(&cfg, 9).unwrap();
        let mut rng = Xoshiro256::seeded(70);
        let x: Vec<f32> = (0..1600).map(|_| rng.uniform(0.5) as f32).collect();
        for prompts in [
            vec![PromptId::Speech],
            vec![PromptId::Speech, PromptId::Sfx],
            vec![PromptId::Speech, PromptId::Sfx, PromptId::Bass, PromptId::Vocals],
        ] {
            let outs = separate(&x, &prompts, &bundle, &cfg).unwrap();
            assert_eq!(outs.len(), prompts.len());
            for o in &outs {
                assert_eq!(o.len(), x.len());
            }
        }
    }

    #[test]
    fn duplicate_speech_prompts_swap_exactly() {
        let cfg = preset("TOY").unwrap();
        let bundle: WeightBundle<f32> = init_weights(&cfg, 10).unwrap();
        let mut rng = Xoshiro256::seeded(71);
        let x: Vec<f32> = (0..1600).map(|_| rng.uniform(0.5) as f32).collect();
        let outs = separate(&x, &[PromptId::Speech, PromptId::Speech], &bundle, &cfg).unwrap();
        // identical embeddings and shared positions: bit-identical branches
        assert_eq!(outs[0], outs[1]);
    }

    #[test]
    fn zero_input_with_zeroed_embeddings_gives_zero_outputs() {
        // biases are zero-initialized; zeroing the prompt table removes the
        // only other signal source
        let cfg = preset("TOY").unwrap();
        let mut bundle: WeightBundle<f64> = init_weights(&cfg, 11).unwrap();
        bundle.zero_matching("prompt_embed");
        bundle.zero_matching("sos_embed");
        let x = vec![0.0f64; 1600];
        let outs = separate(&x, &[PromptId::Speech, PromptId::Drums], &bundle, &cfg).unwrap();
        for o in outs {
            assert!(o.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn config_hash_distinguishes_presets() {
        assert_ne!(preset("ID1").unwrap().hash(), preset("ID7").unwrap().hash());
        assert_eq!(preset("ID1").unwrap().hash(), preset("ID1").unwrap().hash());
    }
}
