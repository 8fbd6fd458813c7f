//! Runtime property suites behind the `verify` command. Each suite returns
//! one line per property; the CLI prints them and fails on any false result.

use crate::cost::{macs_conv1d, model_cost_at_frames};
use crate::css::{css_separate, chunk_plan, crossfade_weights, BypassSeparator};
use crate::dsp::{cola_deviation, hann_window, istft, stft};
use crate::error::Result;
use crate::masks::{build_mask, is_stream_realizable, validate_mask, MaskReport, MaskVariant};
use crate::model::{init_weights, preset, separate, PromptId, WeightBundle};
use crate::rng::Xoshiro256;
use crate::streaming::{offline_causal_features, offline_causal_forward, stream_init, stft_helper};
use std::sync::Arc;

pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

pub fn suite(name: &str) -> Result<Vec<Check>> {
    match name {
        "masks" => Ok(masks_suite()),
        "macs" => Ok(macs_suite()),
        "kvcache" => kvcache_suite(),
        "causality" => causality_suite(),
        "cola" => cola_suite(),
        "permutation" => permutation_suite(),
        "io" => io_suite(),
        other => Err(crate::error::Error::Config(format!(
            "unknown verify suite '{other}' (try masks|macs|kvcache|causality|cola|permutation|io)"
        ))),
    }
}

pub const SUITES: [&str; 7] = [
    "masks",
    "macs",
    "kvcache",
    "causality",
    "cola",
    "permutation",
    "io",
];

fn masks_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let causal = build_mask(MaskVariant::Causal, 2, false, 3).unwrap();
    out.push(check(
        "causal 2x3 matrix",
        causal.render_rows() == ["11000", "11000", "11100", "11110", "11111"],
        format!("{:?}", causal.render_rows()),
    ));
    let blind = build_mask(MaskVariant::BlindPrompt, 2, false, 3).unwrap();
    out.push(check(
        "blindprompt 2x3 matrix",
        blind.render_rows() == ["10000", "01000", "11111", "11111", "11111"],
        format!("{:?}", blind.render_rows()),
    ));
    let indall = build_mask(MaskVariant::IndAll, 2, false, 3).unwrap();
    out.push(check(
        "indall 2x3 block diagonal",
        indall.render_rows() == ["11000", "11000", "00111", "00111", "00111"],
        format!("{:?}", indall.render_rows()),
    ));
    let mut all_valid = true;
    for variant in MaskVariant::ALL {
        for n in 1..=6 {
            for t in 1..=32 {
                let m = build_mask(variant, n, true, t).unwrap();
                if validate_mask(&m, variant) != MaskReport::Valid {
                    all_valid = false;
                }
            }
        }
    }
    out.push(check(
        "block equations for all (N,T) in [1..6]x[1..32]",
        all_valid,
        String::new(),
    ));
    let realizable_only_causal = MaskVariant::ALL.iter().all(|&v| {
        let m = build_mask(v, 3, true, 8).unwrap();
        is_stream_realizable(&m) == (v == MaskVariant::Causal)
    });
    out.push(check(
        "stream-realizable exactly for causal",
        realizable_only_causal,
        String::new(),
    ));
    out
}

fn macs_suite() -> Vec<Check> {
    // brute-force oracle: count multiply-accumulates of the naive loop
    let naive = |l: usize, cin: usize, cout: usize, k: usize, s: usize, p: (usize, usize), g: usize| -> u64 {
        let lp = l + p.0 + p.1;
        if lp < k {
            return 0;
        }
        let l_out = (lp - k) / s + 1;
        let mut count = 0u64;
        for _co in 0..cout {
            for _t in 0..l_out {
                for _cg in 0..cin / g {
                    for _kk in 0..k {
                        count += 1;
                    }
                }
            }
        }
        count
    };
    let mut rng = Xoshiro256::seeded(2024);
    let mut all_equal = true;
    let mut first_bad = String::new();
    for _ in 0..1000 {
        let g = 1 + (rng.next_u64() % 4) as usize;
        let cin = g * (1 + (rng.next_u64() % 6) as usize);
        let cout = g * (1 + (rng.next_u64() % 6) as usize);
        let k = 1 + (rng.next_u64() % 6) as usize;
        let s = 1 + (rng.next_u64() % 4) as usize;
        let p = ((rng.next_u64() % 4) as usize, (rng.next_u64() % 4) as usize);
        let l = k + (rng.next_u64() % 64) as usize;
        let expect = naive(l, cin, cout, k, s, p, g);
        let got = macs_conv1d(l, cin, cout, k, s, p, g).unwrap_or(0);
        if got != expect {
            all_equal = false;
            if first_bad.is_empty() {
                first_bad = format!(
                    "L={l} Cin={cin} Cout={cout} K={k} S={s} pad={p:?} G={g}: {got} vs {expect}"
                );
            }
        }
    }
    vec![
        check(
            "analytic conv count == naive loop count on 1000 random tuples",
            all_equal,
            first_bad,
        ),
        check(
            "reference case 144",
            macs_conv1d(10, 2, 2, 4, 1, (1, 1), 1).unwrap() == 144,
            String::new(),
        ),
    ]
}

fn kvcache_suite() -> Result<Vec<Check>> {
    let cfg = preset("TOY-CAUSAL")?;
    let prompts = [PromptId::Speech, PromptId::Sfx];
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let bundle: Arc<WeightBundle<f32>> = Arc::new(init_weights(&cfg, seed)?);
        let mut rng = Xoshiro256::seeded(900 + seed);
        let x: Vec<f32> = (0..1600).map(|_| rng.uniform(0.6) as f32).collect();
        let spec = stft_helper(&x, &cfg)?;
        let offline = offline_causal_features(&x, &prompts, &bundle, &cfg)?;
        let mut state = stream_init(&cfg, bundle, &prompts)?;
        for t in 0..spec.n_frames() {
            let step = state.step(&spec.frame_interleaved(t))?;
            let f_bands = cfg.frontend.n_bands;
            for (n, feat) in step.features.iter().enumerate() {
                for c in 0..cfg.dim {
                    for f in 0..f_bands {
                        let s = feat.data()[c * f_bands + f] as f64;
                        let o = offline[n].data()[c * (spec.n_frames() * f_bands) + t * f_bands + f]
                            as f64;
                        worst = worst.max((s - o).abs());
                    }
                }
            }
        }
    }
    Ok(vec![check(
        "streaming matches offline causal features (5 seeds, f32)",
        worst <= 1e-4,
        format!("max abs diff {worst:.3e}"),
    )])
}

fn causality_suite() -> Result<Vec<Check>> {
    let cfg = preset("TOY-CAUSAL")?;
    let bundle: WeightBundle<f64> = init_weights(&cfg, 11)?;
    let prompts = [PromptId::Speech];
    let mut rng = Xoshiro256::seeded(700);
    let x: Vec<f64> = (0..1600).map(|_| rng.uniform(0.6)).collect();
    let mut y = x.clone();
    let s = 1100;
    for v in y[s..].iter_mut() {
        *v += 0.4;
    }
    let a = offline_causal_forward(&x, &prompts, &bundle, &cfg)?;
    let b = offline_causal_forward(&y, &prompts, &bundle, &cfg)?;
    let safe = s - cfg.frontend.n_fft;
    let mut early = 0.0f64;
    for i in 0..safe {
        early = early.max((a[0][i] - b[0][i]).abs());
    }
    Ok(vec![check(
        "future perturbation leaves past outputs unchanged",
        early <= 1e-6,
        format!("max early diff {early:.3e}"),
    )])
}

fn cola_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n_fft, hop) in [(2250usize, 750usize), (256, 64)] {
        let w = hann_window(n_fft);
        let dev = cola_deviation(&w, hop);
        out.push(check(
            &format!("squared-window sum constant at {n_fft}/{hop}"),
            dev < 1e-10,
            format!("deviation {dev:.3e}"),
        ));
    }
    let mut rng = Xoshiro256::seeded(5150);
    let x: Vec<f64> = (0..8000).map(|_| rng.uniform(0.8)).collect();
    let w = hann_window(256);
    let spec = stft(&x, 256, 64, &w, 8000)?;
    let back = istft(&spec, &w)?;
    let err = x
        .iter()
        .zip(&back)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.push(check(
        "analysis/synthesis round trip",
        err <= 1e-5,
        format!("max err {err:.3e}"),
    ));
    // stitching machinery reconstructs through the pass-through separator
    let plan = chunk_plan(8000, 0.25, 0.5, 8000)?;
    let weights = crossfade_weights(&plan, 8000);
    let unity = weights
        .iter()
        .all(|entries| entries.iter().map(|(_, w)| *w).sum::<f64>() == 1.0);
    out.push(check("crossfade weights partition unity", unity, String::new()));
    for overlap in [0.5, 0.75] {
        let outs = css_separate(&BypassSeparator, &x, &[PromptId::Speech], 0.25, overlap, 8000)?;
        let err = x
            .iter()
            .zip(&outs[0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.push(check(
            &format!("pass-through chunked reconstruction at {:.0}%", overlap * 100.0),
            err <= 1e-5,
            format!("max err {err:.3e}"),
        ));
    }
    Ok(out)
}

fn permutation_suite() -> Result<Vec<Check>> {
    let cfg = preset("TOY")?;
    let bundle: WeightBundle<f32> = init_weights(&cfg, 31)?;
    let mut rng = Xoshiro256::seeded(320);
    let x: Vec<f32> = (0..1600).map(|_| rng.uniform(0.6) as f32).collect();
    let prompts = [PromptId::Speech, PromptId::Bass, PromptId::Drums];
    let permuted = [PromptId::Drums, PromptId::Speech, PromptId::Bass];
    let a = separate(&x, &prompts, &bundle, &cfg)?;
    let b = separate(&x, &permuted, &bundle, &cfg)?;
    // b[i] corresponds to a[source[i]]
    let source = [2usize, 0, 1];
    let mut worst = 0.0f64;
    for (i, &src) in source.iter().enumerate() {
        for (p, q) in b[i].iter().zip(&a[src]) {
            worst = worst.max((*p as f64 - *q as f64).abs());
        }
    }
    let dup = separate(&x, &[PromptId::Speech, PromptId::Speech], &bundle, &cfg)?;
    Ok(vec![
        check(
            "prompt permutation permutes outputs",
            worst <= 1e-5,
            format!("max abs dev {worst:.3e}"),
        ),
        check(
            "duplicate prompts produce identical outputs",
            dup[0] == dup[1],
            String::new(),
        ),
    ])
}

fn io_suite() -> Result<Vec<Check>> {
    use crate::wav::{read_wav, write_wav};
    use crate::weights_io::{load_weights, save_weights};
    let mut out = Vec::new();
    let dir = std::env::temp_dir();
    let wav_path = dir.join(format!("fastuss-verify-{}.wav", std::process::id()));
    let mut rng = Xoshiro256::seeded(41);
    let samples: Vec<f32> = (0..400).map(|_| rng.uniform(0.9) as f32).collect();
    write_wav(&wav_path, &samples, 48_000)?;
    let back = read_wav(&wav_path)?;
    out.push(check(
        "float32 wav round trip bit-exact",
        back.samples == samples && back.sample_rate == 48_000,
        String::new(),
    ));
    std::fs::remove_file(&wav_path).ok();

    let cfg = preset("TOY")?;
    let bundle = init_weights::<f32>(&cfg, 99)?;
    let w_path = dir.join(format!("fastuss-verify-{}.ftss", std::process::id()));
    save_weights(&w_path, &bundle)?;
    let reloaded: WeightBundle<f32> = load_weights(&w_path, Some(cfg.hash()), true)?;
    let bit_exact = bundle.iter().zip(reloaded.iter()).all(|((_, a), (_, b))| {
        a.data().iter().map(|v| v.to_bits()).eq(b.data().iter().map(|v| v.to_bits()))
    });
    out.push(check("weight container round trip bit-exact", bit_exact, String::new()));

    let mut bytes = std::fs::read(&w_path)?;
    let mid = bytes.len() / 3;
    bytes[mid] ^= 0x01;
    std::fs::write(&w_path, &bytes)?;
    let corrupted = load_weights::<f32>(&w_path, None, false).is_err();
    out.push(check("corrupted container detected by checksum", corrupted, String::new()));
    std::fs::remove_file(&w_path).ok();

    // determinism of a run: same seed, same input, identical bytes out
    let x: Vec<f32> = (0..1600).map(|_| rng.uniform(0.5) as f32).collect();
    let b1 = init_weights::<f32>(&cfg, 5)?;
    let b2 = init_weights::<f32>(&cfg, 5)?;
    let y1 = separate(&x, &[PromptId::Speech], &b1, &cfg)?;
    let y2 = separate(&x, &[PromptId::Speech], &b2, &cfg)?;
    let same = y1[0]
        .iter()
        .map(|v| v.to_bits())
        .eq(y2[0].iter().map(|v| v.to_bits()));
    out.push(check("separate is bit-deterministic", same, String::new()));

    // analytic params equals bundle element count
    let report = model_cost_at_frames(&cfg, 8, 2)?;
    out.push(check(
        "analytic parameter count equals bundle size",
        report.params_total == bundle.total_params(),
        format!("{} vs {}", report.params_total, bundle.total_params()),
    ));
    Ok(out)
}
