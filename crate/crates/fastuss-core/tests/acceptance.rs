//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).

use fastuss_core::cost::{
    calibrate, calibrated_defaults, compute_breakdown, css_cost, macs_conv1d, model_cost,
    model_cost_at_frames, table1_target, GroupScope, GROUPED_IDS, PRIMARY_IDS,
};
use fastuss_core::css::{css_separate, BypassSeparator};
use fastuss_core::dsp::{cola_deviation, hann_window, istft, stft};
use fastuss_core::masks::{build_mask, is_stream_realizable, validate_mask, MaskReport, MaskVariant};
use fastuss_core::model::{init_weights, preset, separate, PromptId, WeightBundle};
use fastuss_core::rng::Xoshiro256;
use fastuss_core::streaming::{offline_causal_features, offline_causal_forward, stream_init, stft_helper};
use fastuss_core::weights_io::{load_weights, save_weights};
use std::sync::Arc;

struct Criterion {
    id: &'static str,
    what: &'static str,
}

impl Criterion {
    fn new(id: &'static str, what: &'static str) -> Self {
        Criterion { id, what }
    }

    fn finish(self, pass: bool, detail: String) {
        let status = if pass { "PASS" } else { "FAIL" };
        println!("criterion {:>3} {status} — {}: {detail}", self.id, self.what);
        assert!(pass, "criterion {} failed: {detail}", self.id);
    }
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Xoshiro256::seeded(seed);
    (0..n).map(|_| rng.uniform(0.6)).collect()
}

#[test]
fn criterion_01_table1_mac_reproduction() {
    let c = Criterion::new("1", "reference MAC table reproduction");
    let report = calibrate().expect("calibration converges");
    let calib = &report.calibration;
    let shipped = calibrated_defaults();
    assert_eq!(calib.frames_per_second, shipped.frames_per_second);
    assert_eq!(calib.n_prompts, shipped.n_prompts);

    let mut detail = format!(
        "fps {}, prompts {}; ",
        calib.frames_per_second, calib.n_prompts
    );
    let mut pass = true;
    for id in PRIMARY_IDS {
        let cfg = preset(id).unwrap();
        let got = model_cost(&cfg, 1.0, calib.n_prompts, calib).unwrap().macs_g();
        let target = table1_target(id).unwrap().macs_g;
        let err = got - target;
        detail.push_str(&format!("{id} {got:.2}G ({err:+.2}) "));
        if err.abs() > 0.3 {
            pass = false;
        }
    }
    // grouped rows: best scope hypothesis within 15%, residuals documented
    for (id, scope, rel) in &report.per_id_best {
        detail.push_str(&format!("| {id}[{scope}] {:+.1}% ", rel * 100.0));
        if rel.abs() > 0.15 {
            pass = false;
        }
    }
    assert!(GROUPED_IDS.len() == report.per_id_best.len());
    c.finish(pass, detail);
}

#[test]
fn criterion_02_parameter_deltas() {
    let c = Criterion::new("2a", "parameter deltas and bundle equality");
    let p = |id: &str| {
        model_cost_at_frames(&preset(id).unwrap(), 1, 1)
            .unwrap()
            .params_total
    };
    let (id1, id5, id7, id7p) = (p("ID1"), p("ID5"), p("ID7"), p("ID7P"));
    let ffn1_delta = id1 as f64 - id5 as f64;
    let pa_delta = id7p as i64 - id7 as i64;

    let mut bundle_exact = true;
    for id in fastuss_core::model::PRESET_NAMES {
        let cfg = preset(id).unwrap();
        let analytic = model_cost_at_frames(&cfg, 2, 1).unwrap().params_total;
        let bundle: WeightBundle<f32> = init_weights(&cfg, 0).unwrap();
        if analytic != bundle.total_params() {
            bundle_exact = false;
        }
    }
    let pass = (ffn1_delta - 2.2e6).abs() <= 0.1e6
        && pa_delta > 0
        && pa_delta <= 300_000
        && bundle_exact;
    c.finish(
        pass,
        format!(
            "ffn1 delta {:.3}M (ref 2.2±0.1), prompt-aware delta {pa_delta} (ref (0, 0.3M]), \
             bundle==analytic for all presets: {bundle_exact}",
            ffn1_delta / 1e6
        ),
    );
}

#[test]
fn criterion_02b_absolute_parameter_count() {
    // The reference table lists 11.1 M parameters for the unoptimized
    // configuration. The architecture that reproduces the reference MAC
    // column (and both parameter deltas) counts 7.50 M; no consistent
    // reading reaches both. This check states the reference value honestly
    // and is expected to stay red; see the table1 residuals for the full fit.
    let c = Criterion::new("2b", "absolute parameter count of ID1");
    let params_m = model_cost_at_frames(&preset("ID1").unwrap(), 1, 1)
        .unwrap()
        .params_total as f64
        / 1e6;
    c.finish(
        (params_m - 11.1).abs() <= 0.15,
        format!("params(ID1) = {params_m:.2} M vs reference 11.1 ± 0.15 M"),
    );
}

#[test]
fn criterion_03_compute_breakdown() {
    let c = Criterion::new("3", "conv-vs-attention breakdown");
    let calib = calibrated_defaults();
    let cfg = preset("ID1").unwrap();
    let rows = compute_breakdown(&cfg, &[1.0, 5.0, 10.0, 30.0], calib.n_prompts, &calib).unwrap();
    let share_1s = rows[0].conv_share;
    let share_30s = rows[3].conv_share;
    let decreasing = rows.windows(2).all(|w| w[1].conv_share < w[0].conv_share);
    let pass = (0.85..=0.95).contains(&share_1s) && decreasing && share_30s <= 0.65;
    c.finish(
        pass,
        format!(
            "conv share 1s {:.3} (in [0.85,0.95]), 30s {:.3} (<=0.65), strictly decreasing {decreasing}",
            share_1s, share_30s
        ),
    );
}

#[test]
fn criterion_04_css_mac_table() {
    let c = Criterion::new("4", "chunked-separation MAC table");
    let calib = calibrated_defaults();
    let cfg = preset("ID1").unwrap();
    let mut detail = String::new();
    let mut pass = true;
    for (chunk, overlap, target_t) in
        [(4.0, 0.0, 2.7), (6.0, 0.5, 5.4), (6.0, 0.75, 10.5), (12.0, 0.0, 3.2)]
    {
        let got =
            css_cost(&cfg, 60.0, chunk, overlap, calib.n_prompts, &calib).unwrap() as f64 / 1e12;
        let rel = (got - target_t) / target_t;
        detail.push_str(&format!(
            "({chunk}s,{:.0}%) {got:.2}T vs {target_t}T ({rel:+.1}%) ",
            overlap * 100.0
        ));
        if rel.abs() > 0.10 {
            pass = false;
        }
    }
    c.finish(pass, detail);
}

#[test]
fn criterion_05_mask_suite() {
    let c = Criterion::new("5", "attention-mask suite");
    let causal = build_mask(MaskVariant::Causal, 2, false, 3).unwrap();
    let blind = build_mask(MaskVariant::BlindPrompt, 2, false, 3).unwrap();
    let indprompt = build_mask(MaskVariant::IndPrompt, 2, false, 3).unwrap();
    let indall = build_mask(MaskVariant::IndAll, 2, false, 3).unwrap();
    let matrices = causal.render_rows() == ["11000", "11000", "11100", "11110", "11111"]
        && blind.render_rows() == ["10000", "01000", "11111", "11111", "11111"]
        && indprompt.render_rows() == ["11000", "11000", "11111", "11111", "11111"]
        && indall.render_rows() == ["11000", "11000", "00111", "00111", "00111"];

    let mut equations = true;
    let mut realizable = true;
    for variant in MaskVariant::ALL {
        for n in 1..=6 {
            for t in 1..=32 {
                for sos in [false, true] {
                    let m = build_mask(variant, n, sos, t).unwrap();
                    if validate_mask(&m, variant) != MaskReport::Valid {
                        equations = false;
                    }
                    // at T = 1 a full frame block and a lower-triangular one
                    // coincide, so the variants are only distinguishable
                    // from two frames on
                    if t >= 2 && is_stream_realizable(&m) != (variant == MaskVariant::Causal) {
                        realizable = false;
                    }
                }
            }
        }
    }
    c.finish(
        matrices && equations && realizable,
        format!("reference matrices {matrices}, block equations {equations}, stream-realizable only causal {realizable}"),
    );
}

#[test]
fn criterion_06_conv_mac_oracle() {
    let c = Criterion::new("6", "conv MAC formula vs naive loop");
    let mut rng = Xoshiro256::seeded(606);
    let mut mismatches = 0u32;
    for _ in 0..1000 {
        let g = 1 + (rng.next_u64() % 4) as usize;
        let cin = g * (1 + (rng.next_u64() % 6) as usize);
        let cout = g * (1 + (rng.next_u64() % 6) as usize);
        let k = 1 + (rng.next_u64() % 6) as usize;
        let s = 1 + (rng.next_u64() % 4) as usize;
        let pad = ((rng.next_u64() % 4) as usize, (rng.next_u64() % 4) as usize);
        let l = k + (rng.next_u64() % 64) as usize;
        // naive loop: count one MAC per (out channel, out position, in
        // channel within group, tap)
        let lp = l + pad.0 + pad.1;
        let l_out = (lp - k) / s + 1;
        let mut naive = 0u64;
        for _co in 0..cout {
            for _t in 0..l_out {
                for _cg in 0..cin / g {
                    for _kk in 0..k {
                        naive += 1;
                    }
                }
            }
        }
        if macs_conv1d(l, cin, cout, k, s, pad, g).unwrap() != naive {
            mismatches += 1;
        }
    }
    c.finish(mismatches == 0, format!("{mismatches} mismatches in 1000 tuples"));
}

#[test]
fn criterion_07_kvcache_equivalence() {
    let c = Criterion::new("7", "streaming vs offline causal equivalence");
    let cfg = preset("TOY-CAUSAL").unwrap();
    let prompts = [PromptId::Speech, PromptId::Sfx];
    // exactly 50 frames: 1 + len/hop = 50
    let len = 49 * cfg.frontend.hop;
    let f_bands = cfg.frontend.n_bands;

    let mut worst32 = 0.0f64;
    let mut worst64 = 0.0f64;
    for seed in 0..20u64 {
        let x64 = noise(len, 7000 + seed);

        // real32
        {
            let bundle: Arc<WeightBundle<f32>> = Arc::new(init_weights(&cfg, seed).unwrap());
            let x: Vec<f32> = x64.iter().map(|&v| v as f32).collect();
            let spec = stft_helper(&x, &cfg).unwrap();
            assert_eq!(spec.n_frames(), 50);
            let offline = offline_causal_features(&x, &prompts, &bundle, &cfg).unwrap();
            let mut state = stream_init(&cfg, bundle, &prompts).unwrap();
            for t in 0..spec.n_frames() {
                let step = state.step(&spec.frame_interleaved(t)).unwrap();
                for (n, feat) in step.features.iter().enumerate() {
                    for c_ in 0..cfg.dim {
                        for f in 0..f_bands {
                            let s = feat.data()[c_ * f_bands + f] as f64;
                            let o = offline[n].data()
                                [c_ * (spec.n_frames() * f_bands) + t * f_bands + f]
                                as f64;
                            worst32 = worst32.max((s - o).abs());
                        }
                    }
                }
            }
        }
        // real64
        {
            let bundle: Arc<WeightBundle<f64>> = Arc::new(init_weights(&cfg, seed).unwrap());
            let spec = stft_helper(&x64, &cfg).unwrap();
            let offline = offline_causal_features(&x64, &prompts, &bundle, &cfg).unwrap();
            let mut state = stream_init(&cfg, bundle, &prompts).unwrap();
            for t in 0..spec.n_frames() {
                let step = state.step(&spec.frame_interleaved(t)).unwrap();
                for (n, feat) in step.features.iter().enumerate() {
                    for c_ in 0..cfg.dim {
                        for f in 0..f_bands {
                            let s = feat.data()[c_ * f_bands + f];
                            let o = offline[n].data()
                                [c_ * (spec.n_frames() * f_bands) + t * f_bands + f];
                            worst64 = worst64.max((s - o).abs());
                        }
                    }
                }
            }
        }
    }
    c.finish(
        worst32 <= 1e-4 && worst64 <= 1e-9,
        format!("20 seeds, T=50: max |diff| real32 {worst32:.2e} (<=1e-4), real64 {worst64:.2e} (<=1e-9)"),
    );
}

#[test]
fn criterion_08_causality() {
    let c = Criterion::new("8", "causal output never depends on the future");
    let cfg = preset("TOY-CAUSAL").unwrap();
    let bundle: WeightBundle<f64> = init_weights(&cfg, 808).unwrap();
    let prompts = [PromptId::Speech, PromptId::SfxMix];
    let x = noise(2048, 81);
    let t_pert = 1400;
    let mut y = x.clone();
    for v in y[t_pert..].iter_mut() {
        *v += 0.31;
    }
    let a = offline_causal_forward(&x, &prompts, &bundle, &cfg).unwrap();
    let b = offline_causal_forward(&y, &prompts, &bundle, &cfg).unwrap();
    let safe = t_pert - cfg.frontend.n_fft;
    let mut early = 0.0f64;
    let mut late = 0.0f64;
    for (oa, ob) in a.iter().zip(&b) {
        for i in 0..safe {
            early = early.max((oa[i] - ob[i]).abs());
        }
        for i in t_pert..oa.len() {
            late = late.max((oa[i] - ob[i]).abs());
        }
    }
    c.finish(
        early <= 1e-6 && late > 0.0,
        format!("max diff before t-window {early:.2e} (<=1e-6); perturbation visible later: {}", late > 0.0),
    );
}

#[test]
fn criterion_09_prompt_permutation_equivariance() {
    let c = Criterion::new("9", "prompt-permutation equivariance");
    let cfg = preset("TOY").unwrap();
    let bundle: WeightBundle<f32> = init_weights(&cfg, 909).unwrap();
    let x: Vec<f32> = noise(1600, 91).into_iter().map(|v| v as f32).collect();

    let prompts = [PromptId::Speech, PromptId::Bass, PromptId::Drums, PromptId::Vocals];
    let permuted = [PromptId::Vocals, PromptId::Speech, PromptId::Drums, PromptId::Bass];
    let source = [3usize, 0, 2, 1];
    let a = separate(&x, &prompts, &bundle, &cfg).unwrap();
    let b = separate(&x, &permuted, &bundle, &cfg).unwrap();
    let mut worst = 0.0f64;
    for (i, &src) in source.iter().enumerate() {
        for (p, q) in b[i].iter().zip(&a[src]) {
            worst = worst.max((*p as f64 - *q as f64).abs());
        }
    }

    let dup = separate(&x, &[PromptId::Speech, PromptId::Speech], &bundle, &cfg).unwrap();
    let dup_exact = dup[0]
        .iter()
        .map(|v| v.to_bits())
        .eq(dup[1].iter().map(|v| v.to_bits()));
    c.finish(
        worst <= 1e-5 && dup_exact,
        format!("max abs deviation {worst:.2e} (<=1e-5); duplicate prompts swap exactly: {dup_exact}"),
    );
}

#[test]
fn criterion_10_frontend() {
    let c = Criterion::new("10", "analysis/synthesis frontend");
    // squared-window overlap constant at both shipped settings
    let dev_full = cola_deviation(&hann_window(2250), 750);
    let dev_toy = cola_deviation(&hann_window(256), 64);

    // round trip, relative to the signal scale
    let x = noise(48_000, 101);
    let w = hann_window(2250);
    let spec = stft(&x, 2250, 750, &w, 48_000).unwrap();
    let back = istft(&spec, &w).unwrap();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel = x
        .iter()
        .zip(&back)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale;

    // chunked pass-through reconstruction
    let mut bypass_ok = true;
    let mut bypass_err = 0.0f64;
    for overlap in [0.5, 0.75] {
        let outs =
            css_separate(&BypassSeparator, &x, &[PromptId::Speech], 0.5, overlap, 48_000).unwrap();
        let err = x
            .iter()
            .zip(&outs[0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        bypass_err = bypass_err.max(err);
        if err > 1e-5 {
            bypass_ok = false;
        }
    }
    c.finish(
        dev_full < 1e-10 && dev_toy < 1e-10 && rel <= 1e-5 && bypass_ok,
        format!(
            "overlap-sum deviation {dev_full:.1e}/{dev_toy:.1e} (<1e-10), round trip rel {rel:.1e} (<=1e-5), \
             pass-through chunk reconstruction max err {bypass_err:.1e}"
        ),
    );
}

#[test]
fn criterion_11_determinism_and_io() {
    let c = Criterion::new("11", "determinism and container integrity");
    let cfg = preset("TOY").unwrap();
    let x: Vec<f32> = noise(1600, 111).into_iter().map(|v| v as f32).collect();

    let b1: WeightBundle<f32> = init_weights(&cfg, 17).unwrap();
    let b2: WeightBundle<f32> = init_weights(&cfg, 17).unwrap();
    let y1 = separate(&x, &[PromptId::Speech, PromptId::Sfx], &b1, &cfg).unwrap();
    let y2 = separate(&x, &[PromptId::Speech, PromptId::Sfx], &b2, &cfg).unwrap();
    let deterministic = y1
        .iter()
        .zip(&y2)
        .all(|(a, b)| a.iter().map(|v| v.to_bits()).eq(b.iter().map(|v| v.to_bits())));

    let dir = std::env::temp_dir();
    let path = dir.join(format!("fastuss-acc-{}.ftss", std::process::id()));
    save_weights(&path, &b1).unwrap();
    let reloaded: WeightBundle<f32> = load_weights(&path, Some(cfg.hash()), true).unwrap();
    let roundtrip = b1.iter().zip(reloaded.iter()).all(|((na, ta), (nb, tb))| {
        na == nb
            && ta
                .data()
                .iter()
                .map(|v| v.to_bits())
                .eq(tb.data().iter().map(|v| v.to_bits()))
    });

    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    std::fs::write(&path, &bytes).unwrap();
    let corrupted_detected = load_weights::<f32>(&path, None, false).is_err();
    std::fs::remove_file(&path).ok();

    c.finish(
        deterministic && roundtrip && corrupted_detected,
        format!(
            "bit-deterministic {deterministic}, container round trip {roundtrip}, \
             corruption detected {corrupted_detected}"
        ),
    );
}
