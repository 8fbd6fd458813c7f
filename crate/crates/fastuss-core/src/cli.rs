//! Command-line interface: `fastuss <profile|run|verify|masks|init-weights|calibrate>`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/config error,
//! 3 i/o error.

use crate::cost::{
    calibrate, calibrated_defaults, compute_breakdown, model_cost, model_cost_at_frames,
    table1_target, Calibration, CostReport, GROUPED_IDS, PRIMARY_IDS, TABLE1_TARGETS,
};
use crate::css::{css_separate, ModelSeparator};
use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::masks::{build_mask, MaskVariant};
use crate::model::{init_weights, preset, separate, ModelConfig, PromptId, WeightBundle};
use crate::real::Real;
use crate::streaming::{stft_helper, stream_init};
use crate::verify;
use crate::wav::{read_wav, write_wav};
use crate::weights_io::{load_weights, save_weights};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser)]
#[command(
    name = "fastuss",
    about = "Prompt-conditioned source separation: inference, cost model, causal streaming"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the analytic parameter/MAC report for a configuration
    Profile(ProfileArgs),
    /// Separate a WAV file into one stem per prompt
    Run(RunArgs),
    /// Run a property suite and report pass/fail per property
    Verify {
        /// masks | macs | kvcache | causality | cola | permutation | io
        suite: String,
    },
    /// Print an attention mask as 0/1 rows
    Masks(MasksArgs),
    /// Initialize a deterministic random weight container
    InitWeights(InitWeightsArgs),
    /// Grid-search the frame rate and prompt count against the built-in
    /// reference MAC table
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct ProfileArgs {
    /// Preset name (ID1..ID9, ID7P, BLINDPROMPT, INDPROMPT, INDALL, CAUSAL,
    /// FasTUSS-11.7G, FasTUSS-8.3G, TOY, TOY-CAUSAL)
    #[arg(long)]
    preset: Option<String>,
    /// JSON configuration file (alternative to --preset)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    /// Prompt count (defaults to the calibrated value)
    #[arg(long)]
    prompts: Option<usize>,
    /// Override the calibrated analytic frame rate
    #[arg(long)]
    frames_per_second: Option<u32>,
    /// Print every preset row against the built-in reference targets
    #[arg(long)]
    table1: bool,
    /// Print conv-vs-attention share per duration
    #[arg(long)]
    breakdown: bool,
    /// Durations for --breakdown, comma separated seconds
    #[arg(long, default_value = "1,5,10,30")]
    durations: String,
    /// Emit the report as JSON
    #[arg(long)]
    json: bool,
    /// Write the breakdown rows as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated prompt list, e.g. Speech,SFX-mix,Bass
    #[arg(long)]
    prompts: String,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weight container to load
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Seed for deterministic random initialization (alternative to --weights)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Chunked processing: chunk length in seconds
    #[arg(long)]
    chunk: Option<f64>,
    /// Chunk overlap fraction in [0, 1)
    #[arg(long, default_value_t = 0.0)]
    overlap: f64,
    /// Frame-by-frame KV-cached inference (causal presets only)
    #[arg(long)]
    streaming: bool,
    /// Run in 64-bit precision
    #[arg(long)]
    f64: bool,
    /// Fail if the weight file was built for a different configuration
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct MasksArgs {
    #[arg(long)]
    variant: String,
    #[arg(short = 'n', long)]
    prompts: usize,
    #[arg(short = 't', long)]
    frames: usize,
    /// Include the separator token in the prompt block
    #[arg(long)]
    sos: bool,
}

#[derive(Args)]
struct InitWeightsArgs {
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    f64: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Write the calibration result as JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_cli<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.cmd {
        Cmd::Profile(a) => cmd_profile(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Verify { suite } => cmd_verify(&suite),
        Cmd::Masks(a) => cmd_masks(a),
        Cmd::InitWeights(a) => cmd_init_weights(a),
        Cmd::Calibrate(a) => cmd_calibrate(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_config(preset_name: &Option<String>, config_path: &Option<PathBuf>) -> Result<ModelConfig> {
    match (preset_name, config_path) {
        (Some(_), Some(_)) => Err(Error::Config("give either --preset or --config".into())),
        (Some(name), None) => preset(name),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            // a bare preset name inside the file is accepted too
            let trimmed = text.trim();
            if let Ok(cfg) = preset(trimmed) {
                return Ok(cfg);
            }
            let cfg: ModelConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("config parse: {e}")))?;
            cfg.validate()?;
            Ok(cfg)
        }
        (None, None) => Err(Error::Config("need --preset or --config".into())),
    }
}

fn effective_calibration(fps_override: Option<u32>, n_override: Option<usize>) -> Calibration {
    let mut calib = calibrated_defaults();
    if let Some(fps) = fps_override {
        calib.frames_per_second = fps;
    }
    if let Some(n) = n_override {
        calib.n_prompts = n;
    }
    calib
}

fn print_report(report: &CostReport) {
    println!(
        "{}: {:.1} s of audio, {} prompts, {} frames @ {} fps",
        report.config_name,
        report.duration_s,
        report.n_prompts,
        report.n_frames,
        report.frames_per_second
    );
    println!(
        "  params {:>12}  ({:.2} M)",
        report.params_total,
        report.params_m()
    );
    println!(
        "  macs   {:>12}  ({:.2} G)",
        report.macs_total,
        report.macs_g()
    );
    println!("  {:<16}{:>14}{:>16}", "component", "params", "macs");
    for (name, c) in report.components() {
        println!("  {:<16}{:>14}{:>16}", name, c.params, c.macs);
    }
}

fn cmd_profile(a: ProfileArgs) -> Result<i32> {
    let calib = effective_calibration(a.frames_per_second, a.prompts);

    if a.table1 {
        return cmd_table1(&calib);
    }

    let cfg = resolve_config(&a.preset, &a.config)?;
    let report = model_cost(&cfg, a.duration, calib.n_prompts, &calib)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        print_report(&report);
        if let Some(target) = table1_target(&cfg.name) {
            if (a.duration - 1.0).abs() < 1e-9 {
                println!(
                    "  reference {:.1} G, residual {:+.2} G ({:+.1}%)",
                    target.macs_g,
                    report.macs_g() - target.macs_g,
                    (report.macs_g() - target.macs_g) / target.macs_g * 100.0
                );
            }
        }
    }
    if a.breakdown {
        let durations: Vec<f64> = a
            .durations
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad duration '{s}'")))
            })
            .collect::<Result<_>>()?;
        let rows = compute_breakdown(&cfg, &durations, calib.n_prompts, &calib)?;
        println!("  {:<12}{:>12}{:>12}", "duration_s", "conv_share", "attn_share");
        let mut csv = String::from("duration_s,conv_share,attn_share\n");
        for r in &rows {
            println!(
                "  {:<12}{:>12.4}{:>12.4}",
                r.duration_s, r.conv_share, r.attn_share
            );
            csv.push_str(&format!(
                "{},{:.6},{:.6}\n",
                r.duration_s, r.conv_share, r.attn_share
            ));
        }
        if let Some(path) = &a.csv {
            std::fs::write(path, csv)?;
            println!("  breakdown csv written to {}", path.display());
        }
    }
    Ok(0)
}

fn cmd_table1(calib: &Calibration) -> Result<i32> {
    println!(
        "analytic MAC for 1 s at {} fps, {} prompts (params in M, macs in G)",
        calib.frames_per_second, calib.n_prompts
    );
    println!(
        "{:<14}{:>10}{:>10}{:>10}{:>10}{:>10}{:>9}",
        "id", "params", "ref", "macs", "ref", "resid", "resid%"
    );
    let mut worst_primary = 0.0f64;
    for row in TABLE1_TARGETS {
        let cfg = preset(row.id)?;
        let report = model_cost(&cfg, 1.0, calib.n_prompts, calib)?;
        let resid = report.macs_g() - row.macs_g;
        let is_primary = PRIMARY_IDS.contains(&row.id);
        if is_primary {
            worst_primary = worst_primary.max(resid.abs());
        }
        let tag = if is_primary {
            ""
        } else if GROUPED_IDS.contains(&row.id) {
            "*"
        } else {
            " "
        };
        println!(
            "{:<14}{:>10.2}{:>10.1}{:>10.2}{:>10.1}{:>+10.2}{:>+8.1}%{}",
            row.id,
            report.params_m(),
            row.params_m,
            report.macs_g(),
            row.macs_g,
            resid,
            resid / row.macs_g * 100.0,
            tag
        );
    }
    println!("* grouped rows evaluated under the calibrated per-row grouping scope");
    println!("worst primary-row residual: {worst_primary:.3} G (tolerance 0.3 G)");
    Ok(if worst_primary <= 0.3 { 0 } else { 1 })
}

fn cmd_run(a: RunArgs) -> Result<i32> {
    if a.f64 {
        run_typed::<f64>(a)
    } else {
        run_typed::<f32>(a)
    }
}

fn run_typed<T: Real>(a: RunArgs) -> Result<i32> {
    let cfg = match (&a.preset, &a.config) {
        (None, None) => preset("ID1")?,
        _ => resolve_config(&a.preset, &a.config)?,
    };
    let prompts: Vec<PromptId> = a
        .prompts
        .split(',')
        .map(PromptId::parse)
        .collect::<Result<_>>()?;
    let wav = read_wav(&a.input)?;
    if wav.sample_rate != cfg.frontend.sample_rate {
        return Err(Error::Config(format!(
            "input is {} Hz but the configuration expects {} Hz (resample first)",
            wav.sample_rate, cfg.frontend.sample_rate
        )));
    }
    let x: Vec<T> = wav.samples.iter().map(|&v| T::from_f(v as f64)).collect();

    let (bundle, seed): (WeightBundle<T>, Option<u64>) = match (&a.weights, a.seed) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("give either --weights or --seed, not both".into()))
        }
        (Some(path), None) => {
            let b = load_weights::<T>(path, Some(cfg.hash()), a.strict)?;
            let s = b.seed;
            (b, Some(s))
        }
        (None, Some(seed)) => (init_weights(&cfg, seed)?, Some(seed)),
        (None, None) => {
            return Err(Error::Config(
                "no weights: give --weights FILE or --seed N for random initialization".into(),
            ))
        }
    };

    let outputs: Vec<Vec<T>> = if a.streaming {
        if a.chunk.is_some() {
            return Err(Error::Config("--streaming and --chunk are exclusive".into()));
        }
        let spec = stft_helper(&x, &cfg)?;
        let mut state = stream_init(&cfg, Arc::new(bundle.clone()), &prompts)?;
        for t in 0..spec.n_frames() {
            state.step(&spec.frame_interleaved(t))?;
        }
        state.finish(x.len())?
    } else if let Some(chunk_s) = a.chunk {
        let sep = ModelSeparator {
            bundle: &bundle,
            config: &cfg,
        };
        css_separate(&sep, &x, &prompts, chunk_s, a.overlap, cfg.frontend.sample_rate)?
    } else {
        separate(&x, &prompts, &bundle, &cfg)?
    };

    let out_dir = a
        .out_dir
        .clone()
        .or_else(|| a.input.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let stem = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "out".to_string());

    let mut out_paths = Vec::new();
    for (i, (out, prompt)) in outputs.iter().zip(&prompts).enumerate() {
        let path = out_dir.join(format!("{stem}.{i}.{}.wav", prompt.name()));
        let f32_out: Vec<f32> = out.iter().map(|&v| v.to_f() as f32).collect();
        write_wav(&path, &f32_out, cfg.frontend.sample_rate)?;
        out_paths.push(path.display().to_string());
    }

    let duration_s = x.len() as f64 / cfg.frontend.sample_rate as f64;
    let frames = 1 + x.len() / cfg.frontend.hop;
    let mac_estimate = model_cost_at_frames(&cfg, frames as u64, prompts.len())?.macs_total;
    let manifest = RunManifest {
        preset: cfg.name.clone(),
        config: cfg.clone(),
        seed,
        weights_file: a.weights.as_ref().map(|p| p.display().to_string()),
        input: a.input.display().to_string(),
        prompts: prompts.iter().map(|p| p.name().to_string()).collect(),
        chunk_s: a.chunk,
        overlap: a.chunk.map(|_| a.overlap),
        streaming: a.streaming,
        precision: if a.f64 { "real64" } else { "real32" }.to_string(),
        outputs: out_paths.clone(),
        mac_estimate,
        duration_s,
        sample_rate: cfg.frontend.sample_rate,
    };
    let manifest_path = out_dir.join(format!("{stem}.manifest.json"));
    manifest.write(&manifest_path)?;

    for p in &out_paths {
        println!("{p}");
    }
    println!("{}", manifest_path.display());
    Ok(0)
}

fn cmd_verify(suite: &str) -> Result<i32> {
    let checks = verify::suite(suite)?;
    let mut failed = 0;
    for c in &checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{status} {}", c.name);
        } else {
            println!("{status} {} ({})", c.name, c.detail);
        }
        if !c.pass {
            failed += 1;
        }
    }
    println!(
        "{}: {} of {} properties passed",
        suite,
        checks.len() - failed,
        checks.len()
    );
    Ok(if failed == 0 { 0 } else { 1 })
}

fn cmd_masks(a: MasksArgs) -> Result<i32> {
    let variant = MaskVariant::parse(&a.variant)?;
    let mask = build_mask(variant, a.prompts, a.sos, a.frames)?;
    let rows = mask.render_rows();
    for (i, row) in rows.iter().enumerate() {
        if i == mask.n_prompt {
            println!();
        }
        println!("{row}");
    }
    Ok(0)
}

fn cmd_init_weights(a: InitWeightsArgs) -> Result<i32> {
    let cfg = resolve_config(&a.preset, &a.config)?;
    if a.f64 {
        let bundle = init_weights::<f64>(&cfg, a.seed)?;
        save_weights(&a.out, &bundle)?;
        println!(
            "{}: {} tensors, {} parameters (real64) -> {}",
            cfg.name,
            bundle.len(),
            bundle.total_params(),
            a.out.display()
        );
    } else {
        let bundle = init_weights::<f32>(&cfg, a.seed)?;
        save_weights(&a.out, &bundle)?;
        println!(
            "{}: {} tensors, {} parameters (real32) -> {}",
            cfg.name,
            bundle.len(),
            bundle.total_params(),
            a.out.display()
        );
    }
    Ok(0)
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<i32> {
    let report = calibrate()?;
    println!(
        "calibrated: frames_per_second {}, prompts {}, max primary residual {:.2}%",
        report.calibration.frames_per_second,
        report.calibration.n_prompts,
        report.calibration.max_rel_err_primary * 100.0
    );
    println!("{:<8}{:>12}{:>12}{:>10}", "id", "analytic G", "target G", "resid%");
    for (id, got, target, rel) in &report.primary {
        println!("{:<8}{:>12.2}{:>12.1}{:>+9.1}%", id, got, target, rel * 100.0);
    }
    println!("grouped rows under each grouping-scope hypothesis:");
    println!("{:<8}{:<24}{:>12}{:>10}", "id", "scope", "analytic G", "resid%");
    for r in &report.scope_matrix {
        println!(
            "{:<8}{:<24}{:>12.2}{:>+9.1}%",
            r.id,
            r.scope,
            r.macs_g,
            r.rel_err * 100.0
        );
    }
    println!("best scope per grouped row:");
    for (id, scope, rel) in &report.per_id_best {
        println!("  {id}: {scope} ({:+.1}%)", rel * 100.0);
    }
    if let Some(path) = &a.out {
        std::fs::write(
            path,
            serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?,
        )?;
        println!("calibration written to {}", path.display());
    }
    Ok(0)
}
