//! Python bindings: presets, masks, the analytic cost model, and separation.

use fastuss_core::cost;
use fastuss_core::masks::{build_mask, MaskVariant};
use fastuss_core::model::{self, PromptId};
use fastuss_core::streaming;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::sync::Arc;

fn err(e: fastuss_core::Error) -> PyErr {
    match e {
        fastuss_core::Error::Io(_) | fastuss_core::Error::Format(_) => {
            PyIOError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Names of the built-in configuration presets.
#[pyfunction]
fn presets() -> Vec<String> {
    model::PRESET_NAMES.iter().map(|s| s.to_string()).collect()
}

/// The prompt vocabulary.
#[pyfunction]
fn prompt_vocabulary() -> Vec<String> {
    PromptId::ALL.iter().map(|p| p.name().to_string()).collect()
}

/// Full configuration of a preset as a JSON string.
#[pyfunction]
fn preset_config(name: &str) -> PyResult<String> {
    let cfg = model::preset(name).map_err(err)?;
    serde_json::to_string_pretty(&cfg).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Attention mask rows (0/1) for a variant, prompt count, separator flag,
/// and frame count.
#[pyfunction]
#[pyo3(signature = (variant, n_prompts, n_frames, sos = false))]
fn mask(variant: &str, n_prompts: usize, n_frames: usize, sos: bool) -> PyResult<Vec<Vec<u8>>> {
    let v = MaskVariant::parse(variant).map_err(err)?;
    let m = build_mask(v, n_prompts, sos, n_frames).map_err(err)?;
    let n = m.size();
    Ok((0..n)
        .map(|i| (0..n).map(|j| u8::from(m.get(i, j))).collect())
        .collect())
}

fn report_to_dict<'py>(
    py: Python<'py>,
    report: &cost::CostReport,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("config", report.config_name.clone())?;
    d.set_item("duration_s", report.duration_s)?;
    d.set_item("n_prompts", report.n_prompts)?;
    d.set_item("frames_per_second", report.frames_per_second)?;
    d.set_item("params_total", report.params_total)?;
    d.set_item("macs_total", report.macs_total)?;
    d.set_item("params_m", report.params_m())?;
    d.set_item("macs_g", report.macs_g())?;
    let comps = PyDict::new(py);
    for (name, c) in report.components() {
        let entry = PyDict::new(py);
        entry.set_item("params", c.params)?;
        entry.set_item("macs", c.macs)?;
        comps.set_item(name, entry)?;
    }
    d.set_item("components", comps)?;
    Ok(d)
}

/// Analytic parameter and MAC report for a preset.
#[pyfunction]
#[pyo3(signature = (preset, duration_s = 1.0, n_prompts = None))]
fn model_cost<'py>(
    py: Python<'py>,
    preset: &str,
    duration_s: f64,
    n_prompts: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = model::preset(preset).map_err(err)?;
    let calib = cost::calibrated_defaults();
    let report = cost::model_cost(&cfg, duration_s, n_prompts.unwrap_or(calib.n_prompts), &calib)
        .map_err(err)?;
    report_to_dict(py, &report)
}

/// Every reference-table row with analytic values and residuals.
#[pyfunction]
fn table1(py: Python<'_>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    let calib = cost::calibrated_defaults();
    let mut rows = Vec::new();
    for target in cost::TABLE1_TARGETS {
        let cfg = model::preset(target.id).map_err(err)?;
        let report = cost::model_cost(&cfg, 1.0, calib.n_prompts, &calib).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("id", target.id)?;
        d.set_item("macs_g", report.macs_g())?;
        d.set_item("target_macs_g", target.macs_g)?;
        d.set_item("params_m", report.params_m())?;
        d.set_item("target_params_m", target.params_m)?;
        d.set_item("primary", cost::PRIMARY_IDS.contains(&target.id))?;
        rows.push(d);
    }
    Ok(rows)
}

/// Total MAC of chunked separation of `total_s` seconds of audio.
#[pyfunction]
#[pyo3(signature = (preset, total_s, chunk_s, overlap, n_prompts = None))]
fn css_cost(
    preset: &str,
    total_s: f64,
    chunk_s: f64,
    overlap: f64,
    n_prompts: Option<usize>,
) -> PyResult<u64> {
    let cfg = model::preset(preset).map_err(err)?;
    let calib = cost::calibrated_defaults();
    cost::css_cost(
        &cfg,
        total_s,
        chunk_s,
        overlap,
        n_prompts.unwrap_or(calib.n_prompts),
        &calib,
    )
    .map_err(err)
}

/// (duration_s, conv_share, attn_share) rows for a preset.
#[pyfunction]
fn breakdown(preset: &str, durations: Vec<f64>) -> PyResult<Vec<(f64, f64, f64)>> {
    let cfg = model::preset(preset).map_err(err)?;
    let calib = cost::calibrated_defaults();
    let rows = cost::compute_breakdown(&cfg, &durations, calib.n_prompts, &calib).map_err(err)?;
    Ok(rows
        .iter()
        .map(|r| (r.duration_s, r.conv_share, r.attn_share))
        .collect())
}

/// Grid-search calibration report as a JSON string.
#[pyfunction]
fn calibrate() -> PyResult<String> {
    let report = cost::calibrate().map_err(err)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_prompts(prompts: Vec<String>) -> PyResult<Vec<PromptId>> {
    prompts
        .iter()
        .map(|s| PromptId::parse(s).map_err(err))
        .collect()
}

/// Separate a mono float signal into one stem per prompt with deterministic
/// random weights.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, prompts, preset = "TOY", seed = 0))]
fn separate(
    samples: Vec<f32>,
    sample_rate: u32,
    prompts: Vec<String>,
    preset: &str,
    seed: u64,
) -> PyResult<Vec<Vec<f32>>> {
    let cfg = model::preset(preset).map_err(err)?;
    if sample_rate != cfg.frontend.sample_rate {
        return Err(PyValueError::new_err(format!(
            "input is {sample_rate} Hz but preset expects {} Hz",
            cfg.frontend.sample_rate
        )));
    }
    let prompts = parse_prompts(prompts)?;
    let bundle = model::init_weights::<f32>(&cfg, seed).map_err(err)?;
    model::separate(&samples, &prompts, &bundle, &cfg).map_err(err)
}

/// Frame-by-frame separation through the KV-cached engine (causal presets).
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, prompts, preset = "TOY-CAUSAL", seed = 0))]
fn separate_streaming(
    samples: Vec<f32>,
    sample_rate: u32,
    prompts: Vec<String>,
    preset: &str,
    seed: u64,
) -> PyResult<Vec<Vec<f32>>> {
    let cfg = model::preset(preset).map_err(err)?;
    if sample_rate != cfg.frontend.sample_rate {
        return Err(PyValueError::new_err(format!(
            "input is {sample_rate} Hz but preset expects {} Hz",
            cfg.frontend.sample_rate
        )));
    }
    let prompts = parse_prompts(prompts)?;
    let bundle = Arc::new(model::init_weights::<f32>(&cfg, seed).map_err(err)?);
    let spec = streaming::stft_helper(&samples, &cfg).map_err(err)?;
    let mut state = streaming::stream_init(&cfg, bundle, &prompts).map_err(err)?;
    for t in 0..spec.n_frames() {
        state.step(&spec.frame_interleaved(t)).map_err(err)?;
    }
    state.finish(samples.len()).map_err(err)
}

#[pymodule]
fn fastuss_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(prompt_vocabulary, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(mask, m)?)?;
    m.add_function(wrap_pyfunction!(model_cost, m)?)?;
    m.add_function(wrap_pyfunction!(table1, m)?)?;
    m.add_function(wrap_pyfunction!(css_cost, m)?)?;
    m.add_function(wrap_pyfunction!(breakdown, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(separate, m)?)?;
    m.add_function(wrap_pyfunction!(separate_streaming, m)?)?;
    Ok(())
}
