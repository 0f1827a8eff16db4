//! `wasm-bindgen` entry points for the static demo page in `www/`.
//!
//! Every function takes the same JSON configuration the command-line runner
//! reads and returns either a JSON report or an SVG document.

use qgcc_core::runner::{fixtures, parse_config, run_analyze, run_sweep, run_synthesize, RunConfig};
use wasm_bindgen::prelude::*;

fn config(text: &str) -> Result<RunConfig, String> {
    parse_config(text, "config").map_err(|e| e.to_string())
}

/// The bundled single-mode example.
#[wasm_bindgen(js_name = exampleConfig)]
pub fn example_config() -> String {
    fixtures::EXAMPLE.to_string()
}

/// The bundled coupling sweep.
#[wasm_bindgen(js_name = sweepConfig)]
pub fn sweep_config() -> String {
    fixtures::KAPPA_SWEEP.to_string()
}

pub fn analyze_json(text: &str) -> Result<String, String> {
    Ok(run_analyze(&config(text)?).to_json())
}

pub fn synthesize_json(text: &str) -> Result<String, String> {
    Ok(run_synthesize(&config(text)?).to_json())
}

/// SVG of the sweep, with the oracle sample count capped at `max_samples`
/// to keep the page responsive.
pub fn sweep_svg_string(text: &str, log_y: bool, max_samples: usize) -> Result<String, String> {
    let mut cfg = config(text)?;
    cfg.oracle.samples = cfg.oracle.samples.min(max_samples.max(1));
    let report = run_sweep(&cfg).map_err(|e| e.to_string())?;
    Ok(report.svg(log_y || cfg.outputs.log_y))
}

#[wasm_bindgen]
pub fn analyze(config: &str) -> Result<String, JsError> {
    analyze_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn synthesize(config: &str) -> Result<String, JsError> {
    synthesize_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sweepSvg)]
pub fn sweep_svg(config: &str, log_y: bool, max_samples: usize) -> Result<String, JsError> {
    sweep_svg_string(config, log_y, max_samples).map_err(|e| JsError::new(&e))
}
