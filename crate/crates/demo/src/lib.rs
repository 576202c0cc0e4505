//! Browser demo: generate a synthetic matrix, inspect its features and
//! sparsity, route it with a rule set and look at the thread partition.
//!
//! Every export returns a JSON string so the page needs no bindings beyond
//! plain strings. Timing is not available in the browser, so the demo never
//! measures kernels.

use serde_json::{json, Value};
use spmv_tune::autotuner::{predict_staged, DEFAULT_CONFIDENCE_THRESHOLD};
use spmv_tune::features::{extract_all, DegreeDistribution, FeatureConfig, FeatureExtractor};
use spmv_tune::io::{generate_synthetic, SyntheticSpec};
use spmv_tune::kernels::partition_rows_by_nnz;
use spmv_tune::mining::RuleSet;
use spmv_tune::CsrMatrix;
use wasm_bindgen::prelude::*;

/// Largest matrix the page will build, to keep the tab responsive.
const MAX_ROWS: usize = 200_000;

fn build(spec: &str) -> Result<(SyntheticSpec, CsrMatrix<f64>), String> {
    let spec: SyntheticSpec = spec.parse().map_err(|e| format!("{e}"))?;
    let a: CsrMatrix<f64> = generate_synthetic(&spec).map_err(|e| format!("{e}"))?;
    if a.nrows() > MAX_ROWS {
        return Err(format!("at most {MAX_ROWS} rows in the browser"));
    }
    Ok((spec, a))
}

/// Nonzero counts on a `cells x cells` grid over the matrix.
fn sparsity_grid(a: &CsrMatrix<f64>, cells: usize) -> Vec<Vec<usize>> {
    let rows = cells.min(a.nrows()).max(1);
    let cols = cells.min(a.ncols()).max(1);
    let mut grid = vec![vec![0usize; cols]; rows];
    for i in 0..a.nrows() {
        let gi = i * rows / a.nrows();
        for &j in a.row_cols(i) {
            grid[gi][j * cols / a.ncols()] += 1;
        }
    }
    grid
}

fn inspect_json(spec: &str, cells: usize) -> Result<Value, String> {
    let (spec, a) = build(spec)?;
    let fv = extract_all(&a, FeatureConfig::default());
    let degrees = DegreeDistribution::from_degrees((0..a.nrows()).map(|i| a.row_cols(i).len()));
    Ok(json!({
        "spec": spec.to_string(),
        "features": fv,
        "grid": sparsity_grid(&a, cells),
        "degrees": degrees.points(),
        "exponent": degrees.fit_exponent(),
    }))
}

fn route_json(spec: &str, rules: &str) -> Result<Value, String> {
    let (_, a) = build(spec)?;
    let rules = if rules.trim().is_empty() {
        RuleSet::observation_rules()
    } else {
        RuleSet::parse(rules).map_err(|e| format!("{e}"))?
    };
    let threshold = rules.confidence_threshold().unwrap_or(DEFAULT_CONFIDENCE_THRESHOLD);
    let mut ex = FeatureExtractor::new(&a, FeatureConfig::default());
    let prediction = predict_staged(&mut ex, &rules, threshold);
    let counts = ex.counts();
    let fv = ex.full();
    let matched: Vec<String> = rules
        .rules
        .iter()
        .filter(|r| r.matches(&fv))
        .map(|r| r.to_string())
        .collect();
    let format = prediction.map_or_else(|| rules.default_format(), |p| p.format);
    Ok(json!({
        "format": format.as_str(),
        "confident": prediction.is_some(),
        "confidence": prediction.map(|p| p.confidence),
        "threshold": threshold,
        "stages": { "dia": counts.dia, "ell": counts.ell, "powerlaw": counts.powerlaw },
        "matched": matched,
    }))
}

fn partition_json(spec: &str, threads: usize) -> Result<Value, String> {
    let (_, a) = build(spec)?;
    let p = partition_rows_by_nnz(a.row_ptr(), threads.max(1));
    Ok(json!({
        "boundaries": p.boundaries(),
        "nnz": p.segment_nnz(a.row_ptr()),
        "imbalance": p.imbalance(a.row_ptr()),
        "max_rd": a.max_row_degree(),
    }))
}

fn respond(result: Result<Value, String>) -> Result<String, JsValue> {
    result.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Features, a sparsity grid and the row degree distribution.
#[wasm_bindgen]
pub fn inspect(spec: &str, cells: usize) -> Result<String, JsValue> {
    respond(inspect_json(spec, cells))
}

/// Staged routing. An empty `rules` text uses the built-in observation rules.
#[wasm_bindgen]
pub fn route(spec: &str, rules: &str) -> Result<String, JsValue> {
    respond(route_json(spec, rules))
}

/// Nnz-balanced row partition for `threads` workers.
#[wasm_bindgen]
pub fn partition(spec: &str, threads: usize) -> Result<String, JsValue> {
    respond(partition_json(spec, threads))
}

/// The built-in rule set as text, to prefill the editor.
#[wasm_bindgen]
pub fn default_rules() -> String {
    RuleSet::observation_rules().to_text()
}
