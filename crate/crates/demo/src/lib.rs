//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function has a plain Rust counterpart returning
//! `Result<_, String>` so the logic is testable off the browser.

use evokg::eval::{evaluate_links, evaluate_time, evaluate_time_constant_gap};
use evokg::model::{
    rayleigh_density, rayleigh_intensity, rayleigh_mean_gap, rayleigh_survival, Dims, ModelParams,
    Numerics,
};
use evokg::tkg::{simulate, EventLog};
use evokg::train::{train_global_bptt, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_ENTITIES: usize = 30;
const MAX_EVENTS: usize = 5000;

/// Samples `[t, λ, S, f]` for a bilinear score `g` at `n` points in
/// `[0, t_max]`, flattened column by column.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn curves(g: f64, t_max: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(t_max > 0.0) || !(2..=10_000).contains(&n) {
        return Err("need t_max > 0 and 2 <= n <= 10000".into());
    }
    let num = Numerics::default();
    let ts: Vec<f64> = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
    let mut out = ts.clone();
    out.extend(ts.iter().map(|&t| rayleigh_intensity(g, t, &num)));
    out.extend(ts.iter().map(|&t| rayleigh_survival(g, t, &num)));
    out.extend(ts.iter().map(|&t| rayleigh_density(g, t, &num)));
    Ok(out)
}

fn simulated_log(
    n_entities: usize,
    n_relations: usize,
    n_events: usize,
    scale: f64,
    seed: u64,
) -> Result<EventLog, String> {
    if !(2..=MAX_ENTITIES).contains(&n_entities) || n_relations == 0 || n_relations > 5 {
        return Err(format!(
            "entities must be 2..={MAX_ENTITIES}, relations 1..=5"
        ));
    }
    if n_events == 0 || n_events > MAX_EVENTS {
        return Err(format!("events must be 1..={MAX_EVENTS}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = ModelParams::random(
        Dims::new(4, 4, 2).unwrap(),
        n_entities,
        n_relations,
        scale,
        &mut rng,
    );
    simulate(&truth, n_entities, n_relations, n_events, seed).map_err(|e| e.to_string())
}

/// Simulated events as JSON `[[subject, relation, object, time], ...]`.
pub fn event_stream(
    n_entities: usize,
    n_relations: usize,
    n_events: usize,
    scale: f64,
    seed: u64,
) -> Result<String, String> {
    let log = simulated_log(n_entities, n_relations, n_events, scale, seed)?;
    let rows: Vec<_> = log
        .events()
        .iter()
        .map(|e| json!([e.subject, e.relation, e.object, e.time]))
        .collect();
    Ok(serde_json::Value::Array(rows).to_string())
}

/// Simulates, trains on the first 80% and evaluates on the rest. Returns
/// JSON with the per-window loss curve and the link and time metrics.
pub fn train_run(
    n_entities: usize,
    n_events: usize,
    windows: usize,
    seed: u64,
) -> Result<String, String> {
    if windows == 0 || windows > 5000 {
        return Err("windows must be 1..=5000".into());
    }
    let log = simulated_log(n_entities, 2, n_events, 1.0, seed)?;
    let (train, test) = log.split_at_index(n_events * 4 / 5);
    if train.len() < 2 || test.is_empty() {
        return Err("too few events to split".into());
    }
    let dims = Dims::new(4, 4, 2).unwrap();
    let config = TrainConfig {
        window_steps: 50.min(train.len()),
        max_iter: windows,
        dims,
        seed,
        ..TrainConfig::default()
    };
    let out = train_global_bptt(&train, &config).map_err(|e| e.to_string())?;
    let links = evaluate_links(&out.params, &train, &test, 1, false).map_err(|e| e.to_string())?;
    let untrained = ModelParams::init(
        dims,
        n_entities,
        2,
        config.weight_scale,
        &mut ChaCha8Rng::seed_from_u64(seed),
    );
    let before = evaluate_links(&untrained, &train, &test, 1, false).map_err(|e| e.to_string())?;
    let time = evaluate_time(&out.params, &train, &test).map_err(|e| e.to_string())?;
    let baseline = evaluate_time_constant_gap(&train, &test).map_err(|e| e.to_string())?;
    let loss: Vec<f64> = out.history.iter().map(|r| r.loss.total).collect();
    Ok(json!({
        "loss": loss,
        "train_events": train.len(),
        "test_events": test.len(),
        "mar": links.report.overall.raw.mar,
        "mar_untrained": before.report.overall.raw.mar,
        "mar_random": n_entities as f64 / 2.0,
        "hits10": links.report.overall.raw.hits_at_10,
        "mae": time.mae,
        "mae_baseline": baseline.mae,
    })
    .to_string())
}

#[wasm_bindgen(js_name = rayleighCurves)]
pub fn rayleigh_curves(g: f64, t_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    curves(g, t_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = meanGap)]
pub fn mean_gap(g: f64) -> f64 {
    rayleigh_mean_gap(g, &Numerics::default())
}

#[wasm_bindgen(js_name = simulateStream)]
pub fn simulate_stream(
    n_entities: usize,
    n_relations: usize,
    n_events: usize,
    scale: f64,
    seed: u32,
) -> Result<String, JsError> {
    event_stream(n_entities, n_relations, n_events, scale, seed as u64)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = trainAndEvaluate)]
pub fn train_and_evaluate(
    n_entities: usize,
    n_events: usize,
    windows: usize,
    seed: u32,
) -> Result<String, JsError> {
    train_run(n_entities, n_events, windows, seed as u64).map_err(|e| JsError::new(&e))
}
