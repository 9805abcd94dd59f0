//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export returns a JSON string; the `*_json` functions hold the logic
//! and run natively too.

use apfix_core::calibration::{
    apply_calibration, fit_per_class, label_for_calibration, mean_per_class_ece, CalibrationMethod, FitOptions,
};
use apfix_core::metrics::{evaluate, evaluate_pooled, GroupBreakdown};
use apfix_core::synth;
use apfix_core::toy;
use apfix_core::{EvalConfig, Interpolation, RankingPolicy};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const ECE_BINS: usize = 15;
const CURVE_POINTS: usize = 51;

fn limit(v: u32) -> Option<usize> {
    (v > 0).then_some(v as usize)
}

fn js(result: Result<String, String>) -> Result<String, JsValue> {
    result.map_err(|e| JsValue::from_str(&e))
}

/// Both toy scenarios under a policy; `0` disables a limit.
pub fn toy_policy_json(dets_per_image: u32, dets_per_class: u32, exact: bool) -> Result<String, String> {
    let policy = RankingPolicy::new(limit(dets_per_image), limit(dets_per_class));
    let interp = if exact {
        Interpolation::Exact
    } else {
        Interpolation::Sampled(101)
    };
    let out = toy::evaluate_policy_with(policy, interp).map_err(|e| e.to_string())?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct PolicyRow {
    dets_per_image: Option<usize>,
    dets_per_class: Option<usize>,
    ap: Option<f64>,
    groups: GroupBreakdown,
    kept: usize,
}

#[derive(Serialize)]
struct GameView {
    baseline: PolicyRow,
    gamed: PolicyRow,
    delta: Option<f64>,
}

/// Macro AP on the bundled gameable corpus under an image cap alone and
/// under the same cap after a per-class cut.
pub fn gameability_json(dets_per_image: u32, dets_per_class: u32) -> Result<String, String> {
    let (ds, dets) = synth::gameable_corpus();
    let row = |policy: RankingPolicy| -> Result<PolicyRow, String> {
        let mut cfg = EvalConfig::ap_fixed();
        cfg.ranking_policy = policy;
        let r = evaluate(&ds, &dets, &cfg).map_err(|e| e.to_string())?;
        Ok(PolicyRow {
            dets_per_image: policy.max_dets_per_image,
            dets_per_class: policy.max_dets_per_class,
            ap: r.ap,
            groups: r.groups,
            kept: r.counts.detections_kept,
        })
    };
    let baseline = row(RankingPolicy::new(limit(dets_per_image), None))?;
    let gamed = row(RankingPolicy::new(limit(dets_per_image), limit(dets_per_class)))?;
    let delta = gamed.ap.zip(baseline.ap).map(|(g, b)| g - b);
    serde_json::to_string(&GameView { baseline, gamed, delta }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CategoryCurve {
    category_id: u64,
    name: String,
    points: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct CalibrationView {
    method: String,
    pooled_ap_before: Option<f64>,
    pooled_ap_after: Option<f64>,
    ece_before: Option<f64>,
    ece_after: Option<f64>,
    curves: Vec<CategoryCurve>,
}

/// Fits per-class calibrators on one split of the two-class shifted-scale
/// corpus and reports pooled AP, ECE and the fitted maps on another.
pub fn calibration_json(method: &str, detections_per_category: u32) -> Result<String, String> {
    let method: CalibrationMethod = method.parse().map_err(|e: apfix_core::Error| e.to_string())?;
    let n = (detections_per_category as usize).clamp(20, 20_000);
    let (fit_ds, fit_dets) = synth::shifted_scale_corpus(1, n);
    let (ds, dets) = synth::shifted_scale_corpus(2, n);
    let model = fit_per_class(&fit_ds, &fit_dets, method, &FitOptions::default());
    let (calibrated, _) = apply_calibration(&dets, &model);
    let cfg = EvalConfig::ap_pool();
    let pooled = |d| evaluate_pooled(&ds, d, &cfg).map(|p| p.ap).map_err(|e| e.to_string());
    let ece = |d| mean_per_class_ece(&label_for_calibration(&ds, d), ECE_BINS);
    let curves = ds
        .categories()
        .iter()
        .filter_map(|c| {
            let cal = model.calibrator(c.id)?;
            let points = (0..CURVE_POINTS)
                .map(|k| {
                    let s = k as f64 / (CURVE_POINTS - 1) as f64;
                    [s, cal.apply(s)]
                })
                .collect();
            Some(CategoryCurve {
                category_id: c.id,
                name: c.name.clone(),
                points,
            })
        })
        .collect();
    let view = CalibrationView {
        method: method.name().to_string(),
        pooled_ap_before: pooled(&dets)?,
        pooled_ap_after: pooled(&calibrated)?,
        ece_before: ece(&dets),
        ece_after: ece(&calibrated),
        curves,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn toy_policy(dets_per_image: u32, dets_per_class: u32, exact: bool) -> Result<String, JsValue> {
    js(toy_policy_json(dets_per_image, dets_per_class, exact))
}

#[wasm_bindgen]
pub fn gameability(dets_per_image: u32, dets_per_class: u32) -> Result<String, JsValue> {
    js(gameability_json(dets_per_image, dets_per_class))
}

#[wasm_bindgen]
pub fn calibration(method: &str, detections_per_category: u32) -> Result<String, JsValue> {
    js(calibration_json(method, detections_per_category))
}
