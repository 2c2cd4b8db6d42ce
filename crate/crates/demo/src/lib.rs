//! Browser bindings for three interactive views: caption scoring, softmax
//! temperature and single-box diagnosis. Every export takes plain strings or
//! numbers and returns a JSON document; the functions in [`views`] carry the
//! logic, so they also run natively.

use wasm_bindgen::prelude::*;

pub mod views;

fn js_err(e: String) -> JsValue {
    JsValue::from_str(&e)
}

/// METEOR and V-METEOR of one caption. `references` holds one reference per
/// line and `classes` a TAB-separated class list.
#[wasm_bindgen(js_name = scoreCaption)]
pub fn score_caption(
    candidate: &str,
    references: &str,
    class_name: &str,
    classes: &str,
) -> Result<String, JsValue> {
    views::score_caption(candidate, references, class_name, classes).map_err(js_err)
}

/// Likelihoods, entropy and entropy gradient of comma-separated scores.
#[wasm_bindgen(js_name = temperatureView)]
pub fn temperature_view(scores: &str, tau: f64, alpha: f64) -> Result<String, JsValue> {
    views::temperature(scores, tau, alpha).map_err(js_err)
}

/// IoU, match outcome and false-positive category of one detection against
/// one ground-truth box, both `x,y,w,h`.
#[wasm_bindgen(js_name = diagnoseBox)]
pub fn diagnose_box(
    det_box: &str,
    det_class: &str,
    gt_box: &str,
    gt_class: &str,
    classes: &str,
    iou_thresh: f64,
) -> Result<String, JsValue> {
    views::diagnose_box(det_box, det_class, gt_box, gt_class, classes, iou_thresh).map_err(js_err)
}
