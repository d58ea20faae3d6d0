//! Bindings behind `www/index.html`: the stencil, smoothing of a painted 2D
//! grid, and a reliability diagram for the miscalibrated phantom.

use svls_core::phantom::{generate_labels, generate_miscalibrated, MiscalibrationParams, PhantomKind, PhantomSpec};
use svls_core::report::Report;
use svls_core::{calibrate_report, svls_weights, CalibrationOptions, Geometry, LabelVolume, SmoothingSpec};
use wasm_bindgen::prelude::*;

fn js_err(e: svls_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Row-major taps of the rank-2 or rank-3 stencil.
#[wasm_bindgen]
pub fn kernel_taps(rank: usize, sigma: f64) -> Result<Vec<f64>, JsError> {
    Ok(svls_weights(rank, sigma).map_err(js_err)?.taps().to_vec())
}

/// Soft labels for a `rows x cols` label grid, class-major.
///
/// `method` is one of `onehot`, `ls` or `svls`; `alpha` is read for `ls`
/// only and `sigma` for `svls` only.
#[wasm_bindgen]
pub fn smooth_grid(
    labels: &[u8],
    rows: usize,
    cols: usize,
    classes: usize,
    method: &str,
    alpha: f64,
    sigma: f64,
) -> Result<Vec<f32>, JsError> {
    let method = method.parse().map_err(js_err)?;
    let spec = match method {
        svls_core::SmoothingMethod::Ls => SmoothingSpec::new(method, Some(alpha), None),
        svls_core::SmoothingMethod::Svls => SmoothingSpec::new(method, None, Some(sigma)),
        _ => SmoothingSpec::new(method, None, None),
    }
    .map_err(js_err)?;
    let geometry = Geometry::isotropic(&[rows, cols]).map_err(js_err)?;
    let volume = LabelVolume::new(geometry, classes, labels.to_vec()).map_err(js_err)?;
    Ok(spec.encode(&volume).map_err(js_err)?.data().to_vec())
}

/// Calibration report, as JSON, of an over-confident prediction on a
/// two-class 32x32 phantom.
#[wasm_bindgen]
pub fn reliability_json(strength: f64, accuracy: f64, bins: usize, seed: u64) -> Result<String, JsError> {
    let labels = generate_labels(&PhantomSpec::new(PhantomKind::MiscalibratedPred, &[32, 32], 2)).map_err(js_err)?;
    let pred = generate_miscalibrated(&labels, &MiscalibrationParams { accuracy, strength, confidence: None, seed })
        .map_err(js_err)?;
    let options = CalibrationOptions { num_bins: bins, ..Default::default() };
    Ok(calibrate_report(&labels, &pred, &options).map_err(js_err)?.to_json())
}
