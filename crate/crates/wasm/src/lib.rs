//! Browser bindings: density curves, EDoF measures and bandwidth rules for a pasted sample.

use kde_edof::bandwidth::{self, Rule, SelectOptions};
use kde_edof::data::io::faithful_waiting;
use kde_edof::edof::{nu_competitors, nu_hat_plugin};
use kde_edof::kernels::kde_eval;
use kde_edof::{Grid, Kernel, QuadSpec, Sample};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn sample(values: &[f64]) -> Result<Sample, JsError> {
    Sample::new(values.to_vec()).map_err(js_err)
}

/// The bundled Old Faithful waiting times.
#[wasm_bindgen]
pub fn faithful() -> Vec<f64> {
    faithful_waiting().values().to_vec()
}

/// Gaussian KDE on `points` equally spaced nodes, returned as `[y0, f0, y1, f1, ...]`.
#[wasm_bindgen]
pub fn kde_curve(values: &[f64], h: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let s = sample(values)?;
    let k = Kernel::gaussian(h).map_err(js_err)?;
    let g = Grid::linspace(s.min() - 3.0 * h, s.max() + 3.0 * h, points.max(2)).map_err(js_err)?;
    Ok(g.nodes().iter().flat_map(|&y| [y, kde_eval(&k, &s, y)]).collect())
}

/// Empirical EDoF measures of the Gaussian KDE at bandwidth `h`, as JSON.
#[wasm_bindgen]
pub fn edof(values: &[f64], h: f64) -> Result<String, JsError> {
    let s = sample(values)?;
    let k = Kernel::gaussian(h).map_err(js_err)?;
    let spec = QuadSpec::default();
    let nu_hat = nu_hat_plugin(&k, &s, &spec).map_err(js_err)?;
    let c = nu_competitors(&k, &s, &spec).map_err(js_err)?;
    Ok(json!({ "h": h, "n": s.n(), "nu_hat": nu_hat, "nu1": c.nu1, "nu2": c.nu2, "nu3": c.nu3 }).to_string())
}

/// Bandwidths from every sample-based rule, with AIC at `penalty`, as JSON.
#[wasm_bindgen]
pub fn bandwidths(values: &[f64], penalty: f64) -> Result<String, JsError> {
    let s = sample(values)?;
    let opts = SelectOptions { penalty, grid: Some(bandwidth::default_grid(&s).map_err(js_err)?), ..Default::default() };
    let mut out = serde_json::Map::new();
    for rule in [Rule::Silverman, Rule::Scott, Rule::Ucv, Rule::Bcv, Rule::RegLikCv, Rule::Amkld, Rule::Aic] {
        let r = bandwidth::select(&s, rule, &opts).map_err(js_err)?;
        out.insert(rule.to_string(), json!({ "h": r.h, "boundary": r.boundary }));
    }
    Ok(serde_json::Value::Object(out).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faithful_curve_and_rules() {
        let v = faithful();
        assert_eq!(v.len(), 272);
        let c = kde_curve(&v, 4.0, 200).unwrap();
        assert_eq!(c.len(), 400);
        let b: serde_json::Value = serde_json::from_str(&bandwidths(&v, 1.5).unwrap()).unwrap();
        assert!((b["silverman"]["h"].as_f64().unwrap() - 3.9876).abs() < 1e-3);
        let e: serde_json::Value = serde_json::from_str(&edof(&v, 3.9876).unwrap()).unwrap();
        assert!((e["nu_hat"].as_f64().unwrap() - 3.2).abs() < 0.05);
    }
}
