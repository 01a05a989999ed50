//! Browser bindings: each export takes a probabilised tree as JSON and returns a JSON string.

use serde_json::{json, Value};
use vlmc::sim::{simulate_cylinder_freqs, tv_distance, InitialState, SimConfig};
use vlmc::stationary::{stationary, StationaryConfig};
use vlmc::{ProbabilisedTree, Word};
use wasm_bindgen::prelude::*;

/// Largest cylinder depth and step count accepted from the page.
const MAX_DEPTH: usize = 8;
const MAX_STEPS: u64 = 2_000_000;

fn parse(spec: &str) -> Result<ProbabilisedTree, String> {
    vlmc::io::from_json_str(spec).map_err(|e| e.to_string())
}

fn to_string(v: Value) -> String {
    v.to_string()
}

/// Verdict, alpha-LIS matrix and fixed vector.
pub fn analyze_json(spec: &str) -> Result<String, String> {
    let pt = parse(spec)?;
    let a = stationary(&pt, StationaryConfig::default()).map_err(|e| e.to_string())?;
    let q = a.q.as_ref().map(|q| {
        json!({
            "index": q.index.iter().map(Word::to_string).collect::<Vec<_>>(),
            "entries": q.entries,
            "truncation": q.truncation.as_ref().map(|t| t.note.clone()),
        })
    });
    let v = a.fixed_vector.as_ref().map(|f| {
        json!({
            "index": f.index.iter().map(Word::to_string).collect::<Vec<_>>(),
            "values": f.values,
            "normalized": f.normalized,
        })
    });
    Ok(to_string(json!({
        "verdict": serde_json::to_value(&a.verdict).map_err(|e| e.to_string())?,
        "q": q,
        "fixed_vector": v,
        "non_null": pt.is_non_null(),
    })))
}

fn check_depth(depth: usize) -> Result<(), String> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(format!("depth must be between 1 and {MAX_DEPTH}"));
    }
    Ok(())
}

/// Stationary measure of every cylinder of length `depth`, with error bars.
pub fn cylinders_json(spec: &str, depth: usize) -> Result<String, String> {
    check_depth(depth)?;
    let pt = parse(spec)?;
    let a = stationary(&pt, StationaryConfig::default()).map_err(|e| e.to_string())?;
    let m = a.measure.ok_or_else(|| "no unique stationary measure for this tree".to_string())?;
    let mut rows = Vec::new();
    for w in pt.tree().alphabet().words_of_len(depth) {
        let c = m.eval(&w).map_err(|e| e.to_string())?;
        rows.push(json!({ "word": w.to_string(), "value": c.value, "error_bar": c.error_bar }));
    }
    Ok(to_string(json!({ "depth": depth, "rows": rows })))
}

/// Empirical cylinder frequencies of a simulated trajectory next to the exact measure.
pub fn simulate_json(spec: &str, steps: u64, depth: usize, seed: u64) -> Result<String, String> {
    check_depth(depth)?;
    if steps == 0 || steps > MAX_STEPS {
        return Err(format!("steps must be between 1 and {MAX_STEPS}"));
    }
    let pt = parse(spec)?;
    let freqs = simulate_cylinder_freqs(&pt, &InitialState::RandomContext, steps, depth, seed, SimConfig::default())
        .map_err(|e| e.to_string())?;
    let measure = stationary(&pt, StationaryConfig::default()).ok().and_then(|a| a.measure);
    let exact = match &measure {
        Some(m) => Some(
            freqs
                .keys()
                .map(|w| m.value(w).map(|v| (w.clone(), v)))
                .collect::<Result<std::collections::BTreeMap<_, _>, _>>()
                .map_err(|e| e.to_string())?,
        ),
        None => None,
    };
    let rows: Vec<Value> = freqs
        .iter()
        .map(|(w, f)| json!({ "word": w.to_string(), "frequency": f, "exact": exact.as_ref().map(|e| e[w]) }))
        .collect();
    Ok(to_string(json!({
        "steps": steps,
        "seed": seed,
        "rows": rows,
        "tv": exact.as_ref().map(|e| tv_distance(&freqs, e)),
    })))
}

#[wasm_bindgen]
pub fn analyze(spec: &str) -> Result<String, JsValue> {
    analyze_json(spec).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn cylinders(spec: &str, depth: usize) -> Result<String, JsValue> {
    cylinders_json(spec, depth).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate(spec: &str, steps: u32, depth: usize, seed: u32) -> Result<String, JsValue> {
    simulate_json(spec, steps as u64, depth, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR: &str = r#"{"alphabet": 2, "kind": "explicit", "contexts": ["1", "00", "010", "011"]}"#;
    const CHERRY: &str = r#"{"alphabet": 2, "kind": "zoo", "zoo_name": "lc_of_rc_cherry"}"#;

    #[test]
    fn analyze_reports_verdict_and_matrix() {
        let v: Value = serde_json::from_str(&analyze_json(CHERRY).unwrap()).unwrap();
        assert_eq!(v["verdict"]["outcome"], "unique_stationary");
        assert_eq!(v["q"]["index"], json!(["010", "100", "101", "110"]));
        assert!(analyze_json("{").is_err());
    }

    #[test]
    fn cylinders_sum_to_one() {
        let v: Value = serde_json::from_str(&cylinders_json(FOUR, 3).unwrap()).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 8);
        let total: f64 = rows.iter().map(|r| r["value"].as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(cylinders_json(FOUR, 0).is_err());
    }

    #[test]
    fn simulation_is_close_to_the_measure() {
        let v: Value = serde_json::from_str(&simulate_json(CHERRY, 200_000, 3, 7).unwrap()).unwrap();
        assert!(v["tv"].as_f64().unwrap() < 0.03);
        assert_eq!(simulate_json(CHERRY, 200_000, 3, 7).unwrap(), simulate_json(CHERRY, 200_000, 3, 7).unwrap());
        assert!(simulate_json(CHERRY, 0, 3, 7).is_err());
    }
}
