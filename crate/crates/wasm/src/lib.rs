//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Every export takes and returns JSON strings. The `*_json` functions hold
//! the logic so they can be tested natively.

use std::collections::BTreeMap;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use reflexive_conflict::pattern::{evaluate_conflict_detailed, ConflictEvaluation};
use reflexive_conflict::reflexive::TruthTableRow;
use reflexive_conflict::{
    build_pattern, enumerate_truth_table, evaluate_conflict_logic, DegreeAssignment, ReflexiveOutcome,
    ReflexiveState, Side, SubjectSpec, DEFAULT_EPSILON,
};

#[derive(Debug, Serialize)]
struct Evaluation {
    reflexive: ReflexiveOutcome,
    #[serde(flatten)]
    weighted: ConflictEvaluation,
}

fn parse_values(values: &str) -> Result<BTreeMap<String, f64>, String> {
    serde_json::from_str(values).map_err(|e| format!("values: {e}"))
}

/// Evaluates one slider state both ways: the fuzzy-logic readout and the
/// weighted goal pattern for subjects named `a` and `b`.
pub fn evaluate_json(a: &str, b: &str, values: &str) -> Result<String, String> {
    let values = parse_values(values)?;
    let state = ReflexiveState::from_map(values.iter().map(|(k, v)| (k.as_str(), *v))).map_err(|e| e.to_string())?;
    let spec = |name: &str| SubjectSpec::new(name).map_err(|e| e.to_string());
    let kb = build_pattern(&spec(a)?, &spec(b)?).map_err(|e| e.to_string())?;
    let leaves: DegreeAssignment = values;
    let weighted = evaluate_conflict_detailed(&kb, &leaves, DEFAULT_EPSILON).map_err(|e| e.to_string())?;
    let out = Evaluation {
        reflexive: evaluate_conflict_logic(&state),
        weighted,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn truth_table_json(side: &str) -> Result<String, String> {
    let side: Side = side.parse().map_err(|e| format!("{e}"))?;
    let rows: Vec<TruthTableRow> = enumerate_truth_table(side);
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

/// Knowledge-base document of the goal pattern.
pub fn pattern_json(a: &str, b: &str) -> Result<String, String> {
    let spec = |name: &str| SubjectSpec::new(name).map_err(|e| e.to_string());
    Ok(build_pattern(&spec(a)?, &spec(b)?).map_err(|e| e.to_string())?.to_document())
}

#[wasm_bindgen]
pub fn evaluate(a: &str, b: &str, values: &str) -> Result<String, JsError> {
    evaluate_json(a, b, values).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = truthTable)]
pub fn truth_table(side: &str) -> Result<String, JsError> {
    truth_table_json(side).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn pattern(a: &str, b: &str) -> Result<String, JsError> {
    pattern_json(a, b).map_err(|e| JsError::new(&e))
}
