//! Request and response types for scenario evaluation.
//!
//! These handlers are pure: they read a [`Scenario`] and a request and
//! produce a response without mutating anything. The CLI, the HTTP service
//! and the browser demo all go through them, so every number they report is
//! the engine's own output.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    compatibility_violations, DegreeAssignment, Degrees, Evaluator, GoalGraph, GraphError, GroupViolation, Series,
    ValidationReport,
};
use crate::ingest::{bind_series_to_leaves, parse_topic_series, LeafBinding};
use crate::pattern::{
    evaluate_conflict_detailed, evaluate_conflict_series, ConflictResult, SeriesEvaluation, DEFAULT_EPSILON,
};
use crate::reflexive::{evaluate_conflict_logic, ReflexiveOutcome, ReflexiveState, VARIABLES};

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// A knowledge base plus the data that parameterizes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kb: GoalGraph,
    /// Constant leaf degrees.
    #[serde(default)]
    pub leaves: DegreeAssignment,
    /// Leaf degree series on a shared date grid.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub series: BTreeMap<String, Series>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApiError {
    #[error("no scenario loaded")]
    NoScenario,
    #[error("{0}")]
    BadRequest(String),
    #[error("invalid knowledge base: {0}")]
    Invalid(ValidationReport),
}

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Invalid(report) => ApiError::Invalid(report),
            other => ApiError::BadRequest(other.to_string()),
        }
    }
}

fn bad(e: impl ToString) -> ApiError {
    ApiError::BadRequest(e.to_string())
}

impl Scenario {
    pub fn new(kb: GoalGraph) -> Self {
        Self {
            kb,
            leaves: DegreeAssignment::new(),
            series: BTreeMap::new(),
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Checks the KB, the constant leaves, the series grid and epsilon.
    pub fn check(&self) -> Result<(), ApiError> {
        let evaluator = Evaluator::new(&self.kb)?;
        evaluator.check_assignment(&self.leaves)?;
        evaluator.propagate_series(&DegreeAssignment::new(), &self.series)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(bad(format!("epsilon must be finite and non-negative, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Swaps in a new KB, keeping the leaf data that still fits it.
    pub fn with_kb(&self, kb: GoalGraph) -> Result<Scenario, ApiError> {
        let evaluator = Evaluator::new(&kb)?;
        let leaves = self
            .leaves
            .iter()
            .filter(|(id, &v)| evaluator.check_assignment(&[((*id).clone(), v)].into()).is_ok())
            .map(|(k, &v)| (k.clone(), v))
            .collect();
        let series: BTreeMap<String, Series> = self
            .series
            .iter()
            .filter(|(id, s)| {
                evaluator
                    .propagate_series(&DegreeAssignment::new(), &[((*id).clone(), (*s).clone())].into())
                    .is_ok()
            })
            .map(|(k, s)| (k.clone(), s.clone()))
            .collect();
        Ok(Scenario {
            kb,
            leaves,
            series,
            epsilon: self.epsilon,
        })
    }

    /// Leaf values of every series at `date`.
    fn series_at(&self, date: NaiveDate) -> Result<DegreeAssignment, ApiError> {
        let mut out = DegreeAssignment::new();
        for (leaf, series) in &self.series {
            let point = series
                .iter()
                .find(|p| p.0 == date)
                .ok_or_else(|| bad(format!("no sample for `{leaf}` at {date}")))?;
            out.insert(leaf.clone(), point.1);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    /// Reflexive formulas over the 13 variables.
    Logic,
    /// Degree propagation through the scenario KB.
    #[default]
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationRequest {
    #[serde(default)]
    pub semantics: Semantics,
    /// Variable or leaf values, overriding the scenario's.
    #[serde(default, alias = "state", alias = "leaves")]
    pub values: BTreeMap<String, f64>,
    /// Take series-bound leaves at this date.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResponse {
    pub semantics: Semantics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflexive: Option<ReflexiveOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflict: Option<ConflictResult>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub degrees: Degrees,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compatibility_violations: Vec<GroupViolation>,
}

impl EvaluationResponse {
    pub fn g_degree(&self) -> Option<f64> {
        self.conflict.map(|c| c.g_degree)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    #[serde(default)]
    pub baseline: EvaluationRequest,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub baseline: EvaluationResponse,
    pub adjusted: EvaluationResponse,
    /// `adjusted.g − baseline.g`; absent for logic semantics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_g: Option<f64>,
}

fn reflexive_state(values: &BTreeMap<String, f64>) -> Result<ReflexiveState, ApiError> {
    ReflexiveState::from_map(values.iter().map(|(k, &v)| (k.as_str(), v))).map_err(bad)
}

fn check_keys(scenario: Option<&Scenario>, semantics: Semantics, keys: &mut dyn Iterator<Item = &String>) -> Result<(), ApiError> {
    for key in keys {
        let known = match semantics {
            Semantics::Logic => VARIABLES.contains(&key.as_str()),
            Semantics::Weighted => scenario
                .and_then(|s| s.kb.node(key))
                .is_some_and(|n| n.kind == crate::graph::NodeKind::Leaf),
        };
        if !known {
            return Err(bad(format!("unknown {} `{key}`", match semantics {
                Semantics::Logic => "variable",
                Semantics::Weighted => "leaf",
            })));
        }
    }
    Ok(())
}

/// Evaluates one request against the scenario. Logic requests do not need a
/// scenario; when one is loaded its values for the 13 variables are used as
/// defaults.
pub fn handle_evaluate(scenario: Option<&Scenario>, req: &EvaluationRequest) -> Result<EvaluationResponse, ApiError> {
    if let Some(eps) = req.epsilon {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(bad(format!("epsilon must be finite and non-negative, got {eps}")));
        }
    }
    check_keys(scenario, req.semantics, &mut req.values.keys())?;

    let mut values = DegreeAssignment::new();
    if let Some(s) = scenario {
        values.extend(s.leaves.iter().map(|(k, &v)| (k.clone(), v)));
        if let Some(t) = req.timestamp {
            values.extend(s.series_at(t)?);
        }
    } else if req.timestamp.is_some() {
        return Err(ApiError::NoScenario);
    }
    values.extend(req.values.iter().map(|(k, &v)| (k.clone(), v)));

    match req.semantics {
        Semantics::Logic => {
            values.retain(|k, _| VARIABLES.contains(&k.as_str()));
            let state = reflexive_state(&values)?;
            Ok(EvaluationResponse {
                semantics: Semantics::Logic,
                timestamp: req.timestamp,
                reflexive: Some(evaluate_conflict_logic(&state)),
                conflict: None,
                degrees: Degrees::new(),
                compatibility_violations: Vec::new(),
            })
        }
        Semantics::Weighted => {
            let s = scenario.ok_or(ApiError::NoScenario)?;
            let epsilon = req.epsilon.unwrap_or(s.epsilon);
            let eval = evaluate_conflict_detailed(&s.kb, &values, epsilon).map_err(|e| match e {
                crate::pattern::PatternError::Graph(g) => ApiError::from(g),
                other => bad(other),
            })?;
            // the reflexive readout applies when the KB carries all 13 variables
            let reflexive = VARIABLES
                .iter()
                .all(|v| s.kb.node(v).is_some())
                .then(|| {
                    let vars: BTreeMap<String, f64> = VARIABLES
                        .iter()
                        .map(|v| (v.to_string(), values.get(*v).copied().unwrap_or(0.0)))
                        .collect();
                    reflexive_state(&vars).ok().map(|st| evaluate_conflict_logic(&st))
                })
                .flatten();
            Ok(EvaluationResponse {
                semantics: Semantics::Weighted,
                timestamp: req.timestamp,
                reflexive,
                conflict: Some(eval.result),
                compatibility_violations: compatibility_violations(&s.kb, &eval.degrees),
                degrees: eval.degrees,
            })
        }
    }
}

/// Evaluates the baseline and the baseline with `overrides` applied.
pub fn handle_whatif(scenario: Option<&Scenario>, req: &WhatIfRequest) -> Result<WhatIfResponse, ApiError> {
    check_keys(scenario, req.baseline.semantics, &mut req.overrides.keys())?;
    let baseline = handle_evaluate(scenario, &req.baseline)?;
    let mut adjusted_req = req.baseline.clone();
    adjusted_req
        .values
        .extend(req.overrides.iter().map(|(k, &v)| (k.clone(), v)));
    let adjusted = handle_evaluate(scenario, &adjusted_req)?;
    let delta_g = match (adjusted.g_degree(), baseline.g_degree()) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    Ok(WhatIfResponse {
        baseline,
        adjusted,
        delta_g,
    })
}

/// `G(t)` and per-node degree series for the scenario's bound series.
pub fn handle_evaluate_series(scenario: Option<&Scenario>) -> Result<SeriesEvaluation, ApiError> {
    let s = scenario.ok_or(ApiError::NoScenario)?;
    evaluate_conflict_series(&s.kb, &s.leaves, &s.series, s.epsilon).map_err(|e| match e {
        crate::pattern::PatternError::Graph(g) => ApiError::from(g),
        other => bad(other),
    })
}

/// Series data accepted by the service: either already bound to leaves, or
/// raw CSV plus bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesUpload {
    Bound { series: BTreeMap<String, Series> },
    Raw { csv: String, bindings: Vec<LeafBinding> },
}

/// Returns a copy of the scenario with its series replaced by the upload.
pub fn apply_series_upload(scenario: &Scenario, upload: &SeriesUpload) -> Result<Scenario, ApiError> {
    let series = match upload {
        SeriesUpload::Bound { series } => series.clone(),
        SeriesUpload::Raw { csv, bindings } => {
            let topics = parse_topic_series(csv).map_err(bad)?;
            bind_series_to_leaves(&scenario.kb, bindings, &topics).map_err(bad)?
        }
    };
    let next = Scenario {
        series,
        ..scenario.clone()
    };
    next.check()?;
    Ok(next)
}
