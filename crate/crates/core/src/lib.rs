//! Reflexive two-subject conflict modeling for decision support knowledge
//! bases.
//!
//! - [`reflexive`]: choice readiness and self-esteem formulas over graded truth.
//! - [`graph`]: signed weighted goal hierarchies and degree propagation.
//! - [`pattern`]: the two-subject conflict pattern and the winner rule.
//! - [`ingest`]: topic-stream CSV, normalization, leaf bindings, expert weights.
//! - [`api`]: scenario evaluation and what-if requests shared by the CLI,
//!   the HTTP service and the browser demo.

pub mod api;
pub mod grade;
pub mod graph;
pub mod ingest;
pub mod pattern;
pub mod reflexive;

pub use grade::{implies, Grade, GradeError};
pub use graph::{
    propagate, propagate_series, validate, CompatibilityGroup, DegreeAssignment, Degrees, Evaluator,
    Finding, GoalGraph, GoalNode, GraphError, InfluenceEdge, NodeKind, NodeRole, Series, ValidationReport,
};
pub use pattern::{
    build_pattern, decide_outcome, evaluate_conflict, extend_pattern, ConflictResult, PatternError,
    SubjectSpec, Winner, DEFAULT_EPSILON,
};
pub use reflexive::{
    enumerate_truth_table, evaluate_conflict_dnf, evaluate_conflict_logic, evaluate_solo, ReflexiveOutcome,
    ReflexiveState, Side, SoloState,
};
