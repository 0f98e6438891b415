//! The two-subject conflict design pattern.
//!
//! The main goal `G` is pushed up by subject A's goal and down by subject
//! B's. Each subject goal is supported by the shared environment `a1` and
//! opposed by the subject's self-esteem, and each self-esteem node collects
//! its six reflexive variables: the two expected influences positively and
//! the four intention images negatively.
//!
//! ```text
//!                        G
//!               (+1) /       \ (-1)
//!               GoalA         GoalB
//!          (+1) /   \ (-1) (-1) /   \ (+1)
//!             a1     A1       B1     a1
//!                    |        |
//!       +a2 +b2 -a3 -b3    +c2 +d2 -c3 -d3
//!               -a4 -b4            -c4 -d4
//! ```
//!
//! A positive degree of `G` means subject A wins, negative means B wins.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    validate, DegreeAssignment, Degrees, Evaluator, Finding, GoalGraph, GoalNode, GraphError, InfluenceEdge,
    NodeKind, NodeRole, Series, ValidationReport,
};

/// Half-width of the draw band around zero.
pub const DEFAULT_EPSILON: f64 = 1e-9;

pub const MAIN_GOAL: &str = "G";
pub const GOAL_A: &str = "GoalA";
pub const GOAL_B: &str = "GoalB";
pub const SELF_ESTEEM_A: &str = "A1";
pub const SELF_ESTEEM_B: &str = "B1";
pub const ENVIRONMENT: &str = "a1";

/// Leaf pairs exchanged when the two subjects swap places.
pub const MIRROR_PAIRS: [(&str, &str); 6] = [
    ("a2", "c2"),
    ("b2", "d2"),
    ("a3", "c3"),
    ("b3", "d3"),
    ("a4", "c4"),
    ("b4", "d4"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectSpec {
    pub name: String,
}

impl SubjectSpec {
    pub fn new(name: impl Into<String>) -> Result<Self, PatternError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(PatternError::EmptySubjectName);
        }
        Ok(Self { name })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Winner {
    SubjectA,
    SubjectB,
    Draw,
}

impl Winner {
    pub fn mirrored(self) -> Winner {
        match self {
            Winner::SubjectA => Winner::SubjectB,
            Winner::SubjectB => Winner::SubjectA,
            Winner::Draw => Winner::Draw,
        }
    }
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Winner::SubjectA => "SubjectA",
            Winner::SubjectB => "SubjectB",
            Winner::Draw => "Draw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictResult {
    pub g_degree: f64,
    pub goal_a_degree: f64,
    pub goal_b_degree: f64,
    pub self_esteem_a_degree: f64,
    pub self_esteem_b_degree: f64,
    pub winner: Winner,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("subject name must not be empty")]
    EmptySubjectName,
    #[error("both subjects are named `{0}`")]
    IdenticalSubjects(String),
    #[error("knowledge base lacks pattern role: {0}")]
    MissingRole(String),
    #[error("node id `{0}` already exists")]
    DuplicateId(String),
    #[error("addition creates a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("edge {child} -> {parent} touches the pattern core")]
    TouchesPatternCore { child: String, parent: String },
    #[error("extended knowledge base is invalid: {0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Sign rule with a draw band: `g > ε` → A, `g < −ε` → B, otherwise draw.
pub fn decide_outcome(g: f64, epsilon: f64) -> Winner {
    if g > epsilon {
        Winner::SubjectA
    } else if g < -epsilon {
        Winner::SubjectB
    } else {
        Winner::Draw
    }
}

fn leaf(id: &str, label: String) -> GoalNode {
    GoalNode::new(id, label, NodeKind::Leaf, Some(NodeRole::ReflexiveLeaf))
}

fn internal(id: &str, label: String, role: NodeRole) -> GoalNode {
    GoalNode::new(id, label, NodeKind::Internal, Some(role))
}

/// Builds the conflict pattern for subjects `a` and `b` with unit weights.
pub fn build_pattern(a: &SubjectSpec, b: &SubjectSpec) -> Result<GoalGraph, PatternError> {
    for s in [a, b] {
        if s.name.trim().is_empty() {
            return Err(PatternError::EmptySubjectName);
        }
    }
    if a.name == b.name {
        return Err(PatternError::IdenticalSubjects(a.name.clone()));
    }
    let (na, nb) = (a.name.as_str(), b.name.as_str());

    let nodes = vec![
        internal(MAIN_GOAL, format!("Main goal: {na} vs {nb}"), NodeRole::Main),
        internal(GOAL_A, format!("Goal of {na}"), NodeRole::SubjectGoal),
        internal(GOAL_B, format!("Goal of {nb}"), NodeRole::SubjectGoal),
        internal(SELF_ESTEEM_A, format!("Self-esteem of {na}"), NodeRole::SelfEsteem),
        internal(SELF_ESTEEM_B, format!("Self-esteem of {nb}"), NodeRole::SelfEsteem),
        leaf(ENVIRONMENT, "Influence of the environment on both subjects".to_string()),
        leaf("a2", format!("Influence of the environment expected by {na}")),
        leaf("b2", format!("Influence of the environment expected by {nb}, as seen by {na}")),
        leaf("a3", format!("Intentions of {na}")),
        leaf("b3", format!("Intentions of {nb}, as seen by {na}")),
        leaf("a4", format!("{na}'s impression of how {nb} imagines {na}'s intentions")),
        leaf("b4", format!("{na}'s impression of how {nb} imagines its own intentions")),
        leaf("c2", format!("Influence of the environment expected by {nb}")),
        leaf("d2", format!("Influence of the environment expected by {na}, as seen by {nb}")),
        leaf("c3", format!("Intentions of {nb}")),
        leaf("d3", format!("Intentions of {na}, as seen by {nb}")),
        leaf("c4", format!("{nb}'s impression of how {na} imagines {nb}'s intentions")),
        leaf("d4", format!("{nb}'s impression of how {na} imagines its own intentions")),
    ];

    let mut edges = vec![
        InfluenceEdge::new(GOAL_A, MAIN_GOAL, 1.0),
        InfluenceEdge::new(GOAL_B, MAIN_GOAL, -1.0),
        InfluenceEdge::new(ENVIRONMENT, GOAL_A, 1.0),
        InfluenceEdge::new(SELF_ESTEEM_A, GOAL_A, -1.0),
        InfluenceEdge::new(ENVIRONMENT, GOAL_B, 1.0),
        InfluenceEdge::new(SELF_ESTEEM_B, GOAL_B, -1.0),
    ];
    for (parent, vars) in [
        (SELF_ESTEEM_A, ["a2", "b2", "a3", "b3", "a4", "b4"]),
        (SELF_ESTEEM_B, ["c2", "d2", "c3", "d3", "c4", "d4"]),
    ] {
        for (i, v) in vars.iter().enumerate() {
            let w = if i < 2 { 1.0 } else { -1.0 };
            edges.push(InfluenceEdge::new(*v, parent, w));
        }
    }

    let kb = GoalGraph { nodes, edges, groups: vec![] };
    debug_assert!(validate(&kb).is_valid());
    Ok(kb)
}

/// Node ids of the pattern core, located by role and edge sign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRoles {
    pub main: String,
    pub goal_a: String,
    pub goal_b: String,
    pub self_esteem_a: String,
    pub self_esteem_b: String,
}

impl PatternRoles {
    /// Subject A's goal is the subject goal feeding `G` positively, B's the
    /// one feeding it negatively. Each self-esteem node is the one feeding
    /// that subject's goal.
    pub fn resolve(kb: &GoalGraph) -> Result<Self, PatternError> {
        let with_role = |role: NodeRole| kb.nodes.iter().filter(move |n| n.role == Some(role));
        let mut mains = with_role(NodeRole::Main);
        let main = match (mains.next(), mains.next()) {
            (Some(m), None) => m.id.clone(),
            (None, _) => return Err(PatternError::MissingRole("main".into())),
            (Some(_), Some(_)) => return Err(PatternError::MissingRole("a unique main goal".into())),
        };
        let subject_goal = |positive: bool| {
            let ids: Vec<&str> = kb
                .incoming(&main)
                .filter(|e| (e.weight > 0.0) == positive)
                .filter(|e| kb.node(&e.child).and_then(|n| n.role) == Some(NodeRole::SubjectGoal))
                .map(|e| e.child.as_str())
                .collect();
            match ids.as_slice() {
                [one] => Ok(one.to_string()),
                _ => Err(PatternError::MissingRole(format!(
                    "one subject goal feeding `{main}` {}",
                    if positive { "positively" } else { "negatively" }
                ))),
            }
        };
        let goal_a = subject_goal(true)?;
        let goal_b = subject_goal(false)?;
        let self_esteem = |goal: &str| {
            let ids: Vec<&str> = kb
                .incoming(goal)
                .filter(|e| kb.node(&e.child).and_then(|n| n.role) == Some(NodeRole::SelfEsteem))
                .map(|e| e.child.as_str())
                .collect();
            match ids.as_slice() {
                [one] => Ok(one.to_string()),
                _ => Err(PatternError::MissingRole(format!("one self-esteem node feeding `{goal}`"))),
            }
        };
        let self_esteem_a = self_esteem(&goal_a)?;
        let self_esteem_b = self_esteem(&goal_b)?;
        Ok(Self {
            main,
            goal_a,
            goal_b,
            self_esteem_a,
            self_esteem_b,
        })
    }

    pub fn result_from(&self, degrees: &Degrees, epsilon: f64) -> ConflictResult {
        let d = |id: &str| degrees[id];
        let g_degree = d(&self.main);
        ConflictResult {
            g_degree,
            goal_a_degree: d(&self.goal_a),
            goal_b_degree: d(&self.goal_b),
            self_esteem_a_degree: d(&self.self_esteem_a),
            self_esteem_b_degree: d(&self.self_esteem_b),
            winner: decide_outcome(g_degree, epsilon),
        }
    }

    fn contains(&self, id: &str) -> bool {
        [&self.main, &self.goal_a, &self.goal_b, &self.self_esteem_a, &self.self_esteem_b]
            .iter()
            .any(|r| r.as_str() == id)
    }
}

/// Conflict verdict together with every node's degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictEvaluation {
    pub result: ConflictResult,
    pub degrees: Degrees,
}

pub fn evaluate_conflict_detailed(
    kb: &GoalGraph,
    leaves: &DegreeAssignment,
    epsilon: f64,
) -> Result<ConflictEvaluation, PatternError> {
    let evaluator = Evaluator::new(kb)?;
    let roles = PatternRoles::resolve(kb)?;
    let degrees = evaluator.propagate(leaves)?;
    Ok(ConflictEvaluation {
        result: roles.result_from(&degrees, epsilon),
        degrees,
    })
}

/// Propagates `leaves` through a pattern-bearing graph and applies the
/// sign rule to the main goal.
pub fn evaluate_conflict(
    kb: &GoalGraph,
    leaves: &DegreeAssignment,
    epsilon: f64,
) -> Result<ConflictResult, PatternError> {
    evaluate_conflict_detailed(kb, leaves, epsilon).map(|e| e.result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub timestamp: NaiveDate,
    pub result: ConflictResult,
}

/// `G(t)` and the per-subject degree series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEvaluation {
    pub points: Vec<SeriesPoint>,
    pub degrees: BTreeMap<String, Series>,
}

pub fn evaluate_conflict_series(
    kb: &GoalGraph,
    base: &DegreeAssignment,
    leaf_series: &BTreeMap<String, Series>,
    epsilon: f64,
) -> Result<SeriesEvaluation, PatternError> {
    let evaluator = Evaluator::new(kb)?;
    let roles = PatternRoles::resolve(kb)?;
    let degrees = evaluator.propagate_series(base, leaf_series)?;
    let steps = degrees.get(&roles.main).map_or(0, Vec::len);
    let points = (0..steps)
        .map(|t| {
            let at: Degrees = degrees.iter().map(|(id, s)| (id.clone(), s[t].1)).collect();
            SeriesPoint {
                timestamp: degrees[&roles.main][t].0,
                result: roles.result_from(&at, epsilon),
            }
        })
        .collect();
    Ok(SeriesEvaluation { points, degrees })
}

/// Exchanges A-side and B-side reflexive leaves; other keys are kept.
pub fn mirror_assignment(leaves: &DegreeAssignment) -> DegreeAssignment {
    let partner = |id: &str| {
        MIRROR_PAIRS.iter().find_map(|&(x, y)| {
            if x == id {
                Some(y)
            } else if y == id {
                Some(x)
            } else {
                None
            }
        })
    };
    leaves
        .iter()
        .map(|(k, &v)| (partner(k).map_or_else(|| k.clone(), str::to_string), v))
        .collect()
}

/// Adds nodes, edges and groups to a pattern-bearing graph. Edges between
/// two pattern-core nodes may not be added; the original graph is never
/// modified.
pub fn extend_pattern(kb: &GoalGraph, additions: &GoalGraph) -> Result<GoalGraph, PatternError> {
    let roles = PatternRoles::resolve(kb)?;
    let existing: HashSet<&str> = kb.nodes.iter().map(|n| n.id.as_str()).collect();
    let mut added = HashSet::new();
    for n in &additions.nodes {
        if existing.contains(n.id.as_str()) || !added.insert(n.id.as_str()) {
            return Err(PatternError::DuplicateId(n.id.clone()));
        }
    }
    let is_core = |id: &str| {
        roles.contains(id)
            || kb
                .node(id)
                .and_then(|n| n.role)
                .is_some_and(NodeRole::is_pattern_core)
    };
    for e in &additions.edges {
        if is_core(&e.child) && is_core(&e.parent) {
            return Err(PatternError::TouchesPatternCore {
                child: e.child.clone(),
                parent: e.parent.clone(),
            });
        }
    }

    let mut out = kb.clone();
    out.nodes.extend(additions.nodes.iter().cloned());
    out.edges.extend(additions.edges.iter().cloned());
    out.groups.extend(additions.groups.iter().cloned());

    let report = validate(&out);
    if let Some(Finding::Cycle { nodes }) = report.findings.iter().find(|f| matches!(f, Finding::Cycle { .. })) {
        return Err(PatternError::Cycle(nodes.clone()));
    }
    if !report.is_valid() {
        return Err(PatternError::Invalid(report));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::propagate;
    use proptest::prelude::*;

    fn subjects() -> (SubjectSpec, SubjectSpec) {
        (SubjectSpec::new("Bank").unwrap(), SubjectSpec::new("Attacker").unwrap())
    }

    fn kb() -> GoalGraph {
        let (a, b) = subjects();
        build_pattern(&a, &b).unwrap()
    }

    fn assign(pairs: &[(&str, f64)]) -> DegreeAssignment {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn topology_counts() {
        let kb = kb();
        assert!(validate(&kb).is_valid());
        // 5 internal goals + 13 reflexive leaves; 2 + 2·2 + 2·6 edges
        assert_eq!(kb.nodes.len(), 18);
        assert_eq!(kb.edges.len(), 18);

        let into_g: Vec<f64> = kb.incoming(MAIN_GOAL).map(|e| e.weight).collect();
        assert_eq!(into_g.len(), 2);
        assert_eq!(into_g.iter().filter(|w| **w < 0.0).count(), 1);

        for leaf in kb.leaves() {
            let out = kb.outgoing(&leaf.id).count();
            assert_eq!(out, if leaf.id == ENVIRONMENT { 2 } else { 1 }, "{}", leaf.id);
        }
    }

    #[test]
    fn subject_names_checked() {
        let a = SubjectSpec::new("X").unwrap();
        assert_eq!(build_pattern(&a, &a), Err(PatternError::IdenticalSubjects("X".into())));
        assert_eq!(SubjectSpec::new("  "), Err(PatternError::EmptySubjectName));
    }

    #[test]
    fn outcome_rule() {
        assert_eq!(decide_outcome(0.25, 1e-9), Winner::SubjectA);
        assert_eq!(decide_outcome(-0.1, 1e-9), Winner::SubjectB);
        assert_eq!(decide_outcome(0.0, 1e-9), Winner::Draw);
        assert_eq!(decide_outcome(1e-9, 1e-9), Winner::Draw);
        assert_eq!(decide_outcome(-1e-9, 1e-9), Winner::Draw);
        assert_eq!(decide_outcome(1e-12, 0.0), Winner::SubjectA);
    }

    #[test]
    fn zero_and_worked_scenarios() {
        let kb = kb();
        let r = evaluate_conflict(&kb, &assign(&[]), DEFAULT_EPSILON).unwrap();
        assert_eq!(r.g_degree, 0.0);
        assert_eq!(r.winner, Winner::Draw);

        let r = evaluate_conflict(&kb, &assign(&[("a2", 1.0)]), DEFAULT_EPSILON).unwrap();
        assert_eq!(r.self_esteem_a_degree, 1.0 / 6.0);
        assert_eq!(r.goal_a_degree, -1.0 / 12.0);
        assert_eq!(r.self_esteem_b_degree, 0.0);
        assert_eq!(r.goal_b_degree, 0.0);
        assert_eq!(r.g_degree, -1.0 / 24.0);
        assert_eq!(r.winner, Winner::SubjectB);
    }

    #[test]
    fn mirrored_sides_draw() {
        let kb = kb();
        let leaves = assign(&[("a1", 0.3), ("a2", 0.7), ("c2", 0.7), ("b4", 0.1), ("d4", 0.1)]);
        let r = evaluate_conflict(&kb, &leaves, DEFAULT_EPSILON).unwrap();
        assert_eq!(r.g_degree, 0.0);
        assert_eq!(r.winner, Winner::Draw);
    }

    #[test]
    fn degrees_come_from_propagate() {
        let kb = kb();
        let leaves = assign(&[("a1", 0.2), ("b3", 0.9), ("c4", 0.4)]);
        let eval = evaluate_conflict_detailed(&kb, &leaves, DEFAULT_EPSILON).unwrap();
        assert_eq!(eval.degrees, propagate(&kb, &leaves).unwrap());
        assert_eq!(eval.result.g_degree, eval.degrees[MAIN_GOAL]);
    }

    #[test]
    fn missing_roles_reported() {
        let mut kb = kb();
        kb.nodes[0].role = None;
        assert!(matches!(
            evaluate_conflict(&kb, &assign(&[]), DEFAULT_EPSILON),
            Err(PatternError::MissingRole(_))
        ));
        let empty = GoalGraph::default();
        assert!(matches!(
            evaluate_conflict(&empty, &assign(&[]), DEFAULT_EPSILON),
            Err(PatternError::MissingRole(_))
        ));
    }

    #[test]
    fn roles_follow_edge_signs() {
        let mut kb = kb();
        kb.set_weight(GOAL_A, MAIN_GOAL, -1.0).unwrap();
        kb.set_weight(GOAL_B, MAIN_GOAL, 1.0).unwrap();
        let roles = PatternRoles::resolve(&kb).unwrap();
        assert_eq!(roles.goal_a, GOAL_B);
        assert_eq!(roles.self_esteem_a, SELF_ESTEEM_B);
    }

    #[test]
    fn extend_examples() {
        let kb = kb();
        let topic = GoalGraph {
            nodes: vec![GoalNode::new("topic", "topic", NodeKind::Leaf, Some(NodeRole::Custom))],
            edges: vec![InfluenceEdge::new("topic", SELF_ESTEEM_A, 0.5)],
            groups: vec![],
        };
        let ext = extend_pattern(&kb, &topic).unwrap();
        assert_eq!((ext.nodes.len(), ext.edges.len()), (19, 19));
        assert_eq!(&ext.nodes[..18], &kb.nodes[..]);
        assert_eq!(&ext.edges[..18], &kb.edges[..]);

        assert_eq!(extend_pattern(&kb, &GoalGraph::default()).unwrap(), kb);

        let dup = GoalGraph {
            nodes: vec![GoalNode::new("a2", "", NodeKind::Leaf, None)],
            ..GoalGraph::default()
        };
        assert_eq!(extend_pattern(&kb, &dup), Err(PatternError::DuplicateId("a2".into())));

        let core = GoalGraph {
            edges: vec![InfluenceEdge::new("a2", GOAL_A, 0.5)],
            ..GoalGraph::default()
        };
        assert!(matches!(extend_pattern(&kb, &core), Err(PatternError::TouchesPatternCore { .. })));

        // x feeds A1 and G feeds x: G -> x -> A1 -> GoalA -> G
        let cyc = GoalGraph {
            nodes: vec![GoalNode::new("x", "", NodeKind::Internal, Some(NodeRole::Custom))],
            edges: vec![
                InfluenceEdge::new("x", SELF_ESTEEM_A, 0.5),
                InfluenceEdge::new(MAIN_GOAL, "x", 0.5),
            ],
            groups: vec![],
        };
        match extend_pattern(&kb, &cyc) {
            Err(PatternError::Cycle(nodes)) => {
                assert!(nodes.contains(&"x".to_string()) && nodes.contains(&MAIN_GOAL.to_string()))
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    fn arb_leaves() -> impl Strategy<Value = DegreeAssignment> {
        proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64], 13).prop_map(|vs| {
            crate::reflexive::VARIABLES
                .iter()
                .zip(vs)
                .map(|(k, v)| (k.to_string(), v))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn swapping_subjects_negates_g(leaves in arb_leaves()) {
            let (a, b) = subjects();
            let fwd = evaluate_conflict(&build_pattern(&a, &b).unwrap(), &leaves, DEFAULT_EPSILON).unwrap();
            let rev = evaluate_conflict(&build_pattern(&b, &a).unwrap(), &mirror_assignment(&leaves), DEFAULT_EPSILON).unwrap();
            prop_assert_eq!(rev.g_degree, -fwd.g_degree);
            prop_assert_eq!(rev.winner, fwd.winner.mirrored());
        }

        #[test]
        fn main_weight_scale_keeps_winner(leaves in arb_leaves(), lambda in 0.01f64..=1.0) {
            let base = kb();
            let mut scaled = base.clone();
            scaled.set_weight(GOAL_A, MAIN_GOAL, lambda).unwrap();
            scaled.set_weight(GOAL_B, MAIN_GOAL, -lambda).unwrap();
            let r0 = evaluate_conflict(&base, &leaves, DEFAULT_EPSILON).unwrap();
            let r1 = evaluate_conflict(&scaled, &leaves, DEFAULT_EPSILON).unwrap();
            prop_assert!((r0.g_degree - r1.g_degree).abs() < 1e-12);
        }

        #[test]
        fn outcome_mirror(g in -1.0..=1.0f64, eps in 0.0..0.1f64) {
            prop_assert_eq!(decide_outcome(-g, eps), decide_outcome(g, eps).mirrored());
        }
    }
}
