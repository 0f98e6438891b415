//! Signed, weighted goal hierarchies and degree propagation.
//!
//! Edges point from a child goal to the parent it influences. The degree of
//! an internal goal is the weighted mean of its children's degrees,
//! normalized by the sum of absolute weights:
//!
//! ```text
//! d(parent) = Σ wᵢ·d(childᵢ) / Σ |wᵢ|
//! ```
//!
//! Leaf degrees are supplied by the caller and default to 0 when absent.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_GROUP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Leaf,
    Internal,
}

/// Role a node plays in the conflict design pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Main,
    SubjectGoal,
    SelfEsteem,
    ReflexiveLeaf,
    Custom,
}

impl NodeRole {
    /// Roles that belong to the fixed core of the conflict pattern.
    pub fn is_pattern_core(self) -> bool {
        !matches!(self, NodeRole::Custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalNode {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<NodeRole>,
}

impl GoalNode {
    pub fn new(id: impl Into<String>, label: impl Into<String>, kind: NodeKind, role: Option<NodeRole>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            kind,
            role,
        }
    }

    /// Degree range accepted for a leaf with this node's role.
    pub fn degree_range(&self) -> (f64, f64) {
        match self.role {
            Some(NodeRole::ReflexiveLeaf) => (0.0, 1.0),
            _ => (-1.0, 1.0),
        }
    }
}

/// A partial influence coefficient on a child→parent edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEdge {
    pub child: String,
    pub parent: String,
    pub weight: f64,
}

impl InfluenceEdge {
    pub fn new(child: impl Into<String>, parent: impl Into<String>, weight: f64) -> Self {
        Self {
            child: child.into(),
            parent: parent.into(),
            weight,
        }
    }
}

/// Goals that should not be simultaneously active. Checked after
/// propagation; never alters degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityGroup {
    pub members: Vec<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_GROUP_THRESHOLD
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoalGraph {
    #[serde(default)]
    pub nodes: Vec<GoalNode>,
    #[serde(default)]
    pub edges: Vec<InfluenceEdge>,
    #[serde(default)]
    pub groups: Vec<CompatibilityGroup>,
}

/// Leaf id → degree.
pub type DegreeAssignment = BTreeMap<String, f64>;
/// Node id → propagated degree.
pub type Degrees = BTreeMap<String, f64>;
/// Ordered `(date, degree)` samples.
pub type Series = Vec<(NaiveDate, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    DuplicateId { id: String },
    DanglingEndpoint { child: String, parent: String, missing: String },
    WeightOutOfRange { child: String, parent: String, weight: f64 },
    ZeroWeight { child: String, parent: String },
    Cycle { nodes: Vec<String> },
    LeafWithIncoming { id: String },
    InternalWithoutChildren { id: String },
    GroupTooSmall { group: usize },
    GroupMemberUnknown { group: usize, member: String },
    GroupThresholdInvalid { group: usize, threshold: f64 },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DuplicateId { id } => write!(f, "duplicate node id `{id}`"),
            Finding::DanglingEndpoint { child, parent, missing } => {
                write!(f, "edge {child} -> {parent} references unknown node `{missing}`")
            }
            Finding::WeightOutOfRange { child, parent, weight } => {
                write!(f, "edge {child} -> {parent} has weight {weight} outside [-1, 1]")
            }
            Finding::ZeroWeight { child, parent } => write!(f, "edge {child} -> {parent} has zero weight"),
            Finding::Cycle { nodes } => write!(f, "cycle: {}", nodes.join(" -> ")),
            Finding::LeafWithIncoming { id } => write!(f, "leaf `{id}` has incoming influence edges"),
            Finding::InternalWithoutChildren { id } => write!(f, "internal goal `{id}` has no incoming edges"),
            Finding::GroupTooSmall { group } => write!(f, "compatibility group #{group} has fewer than 2 members"),
            Finding::GroupMemberUnknown { group, member } => {
                write!(f, "compatibility group #{group} references unknown node `{member}`")
            }
            Finding::GroupThresholdInvalid { group, threshold } => {
                write!(f, "compatibility group #{group} has non-finite threshold {threshold}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, finding) in self.findings.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{finding}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("invalid knowledge base: {0}")]
    Invalid(ValidationReport),
    #[error("`{0}` is not a node of the knowledge base")]
    UnknownNode(String),
    #[error("`{0}` is not a leaf; only leaves take assigned degrees")]
    NotALeaf(String),
    #[error("degree {value} for `{id}` outside [{min}, {max}]")]
    DegreeOutOfRange { id: String, value: f64, min: f64, max: f64 },
    #[error("series for `{leaf}` does not share the common timestamp grid")]
    GridMismatch { leaf: String },
    #[error("series for `{leaf}` is not strictly increasing in time")]
    UnsortedSeries { leaf: String },
    #[error("no edge {child} -> {parent}")]
    UnknownEdge { child: String, parent: String },
}

impl GoalGraph {
    pub fn node(&self, id: &str) -> Option<&GoalNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &GoalNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Leaf)
    }

    pub fn incoming<'a>(&'a self, parent: &'a str) -> impl Iterator<Item = &'a InfluenceEdge> + 'a {
        self.edges.iter().filter(move |e| e.parent == parent)
    }

    pub fn outgoing<'a>(&'a self, child: &'a str) -> impl Iterator<Item = &'a InfluenceEdge> + 'a {
        self.edges.iter().filter(move |e| e.child == child)
    }

    /// Replaces the weight of an existing edge. The new weight is checked by
    /// the next validation, not here.
    pub fn set_weight(&mut self, child: &str, parent: &str, weight: f64) -> Result<(), GraphError> {
        let edge = self
            .edges
            .iter_mut()
            .find(|e| e.child == child && e.parent == parent)
            .ok_or_else(|| GraphError::UnknownEdge {
                child: child.to_string(),
                parent: parent.to_string(),
            })?;
        edge.weight = weight;
        Ok(())
    }

    /// Nodes sorted by id, edges by (parent, child), group members sorted.
    /// Used for stable on-disk documents.
    pub fn canonical(&self) -> GoalGraph {
        let mut out = self.clone();
        out.nodes.sort_by(|a, b| a.id.cmp(&b.id));
        out.edges
            .sort_by(|a, b| (&a.parent, &a.child).cmp(&(&b.parent, &b.child)));
        for g in &mut out.groups {
            g.members.sort();
        }
        out.groups.sort_by(|a, b| a.members.cmp(&b.members));
        out
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Canonical pretty-printed KB document with a trailing newline.
    pub fn to_document(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.canonical()).expect("graph serializes");
        text.push('\n');
        text
    }
}

/// Checks structural invariants. An empty report means the graph is valid.
pub fn validate(kb: &GoalGraph) -> ValidationReport {
    let mut findings = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, node) in kb.nodes.iter().enumerate() {
        if index.insert(node.id.as_str(), i).is_some() {
            findings.push(Finding::DuplicateId { id: node.id.clone() });
        }
    }

    let mut incoming = vec![0usize; kb.nodes.len()];
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); kb.nodes.len()];
    for edge in &kb.edges {
        let mut resolved = true;
        for end in [&edge.child, &edge.parent] {
            if !index.contains_key(end.as_str()) {
                findings.push(Finding::DanglingEndpoint {
                    child: edge.child.clone(),
                    parent: edge.parent.clone(),
                    missing: end.clone(),
                });
                resolved = false;
            }
        }
        if edge.weight == 0.0 {
            findings.push(Finding::ZeroWeight {
                child: edge.child.clone(),
                parent: edge.parent.clone(),
            });
        } else if !(-1.0..=1.0).contains(&edge.weight) {
            findings.push(Finding::WeightOutOfRange {
                child: edge.child.clone(),
                parent: edge.parent.clone(),
                weight: edge.weight,
            });
        }
        if resolved {
            let (c, p) = (index[edge.child.as_str()], index[edge.parent.as_str()]);
            incoming[p] += 1;
            adjacency[c].push(p);
        }
    }

    if let Some(cycle) = find_cycle(&adjacency) {
        findings.push(Finding::Cycle {
            nodes: cycle.into_iter().map(|i| kb.nodes[i].id.clone()).collect(),
        });
    }

    for (i, node) in kb.nodes.iter().enumerate() {
        match node.kind {
            NodeKind::Leaf if incoming[i] > 0 => findings.push(Finding::LeafWithIncoming { id: node.id.clone() }),
            NodeKind::Internal if incoming[i] == 0 => {
                findings.push(Finding::InternalWithoutChildren { id: node.id.clone() })
            }
            _ => {}
        }
    }

    for (gi, group) in kb.groups.iter().enumerate() {
        if group.members.len() < 2 {
            findings.push(Finding::GroupTooSmall { group: gi });
        }
        for m in &group.members {
            if !index.contains_key(m.as_str()) {
                findings.push(Finding::GroupMemberUnknown {
                    group: gi,
                    member: m.clone(),
                });
            }
        }
        if !group.threshold.is_finite() {
            findings.push(Finding::GroupThresholdInvalid {
                group: gi,
                threshold: group.threshold,
            });
        }
    }

    ValidationReport { findings }
}

/// Returns the node indices of one directed cycle, in edge order, if any.
fn find_cycle(adjacency: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let n = adjacency.len();
    let mut mark = vec![Mark::New; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // iterative DFS; stack holds (node, next child position)
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Open;
        while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
            if let Some(&next) = adjacency[node].get(*pos) {
                *pos += 1;
                match mark[next] {
                    Mark::New => {
                        mark[next] = Mark::Open;
                        parent[next] = node;
                        stack.push((next, 0));
                    }
                    Mark::Open => {
                        let mut cycle = vec![node];
                        let mut cur = node;
                        while cur != next {
                            cur = parent[cur];
                            cycle.push(cur);
                        }
                        cycle.reverse();
                        return Some(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

/// A validated graph compiled for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    kb: &'a GoalGraph,
    index: HashMap<&'a str, usize>,
    /// Per node: (child index, weight) in edge-list order.
    inputs: Vec<Vec<(usize, f64)>>,
    order: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(kb: &'a GoalGraph) -> Result<Self, GraphError> {
        let report = validate(kb);
        if !report.is_valid() {
            return Err(GraphError::Invalid(report));
        }
        let index: HashMap<&str, usize> = kb.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let mut inputs = vec![Vec::new(); kb.nodes.len()];
        let mut outputs = vec![Vec::new(); kb.nodes.len()];
        for e in &kb.edges {
            let (c, p) = (index[e.child.as_str()], index[e.parent.as_str()]);
            inputs[p].push((c, e.weight));
            outputs[c].push(p);
        }
        // Kahn's algorithm, seeded in node order for determinism
        let mut pending: Vec<usize> = inputs.iter().map(Vec::len).collect();
        let mut order: Vec<usize> = (0..kb.nodes.len()).filter(|&i| pending[i] == 0).collect();
        let mut head = 0;
        while head < order.len() {
            let node = order[head];
            head += 1;
            for &p in &outputs[node] {
                pending[p] -= 1;
                if pending[p] == 0 {
                    order.push(p);
                }
            }
        }
        debug_assert_eq!(order.len(), kb.nodes.len());
        Ok(Self { kb, index, inputs, order })
    }

    pub fn graph(&self) -> &'a GoalGraph {
        self.kb
    }

    /// Checks an assignment against the graph: known leaves, in range.
    pub fn check_assignment(&self, leaves: &DegreeAssignment) -> Result<(), GraphError> {
        for (id, &value) in leaves {
            self.check_leaf_value(id, value)?;
        }
        Ok(())
    }

    fn check_leaf_value(&self, id: &str, value: f64) -> Result<usize, GraphError> {
        let &i = self
            .index
            .get(id)
            .ok_or_else(|| GraphError::UnknownNode(id.to_string()))?;
        let node = &self.kb.nodes[i];
        if node.kind != NodeKind::Leaf {
            return Err(GraphError::NotALeaf(id.to_string()));
        }
        let (min, max) = node.degree_range();
        if !(min..=max).contains(&value) {
            return Err(GraphError::DegreeOutOfRange {
                id: id.to_string(),
                value,
                min,
                max,
            });
        }
        Ok(i)
    }

    fn leaf_vector(&self, leaves: &DegreeAssignment) -> Result<Vec<f64>, GraphError> {
        let mut values = vec![0.0; self.kb.nodes.len()];
        for (id, &value) in leaves {
            let i = self.check_leaf_value(id, value)?;
            values[i] = value + 0.0;
        }
        Ok(values)
    }

    fn evaluate_in_order(&self, values: &mut [f64], order: &[usize]) {
        for &node in order {
            let inputs = &self.inputs[node];
            if inputs.is_empty() {
                continue;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for &(child, w) in inputs {
                num += w * values[child];
                den += w.abs();
            }
            // + 0.0 folds a negative zero into +0
            values[node] = num / den + 0.0;
        }
    }

    fn to_degrees(&self, values: &[f64]) -> Degrees {
        self.kb
            .nodes
            .iter()
            .zip(values)
            .map(|(n, &v)| (n.id.clone(), v))
            .collect()
    }

    pub fn propagate(&self, leaves: &DegreeAssignment) -> Result<Degrees, GraphError> {
        let mut values = self.leaf_vector(leaves)?;
        self.evaluate_in_order(&mut values, &self.order);
        Ok(self.to_degrees(&values))
    }

    /// Evaluates a series of leaf values on a shared timestamp grid. Leaves
    /// without a series take their value from `base`, or 0.
    pub fn propagate_series(
        &self,
        base: &DegreeAssignment,
        leaf_series: &BTreeMap<String, Series>,
    ) -> Result<BTreeMap<String, Series>, GraphError> {
        let grid = common_grid(leaf_series)?;
        let base_values = self.leaf_vector(base)?;
        let mut bound = Vec::with_capacity(leaf_series.len());
        for (id, series) in leaf_series {
            let &i = self
                .index
                .get(id.as_str())
                .ok_or_else(|| GraphError::UnknownNode(id.clone()))?;
            if self.kb.nodes[i].kind != NodeKind::Leaf {
                return Err(GraphError::NotALeaf(id.clone()));
            }
            for &(_, v) in series {
                self.check_leaf_value(id, v)?;
            }
            bound.push((i, series));
        }

        let mut out: Vec<Series> = vec![Vec::with_capacity(grid.len()); self.kb.nodes.len()];
        for (t, &date) in grid.iter().enumerate() {
            let mut values = base_values.clone();
            for &(i, series) in &bound {
                values[i] = series[t].1 + 0.0;
            }
            self.evaluate_in_order(&mut values, &self.order);
            for (slot, v) in out.iter_mut().zip(values) {
                slot.push((date, v));
            }
        }
        Ok(self.kb.nodes.iter().map(|n| n.id.clone()).zip(out).collect())
    }
}

fn common_grid(leaf_series: &BTreeMap<String, Series>) -> Result<Vec<NaiveDate>, GraphError> {
    let mut grid: Option<Vec<NaiveDate>> = None;
    for (leaf, series) in leaf_series {
        if series.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(GraphError::UnsortedSeries { leaf: leaf.clone() });
        }
        let dates: Vec<NaiveDate> = series.iter().map(|p| p.0).collect();
        match &grid {
            None => grid = Some(dates),
            Some(g) if *g != dates => return Err(GraphError::GridMismatch { leaf: leaf.clone() }),
            Some(_) => {}
        }
    }
    Ok(grid.unwrap_or_default())
}

/// Propagates leaf degrees through a valid graph.
pub fn propagate(kb: &GoalGraph, leaves: &DegreeAssignment) -> Result<Degrees, GraphError> {
    Evaluator::new(kb)?.propagate(leaves)
}

/// Pointwise [`propagate`] over series sharing one timestamp grid. Leaves
/// without a series are 0.
pub fn propagate_series(
    kb: &GoalGraph,
    leaf_series: &BTreeMap<String, Series>,
) -> Result<BTreeMap<String, Series>, GraphError> {
    Evaluator::new(kb)?.propagate_series(&DegreeAssignment::new(), leaf_series)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupViolation {
    pub group: usize,
    pub active: Vec<String>,
}

/// Compatibility groups with two or more members above their threshold.
pub fn compatibility_violations(kb: &GoalGraph, degrees: &Degrees) -> Vec<GroupViolation> {
    kb.groups
        .iter()
        .enumerate()
        .filter_map(|(gi, g)| {
            let active: Vec<String> = g
                .members
                .iter()
                .filter(|m| degrees.get(m.as_str()).is_some_and(|&d| d > g.threshold))
                .cloned()
                .collect();
            (active.len() >= 2).then_some(GroupViolation { group: gi, active })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn leaf(id: &str) -> GoalNode {
        GoalNode::new(id, id, NodeKind::Leaf, None)
    }

    fn internal(id: &str) -> GoalNode {
        GoalNode::new(id, id, NodeKind::Internal, None)
    }

    fn graph(nodes: Vec<GoalNode>, edges: &[(&str, &str, f64)]) -> GoalGraph {
        GoalGraph {
            nodes,
            edges: edges.iter().map(|&(c, p, w)| InfluenceEdge::new(c, p, w)).collect(),
            groups: vec![],
        }
    }

    fn assign(pairs: &[(&str, f64)]) -> DegreeAssignment {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, d).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&GoalGraph::default()).is_valid());

        let g = graph(vec![internal("x")], &[("x", "x", 1.0)]);
        let report = validate(&g);
        assert!(report
            .findings
            .contains(&Finding::Cycle { nodes: vec!["x".into()] }));

        let g = graph(vec![leaf("c"), internal("p")], &[("c", "p", 1.5)]);
        assert_eq!(
            validate(&g).findings,
            vec![Finding::WeightOutOfRange {
                child: "c".into(),
                parent: "p".into(),
                weight: 1.5
            }]
        );
    }

    #[test]
    fn validate_reports_each_problem() {
        let mut g = graph(
            vec![leaf("c"), leaf("c"), internal("p"), internal("lonely"), leaf("l2")],
            &[("c", "p", 0.0), ("ghost", "p", 0.5), ("p", "l2", 0.5)],
        );
        g.groups.push(CompatibilityGroup { members: vec!["p".into()], threshold: 0.5 });
        g.groups.push(CompatibilityGroup { members: vec!["p".into(), "nope".into()], threshold: f64::NAN });
        let f = validate(&g).findings;
        assert!(f.contains(&Finding::DuplicateId { id: "c".into() }));
        assert!(f.contains(&Finding::ZeroWeight { child: "c".into(), parent: "p".into() }));
        assert!(f.contains(&Finding::DanglingEndpoint {
            child: "ghost".into(),
            parent: "p".into(),
            missing: "ghost".into()
        }));
        assert!(f.contains(&Finding::InternalWithoutChildren { id: "lonely".into() }));
        assert!(f.contains(&Finding::LeafWithIncoming { id: "l2".into() }));
        assert!(f.contains(&Finding::GroupTooSmall { group: 0 }));
        assert!(f.contains(&Finding::GroupMemberUnknown { group: 1, member: "nope".into() }));
        assert!(f.iter().any(|x| matches!(x, Finding::GroupThresholdInvalid { group: 1, .. })));
    }

    #[test]
    fn longer_cycle_is_named_in_order() {
        let g = graph(
            vec![internal("x"), internal("y"), internal("z")],
            &[("x", "y", 1.0), ("y", "z", 1.0), ("z", "x", 1.0)],
        );
        let f = validate(&g).findings;
        assert_eq!(f, vec![Finding::Cycle { nodes: vec!["x".into(), "y".into(), "z".into()] }]);
        assert_eq!(f[0].to_string(), "cycle: x -> y -> z");
    }

    #[test]
    fn propagate_examples() {
        let g = graph(vec![leaf("c"), internal("p")], &[("c", "p", 1.0)]);
        assert_eq!(propagate(&g, &assign(&[("c", 0.8)])).unwrap()["p"], 0.8);

        let g = graph(
            vec![leaf("x"), leaf("y"), internal("p")],
            &[("x", "p", 0.5), ("y", "p", -0.5)],
        );
        let d = propagate(&g, &assign(&[("x", 1.0), ("y", 1.0)])).unwrap();
        assert_eq!(d["p"], 0.0);
        assert!(d["p"].is_sign_positive());

        let g = graph(vec![leaf("x"), leaf("y"), internal("p")], &[("x", "p", 1.0), ("y", "p", -1.0)]);
        // (1·1.0 − 1·0.5) / 2
        assert_eq!(propagate(&g, &assign(&[("x", 1.0), ("y", 0.5)])).unwrap()["p"], 0.25);
    }

    #[test]
    fn propagate_defaults_and_rejections() {
        let g = graph(vec![leaf("x"), leaf("y"), internal("p")], &[("x", "p", 1.0), ("y", "p", 1.0)]);
        assert_eq!(propagate(&g, &assign(&[("x", 1.0)])).unwrap()["p"], 0.5);
        assert_eq!(
            propagate(&g, &assign(&[("q", 1.0)])),
            Err(GraphError::UnknownNode("q".into()))
        );
        assert_eq!(propagate(&g, &assign(&[("p", 1.0)])), Err(GraphError::NotALeaf("p".into())));
        assert!(matches!(
            propagate(&g, &assign(&[("x", -1.5)])),
            Err(GraphError::DegreeOutOfRange { .. })
        ));
        let cyclic = graph(vec![internal("x")], &[("x", "x", 1.0)]);
        assert!(matches!(propagate(&cyclic, &assign(&[])), Err(GraphError::Invalid(_))));

        let mut g = graph(vec![leaf("r"), internal("p")], &[("r", "p", 1.0)]);
        g.nodes[0].role = Some(NodeRole::ReflexiveLeaf);
        assert!(matches!(
            propagate(&g, &assign(&[("r", -0.2)])),
            Err(GraphError::DegreeOutOfRange { min, .. }) if min == 0.0
        ));
    }

    #[test]
    fn series_examples() {
        let g = graph(vec![leaf("c"), internal("p")], &[("c", "p", 1.0)]);
        let mut input = BTreeMap::new();
        input.insert("c".to_string(), vec![(date(1), 0.8), (date(2), 0.2)]);
        let out = propagate_series(&g, &input).unwrap();
        assert_eq!(out["p"], vec![(date(1), 0.8), (date(2), 0.2)]);

        input.insert("c".to_string(), vec![(date(1), 0.3), (date(2), 0.3), (date(3), 0.3)]);
        let out = propagate_series(&g, &input).unwrap();
        assert!(out["p"].iter().all(|&(_, v)| v == 0.3));

        input.insert("c".to_string(), vec![(date(5), 0.6)]);
        let out = propagate_series(&g, &input).unwrap();
        assert_eq!(out["p"][0].1, propagate(&g, &assign(&[("c", 0.6)])).unwrap()["p"]);
    }

    #[test]
    fn series_grid_checks() {
        let g = graph(vec![leaf("x"), leaf("y"), internal("p")], &[("x", "p", 1.0), ("y", "p", 1.0)]);
        let mut input = BTreeMap::new();
        input.insert("x".to_string(), vec![(date(1), 0.1), (date(2), 0.2)]);
        input.insert("y".to_string(), vec![(date(1), 0.1), (date(3), 0.2)]);
        assert_eq!(propagate_series(&g, &input), Err(GraphError::GridMismatch { leaf: "y".into() }));
        input.insert("y".to_string(), vec![(date(2), 0.1), (date(1), 0.2)]);
        assert_eq!(propagate_series(&g, &input), Err(GraphError::UnsortedSeries { leaf: "y".into() }));
    }

    #[test]
    fn series_uses_base_for_unbound_leaves() {
        let g = graph(vec![leaf("x"), leaf("y"), internal("p")], &[("x", "p", 1.0), ("y", "p", 1.0)]);
        let eval = Evaluator::new(&g).unwrap();
        let mut input = BTreeMap::new();
        input.insert("x".to_string(), vec![(date(1), 0.2), (date(2), 0.4)]);
        let out = eval.propagate_series(&assign(&[("y", 1.0)]), &input).unwrap();
        assert_eq!(out["p"], vec![(date(1), 0.6), (date(2), 0.7)]);
    }

    #[test]
    fn group_violations_are_advisory() {
        let mut g = graph(
            vec![leaf("x"), leaf("y"), internal("p")],
            &[("x", "p", 1.0), ("y", "p", 1.0)],
        );
        g.groups.push(CompatibilityGroup { members: vec!["x".into(), "y".into()], threshold: 0.5 });
        let d = propagate(&g, &assign(&[("x", 0.9), ("y", 0.7)])).unwrap();
        assert_eq!(d["p"], 0.8);
        assert_eq!(
            compatibility_violations(&g, &d),
            vec![GroupViolation { group: 0, active: vec!["x".into(), "y".into()] }]
        );
        let d = propagate(&g, &assign(&[("x", 0.9), ("y", 0.5)])).unwrap();
        assert!(compatibility_violations(&g, &d).is_empty());
    }

    #[test]
    fn kb_document_schema() {
        let doc = r#"{
            "nodes": [
                {"id": "t", "label": "topic", "kind": "leaf", "role": "custom"},
                {"id": "g", "label": "goal", "kind": "internal"}
            ],
            "edges": [{"child": "t", "parent": "g", "weight": -0.25}],
            "groups": [{"members": ["t", "g"]}]
        }"#;
        let g: GoalGraph = serde_json::from_str(doc).unwrap();
        assert_eq!(g.nodes[0].role, Some(NodeRole::Custom));
        assert_eq!(g.nodes[1].role, None);
        assert_eq!(g.groups[0].threshold, DEFAULT_GROUP_THRESHOLD);
        let back: GoalGraph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    /// Random DAG: node i may only feed nodes j > i.
    fn arb_dag() -> impl Strategy<Value = (GoalGraph, DegreeAssignment)> {
        (2usize..=8).prop_flat_map(|n| {
            let pairs = n * (n - 1) / 2;
            (
                proptest::collection::vec(proptest::option::weighted(0.5, -1.0..=1.0f64), pairs),
                proptest::collection::vec(-1.0..=1.0f64, n),
            )
                .prop_map(move |(ws, ds)| {
                    let mut edges = Vec::new();
                    let mut k = 0;
                    for c in 0..n {
                        for p in (c + 1)..n {
                            if let Some(w) = ws[k] {
                                if w != 0.0 {
                                    edges.push(InfluenceEdge::new(format!("n{c}"), format!("n{p}"), w));
                                }
                            }
                            k += 1;
                        }
                    }
                    let nodes = (0..n)
                        .map(|i| {
                            let id = format!("n{i}");
                            let kind = if edges.iter().any(|e| e.parent == id) {
                                NodeKind::Internal
                            } else {
                                NodeKind::Leaf
                            };
                            GoalNode::new(id.clone(), id, kind, None)
                        })
                        .collect::<Vec<_>>();
                    let leaves = nodes
                        .iter()
                        .zip(ds)
                        .filter(|(n, _)| n.kind == NodeKind::Leaf)
                        .map(|(n, d)| (n.id.clone(), d))
                        .collect();
                    (GoalGraph { nodes, edges, groups: vec![] }, leaves)
                })
        })
    }

    proptest! {
        #[test]
        fn bounded_by_children((g, leaves) in arb_dag()) {
            let d = propagate(&g, &leaves).unwrap();
            for node in &g.nodes {
                let children: Vec<f64> = g.incoming(&node.id).map(|e| d[&e.child].abs()).collect();
                if let Some(max) = children.iter().cloned().reduce(f64::max) {
                    prop_assert!(d[&node.id].abs() <= max + 1e-15);
                }
                prop_assert!(d[&node.id].abs() <= 1.0);
            }
        }

        #[test]
        fn any_topological_order_agrees((g, leaves) in arb_dag(), seed in any::<u64>()) {
            let eval = Evaluator::new(&g).unwrap();
            let base = eval.leaf_vector(&leaves).unwrap();
            let mut reference = base.clone();
            eval.evaluate_in_order(&mut reference, &eval.order);
            // node index order is itself topological for these DAGs; a
            // random Kahn order is produced by picking among ready nodes
            let n = g.nodes.len();
            let mut pending: Vec<usize> = eval.inputs.iter().map(Vec::len).collect();
            let mut ready: Vec<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
            let mut order = Vec::new();
            let mut state = seed;
            while !ready.is_empty() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let pick = ready.swap_remove((state >> 33) as usize % ready.len());
                order.push(pick);
                for (p, inputs) in eval.inputs.iter().enumerate() {
                    let k = inputs.iter().filter(|(c, _)| *c == pick).count();
                    if k > 0 {
                        pending[p] -= k;
                        if pending[p] == 0 {
                            ready.push(p);
                        }
                    }
                }
            }
            let mut shuffled = base;
            eval.evaluate_in_order(&mut shuffled, &order);
            for (a, b) in reference.iter().zip(&shuffled) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn affine_in_each_leaf((g, leaves) in arb_dag(), pick in any::<prop::sample::Index>()) {
            prop_assume!(!leaves.is_empty());
            let key = leaves.keys().nth(pick.index(leaves.len())).unwrap().clone();
            let at = |v: f64| {
                let mut l = leaves.clone();
                l.insert(key.clone(), v);
                propagate(&g, &l).unwrap()
            };
            let (d0, d1, d2) = (at(-1.0), at(0.0), at(1.0));
            for node in &g.nodes {
                let id = &node.id;
                prop_assert!((d2[id] - d1[id] - (d1[id] - d0[id])).abs() < 1e-12);
            }
        }

        #[test]
        fn scaling_one_node_is_invariant((g, leaves) in arb_dag(), lambda in 0.01f64..1.0, pick in any::<prop::sample::Index>()) {
            let internal: Vec<String> = g.nodes.iter().filter(|n| n.kind == NodeKind::Internal).map(|n| n.id.clone()).collect();
            prop_assume!(!internal.is_empty());
            let target = &internal[pick.index(internal.len())];
            let mut scaled = g.clone();
            for e in scaled.edges.iter_mut().filter(|e| &e.parent == target) {
                e.weight *= lambda;
            }
            prop_assume!(validate(&scaled).is_valid());
            let (a, b) = (propagate(&g, &leaves).unwrap(), propagate(&scaled, &leaves).unwrap());
            prop_assert!((a[target] - b[target]).abs() < 1e-12);
        }
    }
}
