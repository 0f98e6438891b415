//! Content-monitoring series and expert estimates.
//!
//! Topic streams set leaf degrees: daily publication counts are min-max
//! normalized and bound to leaves, optionally complemented. Expert estimates
//! set edge weights: each edge's weight is the competence-weighted mean of
//! the experts' estimates.

use std::collections::{BTreeMap, HashSet};

use chrono::NaiveDate;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GoalGraph, NodeKind, NodeRole, Series};

pub const CSV_HEADER: [&str; 3] = ["date", "topic", "count"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSeries {
    pub topic_id: String,
    pub samples: Vec<(NaiveDate, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    Complement,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Complement => 1.0 - x,
        }
    }
}

/// Routes a topic's normalized intensity to a KB leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafBinding {
    pub topic: String,
    pub leaf: String,
    #[serde(default)]
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertEstimate {
    pub expert_id: String,
    pub child: String,
    pub parent: String,
    pub estimate: f64,
    pub competence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMethod {
    #[default]
    Minmax,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("line 1: header must be exactly `date,topic,count`")]
    BadHeader,
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: negative count {count}")]
    NegativeCount { line: u64, count: i64 },
    #[error("line {line}: duplicate sample for topic `{topic}` on {date}")]
    DuplicateSample { line: u64, date: NaiveDate, topic: String },
    #[error("binding references unknown leaf `{0}`")]
    UnknownLeaf(String),
    #[error("leaf `{0}` cannot be bound; only reflexive or custom leaves take series")]
    UnbindableLeaf(String),
    #[error("binding references unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("leaf `{0}` is bound more than once")]
    DuplicateBinding(String),
    #[error("no estimates to aggregate")]
    NoEstimates,
    #[error("estimates refer to different edges: {0} and {1}")]
    MixedEdges(String, String),
    #[error("expert `{expert}`: estimate {value} outside [-1, 1]")]
    EstimateOutOfRange { expert: String, value: f64 },
    #[error("expert `{expert}`: competence must be positive and finite, got {value}")]
    BadCompetence { expert: String, value: f64 },
}

/// Parses `date,topic,count` CSV into one series per topic, topics sorted by
/// id and samples by date.
pub fn parse_topic_series(document: &str) -> Result<Vec<TopicSeries>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(document.as_bytes());
    let header = reader.headers().map_err(|_| IngestError::BadHeader)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(IngestError::BadHeader);
    }

    let mut by_topic: BTreeMap<String, BTreeMap<NaiveDate, u64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| IngestError::Malformed { line, message };
        if record.len() != 3 {
            return Err(malformed(format!("expected 3 fields, found {}", record.len())));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| malformed(format!("bad date `{}`: {e}", &record[0])))?;
        let topic = record[1].to_string();
        if topic.is_empty() {
            return Err(malformed("empty topic".into()));
        }
        let count: i64 = record[2]
            .parse()
            .map_err(|_| malformed(format!("bad count `{}`", &record[2])))?;
        if count < 0 {
            return Err(IngestError::NegativeCount { line, count });
        }
        let samples = by_topic.entry(topic.clone()).or_default();
        if samples.insert(date, count as u64).is_some() {
            return Err(IngestError::DuplicateSample { line, date, topic });
        }
    }

    Ok(by_topic
        .into_iter()
        .map(|(topic_id, samples)| TopicSeries {
            topic_id,
            samples: samples.into_iter().collect(),
        })
        .collect())
}

/// Min-max normalizes counts into `[0, 1]`. A constant series carries no
/// directional signal and maps to 0.5 everywhere.
pub fn normalize_series(series: &TopicSeries, method: NormalizeMethod) -> Series {
    match method {
        NormalizeMethod::Minmax => {
            let counts = series.samples.iter().map(|s| s.1);
            let (Some(min), Some(max)) = (counts.clone().min(), counts.max()) else {
                return Vec::new();
            };
            if min == max {
                log::warn!("topic `{}` is constant; using 0.5", series.topic_id);
                return series.samples.iter().map(|&(d, _)| (d, 0.5)).collect();
            }
            let span = (max - min) as f64;
            series
                .samples
                .iter()
                .map(|&(d, c)| (d, (c - min) as f64 / span))
                .collect()
        }
    }
}

/// Normalizes each bound topic and routes it to its leaf.
pub fn bind_series_to_leaves(
    kb: &GoalGraph,
    bindings: &[LeafBinding],
    series: &[TopicSeries],
) -> Result<BTreeMap<String, Series>, IngestError> {
    let mut out = BTreeMap::new();
    let mut seen = HashSet::new();
    for b in bindings {
        let node = kb.node(&b.leaf).ok_or_else(|| IngestError::UnknownLeaf(b.leaf.clone()))?;
        let bindable = node.kind == NodeKind::Leaf
            && matches!(node.role, None | Some(NodeRole::ReflexiveLeaf) | Some(NodeRole::Custom));
        if !bindable {
            return Err(IngestError::UnbindableLeaf(b.leaf.clone()));
        }
        if !seen.insert(b.leaf.as_str()) {
            return Err(IngestError::DuplicateBinding(b.leaf.clone()));
        }
        let topic = series
            .iter()
            .find(|s| s.topic_id == b.topic)
            .ok_or_else(|| IngestError::UnknownTopic(b.topic.clone()))?;
        let intensities = normalize_series(topic, NormalizeMethod::Minmax)
            .into_iter()
            .map(|(d, x)| (d, b.transform.apply(x)))
            .collect();
        out.insert(b.leaf.clone(), intensities);
    }
    Ok(out)
}

/// Exact rational value of a float's shortest round-trip decimal form.
fn decimal_value(x: f64) -> BigRational {
    // Display for f64 never uses exponent notation
    let text = x.to_string();
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let mut numer: BigInt = format!("{int_part}{frac_part}").parse().expect("decimal digits");
    if negative {
        numer = -numer;
    }
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    BigRational::new(numer, denom)
}

/// Competence-weighted mean `Σ cⱼ·xⱼ / Σ cⱼ` of the estimates for one edge.
///
/// Estimates and competences are taken at their shortest decimal value and
/// the mean is computed exactly, then rounded once. The result is therefore
/// independent of input order and always lies within `[min, max]` of the
/// estimates.
pub fn aggregate_expert_estimates(estimates: &[ExpertEstimate]) -> Result<f64, IngestError> {
    let first = estimates.first().ok_or(IngestError::NoEstimates)?;
    let mut weighted = BigRational::zero();
    let mut total = BigRational::zero();
    for e in estimates {
        if e.child != first.child || e.parent != first.parent {
            return Err(IngestError::MixedEdges(
                format!("{} -> {}", first.child, first.parent),
                format!("{} -> {}", e.child, e.parent),
            ));
        }
        if !(-1.0..=1.0).contains(&e.estimate) {
            return Err(IngestError::EstimateOutOfRange {
                expert: e.expert_id.clone(),
                value: e.estimate,
            });
        }
        if !(e.competence > 0.0 && e.competence.is_finite()) {
            return Err(IngestError::BadCompetence {
                expert: e.expert_id.clone(),
                value: e.competence,
            });
        }
        let c = decimal_value(e.competence);
        weighted += &c * decimal_value(e.estimate);
        total += c;
    }
    let mean = (weighted / total).to_f64().expect("bounded mean");
    Ok(mean + 0.0)
}

/// Edge (child, parent) → estimates for it, in input order.
pub fn group_estimates_by_edge(estimates: &[ExpertEstimate]) -> BTreeMap<(String, String), Vec<ExpertEstimate>> {
    let mut out: BTreeMap<(String, String), Vec<ExpertEstimate>> = BTreeMap::new();
    for e in estimates {
        out.entry((e.child.clone(), e.parent.clone())).or_default().push(e.clone());
    }
    out
}
