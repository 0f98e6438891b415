//! Second-order reflexive choice models.
//!
//! A subject's choice readiness is an implication from its self-esteem to the
//! environment's influence. In the two-subject conflict each side's
//! self-esteem is a disjunction of two implications built from its own
//! intentions and its images of the opponent. Both the nested implication form
//! and the flattened disjunctive form are provided; they agree exactly on all
//! inputs, crisp or graded.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grade::{implies, Grade, GradeError};

/// Variable names of [`ReflexiveState`], in declaration order.
pub const VARIABLES: [&str; 13] = [
    "a1", "a2", "b2", "a3", "b3", "a4", "b4", "c2", "d2", "c3", "d3", "c4", "d4",
];

/// Single subject with reflexion: environment, setting, intentions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SoloState {
    pub a1: Grade,
    pub a2: Grade,
    pub a3: Grade,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoloOutcome {
    pub readiness: Grade,
    pub self_esteem: Grade,
}

/// The 13 graded variables of the two-subject conflict.
///
/// `a1` is the environment's influence on both subjects. `a2..b4` are subject
/// A's view of the situation and `c2..d4` are subject B's.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflexiveState {
    #[serde(default)]
    pub a1: Grade,
    /// Influence of the environment expected by A.
    #[serde(default)]
    pub a2: Grade,
    /// Influence of the environment expected by B, as seen by A.
    #[serde(default)]
    pub b2: Grade,
    /// Intentions of A.
    #[serde(default)]
    pub a3: Grade,
    /// Intentions of B, as seen by A.
    #[serde(default)]
    pub b3: Grade,
    /// A's impression of how B imagines A's intentions.
    #[serde(default)]
    pub a4: Grade,
    /// A's impression of how B imagines its own intentions.
    #[serde(default)]
    pub b4: Grade,
    /// Influence of the environment expected by B.
    #[serde(default)]
    pub c2: Grade,
    #[serde(default)]
    pub d2: Grade,
    /// Intentions of B.
    #[serde(default)]
    pub c3: Grade,
    /// Intentions of A, as seen by B.
    #[serde(default)]
    pub d3: Grade,
    #[serde(default)]
    pub c4: Grade,
    #[serde(default)]
    pub d4: Grade,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("unknown reflexive variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{name}`: {source}")]
    Grade {
        name: String,
        #[source]
        source: GradeError,
    },
}

impl ReflexiveState {
    pub fn uniform(value: Grade) -> Self {
        let mut s = Self::default();
        for name in VARIABLES {
            *s.slot_mut(name).unwrap() = value;
        }
        s
    }

    pub fn get(&self, name: &str) -> Option<Grade> {
        Some(match name {
            "a1" => self.a1,
            "a2" => self.a2,
            "b2" => self.b2,
            "a3" => self.a3,
            "b3" => self.b3,
            "a4" => self.a4,
            "b4" => self.b4,
            "c2" => self.c2,
            "d2" => self.d2,
            "c3" => self.c3,
            "d3" => self.d3,
            "c4" => self.c4,
            "d4" => self.d4,
            _ => return None,
        })
    }

    fn slot_mut(&mut self, name: &str) -> Option<&mut Grade> {
        Some(match name {
            "a1" => &mut self.a1,
            "a2" => &mut self.a2,
            "b2" => &mut self.b2,
            "a3" => &mut self.a3,
            "b3" => &mut self.b3,
            "a4" => &mut self.a4,
            "b4" => &mut self.b4,
            "c2" => &mut self.c2,
            "d2" => &mut self.d2,
            "c3" => &mut self.c3,
            "d3" => &mut self.d3,
            "c4" => &mut self.c4,
            "d4" => &mut self.d4,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: Grade) -> Result<(), StateError> {
        let slot = self
            .slot_mut(name)
            .ok_or_else(|| StateError::UnknownVariable(name.to_string()))?;
        *slot = value;
        Ok(())
    }

    /// Builds a state from a flat name→value map. Absent variables are 0.
    pub fn from_map<'a, I>(values: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut s = Self::default();
        for (name, value) in values {
            let grade = Grade::new(value).map_err(|source| StateError::Grade {
                name: name.to_string(),
                source,
            })?;
            s.set(name, grade)?;
        }
        Ok(s)
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        VARIABLES
            .iter()
            .map(|&n| (n.to_string(), self.get(n).unwrap().value()))
            .collect()
    }

    /// Exchanges the two subjects' views, keeping the shared environment.
    pub fn mirrored(&self) -> Self {
        Self {
            a1: self.a1,
            a2: self.c2,
            b2: self.d2,
            a3: self.c3,
            b3: self.d3,
            a4: self.c4,
            b4: self.d4,
            c2: self.a2,
            d2: self.b2,
            c3: self.a3,
            d3: self.b3,
            c4: self.a4,
            d4: self.b4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflexiveOutcome {
    pub readiness_a: Grade,
    pub self_esteem_a: Grade,
    pub readiness_b: Grade,
    pub self_esteem_b: Grade,
}

/// Evaluates the single-subject model: self-esteem `a3 → a2`, readiness
/// `(a3 → a2) → a1`.
pub fn evaluate_solo(s: &SoloState) -> SoloOutcome {
    let self_esteem = implies(s.a3, s.a2);
    SoloOutcome {
        readiness: implies(self_esteem, s.a1),
        self_esteem,
    }
}

// (x3 & y3 -> x2) | (x4 & y4 -> y2)
fn self_esteem_logic(x2: Grade, y2: Grade, x3: Grade, y3: Grade, x4: Grade, y4: Grade) -> Grade {
    implies(x3.and(y3), x2).or(implies(x4.and(y4), y2))
}

// x2 | y2 | !x3 | !y3 | !x4 | !y4
fn self_esteem_dnf(x2: Grade, y2: Grade, x3: Grade, y3: Grade, x4: Grade, y4: Grade) -> Grade {
    x2.or(y2)
        .or(!x3)
        .or(!y3)
        .or(!x4)
        .or(!y4)
}

/// Nested implication form of both subjects' self-esteem and readiness.
pub fn evaluate_conflict_logic(s: &ReflexiveState) -> ReflexiveOutcome {
    let self_esteem_a = self_esteem_logic(s.a2, s.b2, s.a3, s.b3, s.a4, s.b4);
    let self_esteem_b = self_esteem_logic(s.c2, s.d2, s.c3, s.d3, s.c4, s.d4);
    ReflexiveOutcome {
        readiness_a: implies(self_esteem_a, s.a1),
        self_esteem_a,
        readiness_b: implies(self_esteem_b, s.a1),
        self_esteem_b,
    }
}

/// Flattened disjunctive form: `A = ¬A₁ ∨ a1` with
/// `A₁ = a2 ∨ b2 ∨ ¬a3 ∨ ¬b3 ∨ ¬a4 ∨ ¬b4`, and likewise for B.
pub fn evaluate_conflict_dnf(s: &ReflexiveState) -> ReflexiveOutcome {
    let self_esteem_a = self_esteem_dnf(s.a2, s.b2, s.a3, s.b3, s.a4, s.b4);
    let self_esteem_b = self_esteem_dnf(s.c2, s.d2, s.c3, s.d3, s.c4, s.d4);
    ReflexiveOutcome {
        readiness_a: (!self_esteem_a).or(s.a1),
        self_esteem_a,
        readiness_b: (!self_esteem_b).or(s.a1),
        self_esteem_b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown side `{0}`, expected A or B")]
pub struct ParseSideError(String);

impl FromStr for Side {
    type Err = ParseSideError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Side::A),
            "B" | "b" => Ok(Side::B),
            other => Err(ParseSideError(other.to_string())),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

impl Side {
    /// The seven variables that determine this side's outputs, most
    /// significant first.
    pub fn variables(self) -> [&'static str; 7] {
        match self {
            Side::A => ["a1", "a2", "b2", "a3", "b3", "a4", "b4"],
            Side::B => ["a1", "c2", "d2", "c3", "d3", "c4", "d4"],
        }
    }

    pub fn select(self, outcome: &ReflexiveOutcome) -> SoloOutcome {
        match self {
            Side::A => SoloOutcome {
                readiness: outcome.readiness_a,
                self_esteem: outcome.self_esteem_a,
            },
            Side::B => SoloOutcome {
                readiness: outcome.readiness_b,
                self_esteem: outcome.self_esteem_b,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTableRow {
    /// Crisp values of [`Side::variables`], in the same order.
    pub assignment: [Grade; 7],
    pub logic: SoloOutcome,
    pub dnf: SoloOutcome,
}

impl TruthTableRow {
    pub fn forms_agree(&self) -> bool {
        self.logic == self.dnf
    }
}

/// All 128 crisp assignments of one side's variables, `a1` as the most
/// significant bit. The other side's variables are held at 0.
pub fn enumerate_truth_table(side: Side) -> Vec<TruthTableRow> {
    let names = side.variables();
    (0u8..128)
        .map(|code| {
            let mut state = ReflexiveState::default();
            let mut assignment = [Grade::FALSE; 7];
            for (i, name) in names.iter().enumerate() {
                let bit = (code >> (6 - i)) & 1 == 1;
                assignment[i] = Grade::crisp(bit);
                state.set(name, assignment[i]).expect("side variable");
            }
            TruthTableRow {
                assignment,
                logic: side.select(&evaluate_conflict_logic(&state)),
                dnf: side.select(&evaluate_conflict_dnf(&state)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(v: f64) -> Grade {
        Grade::new(v).unwrap()
    }

    fn state(pairs: &[(&str, f64)]) -> ReflexiveState {
        ReflexiveState::from_map(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn solo_examples() {
        let out = evaluate_solo(&SoloState { a1: g(1.0), a2: g(0.0), a3: g(1.0) });
        assert_eq!(out.readiness, Grade::TRUE);

        let out = evaluate_solo(&SoloState { a1: g(0.0), a2: g(1.0), a3: g(1.0) });
        assert_eq!(out.readiness, Grade::FALSE);
        assert_eq!(out.self_esteem, Grade::TRUE);

        // max(1 - 0.7, 0.2) and max(1 - that, 0.4), evaluated directly
        let out = evaluate_solo(&SoloState { a1: g(0.4), a2: g(0.2), a3: g(0.7) });
        let se = (1.0f64 - 0.7).max(0.2);
        assert_eq!(out.self_esteem.value(), se);
        assert_eq!(out.readiness.value(), (1.0 - se).max(0.4));
        assert!((out.self_esteem.value() - 0.3).abs() < 1e-15);
        assert!((out.readiness.value() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn solo_matches_boolean_oracle() {
        for code in 0..8u8 {
            let (a1, a2, a3) = (code & 4 != 0, code & 2 != 0, code & 1 != 0);
            let out = evaluate_solo(&SoloState {
                a1: Grade::crisp(a1),
                a2: Grade::crisp(a2),
                a3: Grade::crisp(a3),
            });
            let se = !a3 || a2;
            assert_eq!(out.self_esteem, Grade::crisp(se));
            assert_eq!(out.readiness, Grade::crisp(!se || a1));
        }
    }

    #[test]
    fn conflict_examples() {
        let all = ReflexiveState::uniform(Grade::TRUE);
        let out = evaluate_conflict_logic(&all);
        assert_eq!(out.readiness_a, Grade::TRUE);
        assert_eq!(out.self_esteem_a, Grade::TRUE);
        assert_eq!(out.readiness_b, Grade::TRUE);
        assert_eq!(out.self_esteem_b, Grade::TRUE);

        let s = state(&[("a3", 1.0), ("b3", 1.0), ("a4", 1.0), ("b4", 1.0)]);
        for out in [evaluate_conflict_logic(&s), evaluate_conflict_dnf(&s)] {
            assert_eq!(out.self_esteem_a, Grade::FALSE);
            assert_eq!(out.readiness_a, Grade::TRUE);
            assert_eq!(out.self_esteem_b, Grade::TRUE);
            assert_eq!(out.readiness_b, Grade::FALSE);
        }

        let s = state(&[
            ("a1", 0.3),
            ("a2", 0.5),
            ("b2", 0.1),
            ("a3", 0.8),
            ("b3", 0.6),
            ("a4", 0.2),
            ("b4", 0.9),
        ]);
        for out in [evaluate_conflict_logic(&s), evaluate_conflict_dnf(&s)] {
            assert_eq!(out.self_esteem_a.value(), 0.8);
            assert_eq!(out.readiness_a.value(), 0.3);
        }
    }

    #[test]
    fn environment_dominates_dnf() {
        let mut s = state(&[("a2", 0.4), ("c3", 0.9), ("d4", 0.2)]);
        s.a1 = Grade::TRUE;
        let out = evaluate_conflict_dnf(&s);
        assert_eq!(out.readiness_a, Grade::TRUE);
        assert_eq!(out.readiness_b, Grade::TRUE);
    }

    #[test]
    fn truth_table_shape() {
        for side in [Side::A, Side::B] {
            let rows = enumerate_truth_table(side);
            assert_eq!(rows.len(), 128);
            assert!(rows.iter().all(|r| r.forms_agree()));
            assert!(rows[0].assignment.iter().all(|g| *g == Grade::FALSE));
            let last = rows.last().unwrap();
            assert!(last.assignment.iter().all(|g| *g == Grade::TRUE));
            assert_eq!(last.logic.readiness, Grade::TRUE);
            // a1 is the most significant bit
            assert_eq!(rows[64].assignment[0], Grade::TRUE);
            assert!(rows[64].assignment[1..].iter().all(|g| *g == Grade::FALSE));
        }
    }

    #[test]
    fn map_round_trip_and_unknown_names() {
        let s = state(&[("a2", 0.25), ("d4", 1.0)]);
        let back = ReflexiveState::from_map(s.to_map().iter().map(|(k, v)| (k.as_str(), *v))).unwrap();
        assert_eq!(back, s);
        assert!(matches!(
            ReflexiveState::from_map([("e5", 0.1)]),
            Err(StateError::UnknownVariable(_))
        ));
        assert!(matches!(
            ReflexiveState::from_map([("a2", 1.5)]),
            Err(StateError::Grade { .. })
        ));
        assert!(serde_json::from_str::<ReflexiveState>(r#"{"a1":0.5,"x":1}"#).is_err());
    }

    fn arb_grade() -> impl Strategy<Value = Grade> {
        prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64].prop_map(|v| Grade::new(v).unwrap())
    }

    fn arb_state() -> impl Strategy<Value = ReflexiveState> {
        proptest::collection::vec(arb_grade(), 13).prop_map(|gs| {
            let mut s = ReflexiveState::default();
            for (name, g) in VARIABLES.iter().zip(gs) {
                s.set(name, g).unwrap();
            }
            s
        })
    }

    proptest! {
        #[test]
        fn forms_agree_bitwise(s in arb_state()) {
            let l = evaluate_conflict_logic(&s);
            let d = evaluate_conflict_dnf(&s);
            prop_assert_eq!(l.readiness_a.value().to_bits(), d.readiness_a.value().to_bits());
            prop_assert_eq!(l.self_esteem_a.value().to_bits(), d.self_esteem_a.value().to_bits());
            prop_assert_eq!(l.readiness_b.value().to_bits(), d.readiness_b.value().to_bits());
            prop_assert_eq!(l.self_esteem_b.value().to_bits(), d.self_esteem_b.value().to_bits());
        }

        #[test]
        fn mirroring_swaps_subjects(s in arb_state()) {
            let out = evaluate_conflict_logic(&s);
            let m = evaluate_conflict_logic(&s.mirrored());
            prop_assert_eq!(out.readiness_a, m.readiness_b);
            prop_assert_eq!(out.self_esteem_a, m.self_esteem_b);
            prop_assert_eq!(out.readiness_b, m.readiness_a);
            prop_assert_eq!(out.self_esteem_b, m.self_esteem_a);
        }

        #[test]
        fn monotone_in_each_variable(s in arb_state(), idx in 0usize..7, lo in 0.0..=1.0f64, hi in 0.0..=1.0f64) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let name = Side::A.variables()[idx];
            let mut low = s;
            low.set(name, Grade::new(lo).unwrap()).unwrap();
            let mut high = s;
            high.set(name, Grade::new(hi).unwrap()).unwrap();
            let (ol, oh) = (evaluate_conflict_logic(&low), evaluate_conflict_logic(&high));
            match name {
                "a1" => {
                    prop_assert!(ol.readiness_a <= oh.readiness_a);
                    prop_assert_eq!(ol.self_esteem_a, oh.self_esteem_a);
                }
                "a2" | "b2" => {
                    prop_assert!(ol.readiness_a >= oh.readiness_a);
                    prop_assert!(ol.self_esteem_a <= oh.self_esteem_a);
                }
                _ => {
                    prop_assert!(ol.readiness_a <= oh.readiness_a);
                    prop_assert!(ol.self_esteem_a >= oh.self_esteem_a);
                }
            }
        }

        #[test]
        fn outputs_stay_in_range(s in arb_state()) {
            let out = evaluate_conflict_dnf(&s);
            for g in [out.readiness_a, out.self_esteem_a, out.readiness_b, out.self_esteem_b] {
                prop_assert!((0.0..=1.0).contains(&g.value()));
            }
        }
    }
}
