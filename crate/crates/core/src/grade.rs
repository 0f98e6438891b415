//! Graded truth values and the Zadeh connectives used by the reflexive formulas.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A truth value in `[0, 1]`. Crisp truth is the pair `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Grade(f64);

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("grade must be a finite value in [0, 1], got {0}")]
pub struct GradeError(pub f64);

impl Grade {
    pub const FALSE: Grade = Grade(0.0);
    pub const TRUE: Grade = Grade(1.0);

    pub fn new(value: f64) -> Result<Self, GradeError> {
        if (0.0..=1.0).contains(&value) {
            // -0.0 passes the range check; store it as +0.0
            Ok(Grade(value + 0.0))
        } else {
            Err(GradeError(value))
        }
    }

    pub fn crisp(value: bool) -> Self {
        if value {
            Self::TRUE
        } else {
            Self::FALSE
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_crisp(self) -> bool {
        self.0 == 0.0 || self.0 == 1.0
    }

    /// Conjunction, `min(x, y)`.
    #[inline]
    pub fn and(self, other: Grade) -> Grade {
        Grade(self.0.min(other.0))
    }

    /// Disjunction, `max(x, y)`.
    #[inline]
    pub fn or(self, other: Grade) -> Grade {
        Grade(self.0.max(other.0))
    }

    /// Material implication `¬x ∨ y`.
    #[inline]
    pub fn implies(self, consequent: Grade) -> Grade {
        implies(self, consequent)
    }
}

/// Negation, `1 - x`.
impl std::ops::Not for Grade {
    type Output = Grade;

    #[inline]
    fn not(self) -> Grade {
        Grade(1.0 - self.0)
    }
}

/// Material implication over grades: `max(1 - x, y)`.
#[inline]
pub fn implies(antecedent: Grade, consequent: Grade) -> Grade {
    (!antecedent).or(consequent)
}

impl TryFrom<f64> for Grade {
    type Error = GradeError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Grade::new(value)
    }
}

impl From<Grade> for f64 {
    fn from(g: Grade) -> f64 {
        g.0
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}
