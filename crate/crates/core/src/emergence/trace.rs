use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    PhaseElim,
    Permutation,
    Complement,
    Additivity,
    Refinement,
    Continuity,
    MeasurementEquivalence,
    PayoffEquivalence,
    SureThing,
    ZeroSum,
}

/// Assumptions a derivation may rest on without proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    /// Every lattice projector has the same (infinite) rank.
    Degeneracy,
    /// `mu(psi, P) = mu(U psi, U P U^-1)` for unitary `U`.
    Invariance,
    /// A projector common to two lattices carries the same value in both.
    Stability,
    /// `mu` is additive on disjoint projectors and `mu(I) = 1`.
    ProbabilityMeasure,
    /// `mu(., P)` is norm-continuous.
    Continuity,
    /// `<phi, X, P> ~ <U phi, U X U^-1, P>`.
    MeasurementEquivalence,
    /// `<phi, X, P> ~ <phi, f(X), P o f^-1>` for `f` invertible on the spectrum.
    PayoffEquivalence,
    /// `V(<phi, X, P o f_s>) = V(<phi, X, P>) + P(s)`.
    SureThing,
    /// `V(<phi, X, P o -I>) = -V(<phi, X, P>)`.
    ZeroSum,
    /// `P(x + y) = P(x) + P(y)`.
    Linearity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "ref", rename_all = "snake_case")]
pub enum Premise {
    Axiom(Axiom),
    Step(usize),
}

/// How the conclusion of a step was confirmed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// A numeric identity held with this residual.
    Numeric { residual: f64 },
    /// Exact arithmetic, no residual.
    Exact,
    /// Taken from the cited axiom; in finite dimensions ranks may differ, so
    /// the unitary the axiom supplies is not constructed.
    Cited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub id: usize,
    pub rule: Rule,
    pub premises: Vec<Premise>,
    pub conclusion: String,
    pub check: Check,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivationTrace {
    pub steps: Vec<TraceStep>,
}

impl DerivationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rule: Rule, premises: Vec<Premise>, conclusion: impl Into<String>, check: Check) -> usize {
        let id = self.steps.len();
        self.steps.push(TraceStep {
            id,
            rule,
            premises,
            conclusion: conclusion.into(),
            check,
        });
        id
    }

    /// Appends `other`, renumbering its steps; returns the new id of its last step.
    pub fn append(&mut self, other: &DerivationTrace) -> Option<usize> {
        let offset = self.steps.len();
        for s in &other.steps {
            let premises = s
                .premises
                .iter()
                .map(|p| match p {
                    Premise::Step(i) => Premise::Step(i + offset),
                    a => *a,
                })
                .collect();
            self.push(s.rule, premises, s.conclusion.clone(), s.check);
        }
        self.steps.len().checked_sub(1).filter(|&l| l >= offset)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rules(&self) -> Vec<Rule> {
        self.steps.iter().map(|s| s.rule).collect()
    }

    /// Every premise refers to an earlier step and every numeric residual is within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for s in &self.steps {
            for p in &s.premises {
                if let Premise::Step(i) = p {
                    if *i >= s.id {
                        return Err(Error::Precondition(format!(
                            "step {} cites later step {i}",
                            s.id
                        )));
                    }
                }
            }
            if let Check::Numeric { residual } = s.check {
                if !(residual <= tol) {
                    return Err(Error::Precondition(format!(
                        "step {} residual {residual:e} exceeds {tol:e}",
                        s.id
                    )));
                }
            }
        }
        Ok(())
    }
}
