//! Norm-continuity limit: values on arbitrary states from rational approximants.

use serde::{Deserialize, Serialize};

use super::trace::{Axiom, Check, DerivationTrace, Premise, Rule};
use crate::error::{Error, Result};
use crate::hilbert::{born_weight, Projector, StateVector, NUMERIC_TOL};

/// Largest denominator tried before giving up.
pub const DENOMINATOR_CAP: u64 = 1_000_000;

/// Norm errors below this count as an exact representation.
const EXACT: f64 = 1e-15;

/// `psi_q = (sqrt(m1) phi_1 + sqrt(m2) phi_2) / sqrt(q)` with `m1 + m2 = q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Approximant {
    pub q: u64,
    pub m: (u64, u64),
    /// `|psi/|psi| - psi_q|`.
    pub norm_error: f64,
    /// The value forced on `psi_q`, `m1 / q`.
    pub value: f64,
    pub value_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornLimit {
    pub value: f64,
    pub m: (u64, u64),
    /// Improving approximants in sweep order.
    pub record: Vec<Approximant>,
    pub trace: DerivationTrace,
}

fn approximant(w: f64, q: u64, m1: u64) -> Approximant {
    let m2 = q - m1;
    let a = (m1 as f64 / q as f64).sqrt();
    let b = (m2 as f64 / q as f64).sqrt();
    let norm_error = ((w.sqrt() - a).powi(2) + ((1.0 - w).sqrt() - b).powi(2)).sqrt();
    let value = m1 as f64 / q as f64;
    Approximant {
        q,
        m: (m1, m2),
        norm_error,
        value,
        value_error: (value - w).abs(),
    }
}

/// Approximates `psi` in norm by states `sqrt(m1) phi_1 + sqrt(m2) phi_2` separating
/// `P` and `I - P`, and returns the value they force once it is within `tol` of the
/// limit. `P` must be a configuration projector.
pub fn born_limit(psi: &StateVector, p: &Projector, tol: f64) -> Result<BornLimit> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if p.to_cells(NUMERIC_TOL).is_none() {
        return Err(Error::Precondition("projector is not in a configuration lattice".into()));
    }
    let w = born_weight(psi, p)?;
    let mut record = Vec::new();
    let mut best: Option<Approximant> = None;
    let mut hit = None;
    // Pure components are their own (q = 1) approximants.
    let pure = w <= EXACT * EXACT || w >= 1.0 - EXACT * EXACT;
    for q in 1..=DENOMINATOR_CAP {
        let m1 = if pure { w.round() as u64 } else { (w * q as f64).round() as u64 }.min(q);
        let a = approximant(w, q, m1);
        if best.is_none_or(|b| a.norm_error < b.norm_error) {
            record.push(a);
            best = Some(a);
        }
        if a.norm_error < EXACT || a.norm_error < tol / 2.0 {
            hit = Some(a);
            break;
        }
    }
    let Some(last) = hit else {
        return Err(Error::Convergence {
            iterations: DENOMINATOR_CAP as usize,
            best_error: best.map_or(f64::INFINITY, |b| b.value_error),
        });
    };
    let mut trace = DerivationTrace::new();
    trace.push(
        Rule::Continuity,
        vec![Premise::Axiom(Axiom::Continuity)],
        format!(
            "rational approximants with q up to {} converge to psi in norm (final error {:e}); \
             their values m1/q converge to {}",
            last.q, last.norm_error, last.value
        ),
        Check::Numeric {
            residual: last.value_error,
        },
    );
    Ok(BornLimit {
        value: last.value,
        m: last.m,
        record,
        trace,
    })
}
