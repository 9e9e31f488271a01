//! Consistency of projector histories: branch weights from a state reduced at every
//! step against weights read off the never-reduced state.
//!
//! For a history `h` with chain operator `C_h = P_n U_n ... P_1 U_1` the reduced
//! computation gives `|C_h psi|^2`. The unreduced state at the final time is
//! `U_n ... U_1 psi`, and the history's share of it is `Re <U_n ... U_1 psi, C_h psi>`.
//! The shares always sum to one (the `C_h` sum to `U_n ... U_1`); they coincide with
//! the reduced weights exactly when the branches do not interfere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, Projector, StateVector, SymmetryUnitary, NUMERIC_TOL};

/// Largest history set enumerated.
pub const HISTORY_CAP: usize = 1_000_000;
/// Default consistency tolerance.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// A named resolution of the identity into orthogonal projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResolution {
    pub name: String,
    projectors: Vec<Projector>,
}

impl IdentityResolution {
    pub fn new(name: impl Into<String>, projectors: Vec<Projector>) -> Result<Self> {
        let first = projectors
            .first()
            .ok_or_else(|| Error::InvalidProjector("empty resolution".into()))?;
        let d = first.dim();
        let mut sum = CMatrix::zeros(d, d);
        for p in &projectors {
            if p.dim() != d {
                return Err(Error::Dimension { expected: d, found: p.dim() });
            }
            sum += p.to_matrix();
        }
        let defect = crate::hilbert::max_abs_diff(&sum, &CMatrix::identity(d, d));
        if defect > NUMERIC_TOL {
            return Err(Error::InvalidProjector(format!(
                "resolution does not sum to the identity (defect {defect:e})"
            )));
        }
        Ok(Self {
            name: name.into(),
            projectors,
        })
    }

    /// Projectors onto the standard basis vectors.
    pub fn standard(name: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new(name, (0..dim).map(|i| Projector::from_cells(dim, [i])).collect::<Result<_>>()?)
    }

    /// Rank-one projectors onto an orthonormal basis.
    pub fn from_basis(name: impl Into<String>, basis: &[StateVector]) -> Result<Self> {
        Self::new(name, basis.iter().map(Projector::onto).collect::<Result<_>>()?)
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }
}

/// One projector per step, each preceded by the unitary for the interval before it.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub projectors: Vec<Projector>,
    pub unitaries: Vec<SymmetryUnitary>,
}

impl History {
    pub fn new(projectors: Vec<Projector>, unitaries: Vec<SymmetryUnitary>) -> Result<Self> {
        if projectors.len() != unitaries.len() {
            return Err(Error::Dimension {
                expected: projectors.len(),
                found: unitaries.len(),
            });
        }
        if projectors.is_empty() {
            return Err(Error::Precondition("a history needs at least one step".into()));
        }
        let d = projectors[0].dim();
        for (p, u) in projectors.iter().zip(&unitaries) {
            for found in [p.dim(), u.dim()] {
                if found != d {
                    return Err(Error::Dimension { expected: d, found });
                }
            }
        }
        Ok(Self { projectors, unitaries })
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }
}

fn check(h: &History, psi0: &StateVector) -> Result<StateVector> {
    if psi0.dim() != h.dim() {
        return Err(Error::Dimension { expected: h.dim(), found: psi0.dim() });
    }
    psi0.normalized()
}

/// Product of step weights when the state is reduced (and renormalized) at each step.
pub fn collapsed_probability(h: &History, psi0: &StateVector) -> Result<f64> {
    collapsed(&h.projectors.iter().collect::<Vec<_>>(), &h.unitaries, &check(h, psi0)?)
}

fn collapsed(projectors: &[&Projector], unitaries: &[SymmetryUnitary], psi: &StateVector) -> Result<f64> {
    let mut psi = psi.clone();
    let mut prob = 1.0;
    for (p, u) in projectors.iter().zip(unitaries) {
        let evolved = u.apply(&psi)?;
        let projected = p.apply(&evolved)?;
        let w = projected.norm_sqr() / evolved.norm_sqr();
        if w == 0.0 {
            return Ok(0.0);
        }
        prob *= w;
        psi = projected.normalized()?;
    }
    Ok(prob)
}

/// `Re <U_n ... U_1 psi, C_h psi>`: the history's share of the unreduced final state.
pub fn uncollapsed_probability(h: &History, psi0: &StateVector) -> Result<f64> {
    uncollapsed(&h.projectors.iter().collect::<Vec<_>>(), &h.unitaries, &check(h, psi0)?)
}

fn uncollapsed(projectors: &[&Projector], unitaries: &[SymmetryUnitary], psi: &StateVector) -> Result<f64> {
    let mut free = psi.clone();
    let mut chain = psi.clone();
    for (p, u) in projectors.iter().zip(unitaries) {
        free = u.apply(&free)?;
        chain = p.apply(&u.apply(&chain)?)?;
    }
    Ok(free.inner(&chain)?.re)
}

/// All histories over a fixed sequence of resolutions and interval unitaries.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySet {
    pub resolutions: Vec<IdentityResolution>,
    pub unitaries: Vec<SymmetryUnitary>,
    pub epsilon: f64,
}

impl HistorySet {
    pub fn new(resolutions: Vec<IdentityResolution>, unitaries: Vec<SymmetryUnitary>, epsilon: f64) -> Result<Self> {
        if resolutions.is_empty() || resolutions.len() != unitaries.len() {
            return Err(Error::Dimension {
                expected: resolutions.len().max(1),
                found: unitaries.len(),
            });
        }
        let d = resolutions[0].dim();
        for r in &resolutions {
            if r.dim() != d {
                return Err(Error::Dimension { expected: d, found: r.dim() });
            }
        }
        for u in &unitaries {
            if u.dim() != d {
                return Err(Error::Dimension { expected: d, found: u.dim() });
            }
        }
        if !(epsilon >= 0.0) {
            return Err(Error::Domain(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        Ok(Self {
            resolutions,
            unitaries,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.resolutions[0].dim()
    }

    /// Number of histories, or `None` on overflow.
    pub fn count(&self) -> Option<usize> {
        self.resolutions.iter().try_fold(1usize, |acc, r| acc.checked_mul(r.len()))
    }

    /// Projector labels of history `index` in mixed-radix order (last step fastest).
    pub fn labels(&self, mut index: usize) -> Vec<usize> {
        let mut labels = vec![0; self.resolutions.len()];
        for (slot, r) in labels.iter_mut().zip(&self.resolutions).rev() {
            *slot = index % r.len();
            index /= r.len();
        }
        labels
    }

    pub fn history(&self, labels: &[usize]) -> Result<History> {
        let projectors = labels
            .iter()
            .zip(&self.resolutions)
            .map(|(&l, r)| {
                r.projectors
                    .get(l)
                    .cloned()
                    .ok_or(Error::Index { index: l, len: r.len() })
            })
            .collect::<Result<_>>()?;
        History::new(projectors, self.unitaries.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub labels: Vec<usize>,
    pub collapsed: f64,
    pub uncollapsed: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<HistoryRow>,
    pub max_discrepancy: f64,
    pub epsilon: f64,
    pub verdict: Verdict,
    pub collapsed_sum: f64,
    pub uncollapsed_sum: f64,
    pub collapsed_normalized: bool,
    pub uncollapsed_normalized: bool,
}

/// Compares both weights on every history of `set`.
pub fn consistency_check(set: &HistorySet, psi0: &StateVector) -> Result<ConsistencyReport> {
    let count = set
        .count()
        .filter(|&c| c <= HISTORY_CAP)
        .ok_or_else(|| Error::Size(format!("more than {HISTORY_CAP} histories; use coarser resolutions")))?;
    if psi0.dim() != set.dim() {
        return Err(Error::Dimension { expected: set.dim(), found: psi0.dim() });
    }
    let psi = psi0.normalized()?;
    let rows: Vec<HistoryRow> = (0..count)
        .into_par_iter()
        .map(|i| {
            let labels = set.labels(i);
            let ps: Vec<&Projector> = labels
                .iter()
                .zip(&set.resolutions)
                .map(|(&l, r)| &r.projectors[l])
                .collect();
            let c = collapsed(&ps, &set.unitaries, &psi)?;
            let u = uncollapsed(&ps, &set.unitaries, &psi)?;
            Ok(HistoryRow {
                labels,
                collapsed: c,
                uncollapsed: u,
                discrepancy: (c - u).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let max_discrepancy = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    let collapsed_sum: f64 = rows.iter().map(|r| r.collapsed).sum();
    let uncollapsed_sum: f64 = rows.iter().map(|r| r.uncollapsed).sum();
    Ok(ConsistencyReport {
        verdict: if max_discrepancy <= set.epsilon {
            Verdict::Consistent
        } else {
            Verdict::Inconsistent
        },
        max_discrepancy,
        epsilon: set.epsilon,
        collapsed_normalized: (collapsed_sum - 1.0).abs() <= 1e-9,
        uncollapsed_normalized: (uncollapsed_sum - 1.0).abs() <= 1e-9,
        collapsed_sum,
        uncollapsed_sum,
        rows,
    })
}
