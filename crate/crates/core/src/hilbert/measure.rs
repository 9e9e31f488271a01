use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lattice::BooleanSublattice;
use super::projector::{born_weight, CellSet, Projector};
use super::state::{StateVector, NUMERIC_TOL};
use crate::error::{Error, Result};

/// A candidate probability assignment on configuration projectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<MeasureEntry>", from = "Vec<MeasureEntry>")]
pub struct MeasureTable {
    entries: BTreeMap<CellSet, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEntry {
    pub cells: CellSet,
    pub value: f64,
}

impl From<MeasureTable> for Vec<MeasureEntry> {
    fn from(t: MeasureTable) -> Self {
        t.entries.into_iter().map(|(cells, value)| MeasureEntry { cells, value }).collect()
    }
}

impl From<Vec<MeasureEntry>> for MeasureTable {
    fn from(v: Vec<MeasureEntry>) -> Self {
        Self {
            entries: v.into_iter().map(|e| (e.cells, e.value)).collect(),
        }
    }
}

impl MeasureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cells: CellSet, value: f64) -> Result<()> {
        if !(value.is_finite() && (-NUMERIC_TOL..=1.0 + NUMERIC_TOL).contains(&value)) {
            return Err(Error::Domain(format!("measure value {value} outside [0,1]")));
        }
        self.entries.insert(cells, value.clamp(0.0, 1.0));
        Ok(())
    }

    pub fn get(&self, cells: &CellSet) -> Option<f64> {
        self.entries.get(cells).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellSet, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    /// Born-rule values for every element of `lattice` (or only its generators and
    /// top when the lattice is not materialized).
    pub fn born(psi: &StateVector, lattice: &BooleanSublattice) -> Result<Self> {
        let mut table = Self::new();
        let dim = lattice.dim();
        let mut put = |cells: &CellSet| -> Result<()> {
            let p = Projector::cells(dim, cells.clone())?;
            table.insert(cells.clone(), born_weight(psi, &p)?)
        };
        match lattice.elements() {
            Some(elems) => elems.iter().try_for_each(&mut put)?,
            None => {
                lattice.generators().iter().try_for_each(&mut put)?;
                put(&lattice.top())?;
            }
        }
        Ok(table)
    }

    /// Extends generator values to every lattice element by summation.
    pub fn additive_extension(lattice: &BooleanSublattice, generator_values: &[f64]) -> Result<Self> {
        if generator_values.len() != lattice.num_generators() {
            return Err(Error::Dimension {
                expected: lattice.num_generators(),
                found: generator_values.len(),
            });
        }
        let elems = lattice
            .elements()
            .ok_or_else(|| Error::Size("lattice too large to extend".into()))?;
        let mut table = Self::new();
        for e in elems {
            let parts = lattice.decompose(e).expect("materialized element");
            let v: f64 = parts.iter().map(|&i| generator_values[i]).sum();
            table.insert(e.clone(), v)?;
        }
        Ok(table)
    }

    pub fn max_abs_diff(&self, other: &MeasureTable) -> f64 {
        self.entries
            .iter()
            .map(|(k, v)| match other.get(k) {
                Some(w) => (v - w).abs(),
                None => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdditivityViolation {
    /// `mu(E)` differs from the sum of its generator values.
    Additivity { element: CellSet, value: f64, expected: f64 },
    /// `mu(I) != 1`.
    Normalization { value: f64 },
    /// `mu(0) != 0`.
    Zero { value: f64 },
}

/// Checks additivity of `table` on `lattice`.
///
/// For a materialized lattice every element must be present. Pairwise additivity on
/// disjoint elements is equivalent to each element carrying the sum of its generators,
/// which is what is checked; each offending element is reported once.
pub fn check_additivity(table: &MeasureTable, lattice: &BooleanSublattice) -> Result<Vec<AdditivityViolation>> {
    check_additivity_with_tol(table, lattice, NUMERIC_TOL)
}

pub fn check_additivity_with_tol(
    table: &MeasureTable,
    lattice: &BooleanSublattice,
    tol: f64,
) -> Result<Vec<AdditivityViolation>> {
    let gens: Vec<f64> = lattice
        .generators()
        .iter()
        .map(|g| table.get(g).ok_or_else(|| Error::IncompleteMeasure(g.to_string())))
        .collect::<Result<_>>()?;
    let top = lattice.top();
    let top_value = table
        .get(&top)
        .ok_or_else(|| Error::IncompleteMeasure(top.to_string()))?;

    let mut violations = Vec::new();
    let mut check = |e: &CellSet, value: f64| {
        let parts = lattice.decompose(e);
        if let Some(parts) = parts {
            if e.is_empty() {
                if value.abs() > tol {
                    violations.push(AdditivityViolation::Zero { value });
                }
            } else if e == &top {
                let expected: f64 = gens.iter().sum();
                if (value - 1.0).abs() > tol {
                    violations.push(AdditivityViolation::Normalization { value });
                } else if parts.len() > 1 && (value - expected).abs() > tol {
                    violations.push(AdditivityViolation::Additivity {
                        element: e.clone(),
                        value,
                        expected,
                    });
                }
            } else if parts.len() > 1 {
                let expected: f64 = parts.iter().map(|&i| gens[i]).sum();
                if (value - expected).abs() > tol {
                    violations.push(AdditivityViolation::Additivity {
                        element: e.clone(),
                        value,
                        expected,
                    });
                }
            }
        }
    };

    match lattice.elements() {
        Some(elems) => {
            for e in elems {
                let v = table
                    .get(e)
                    .ok_or_else(|| Error::IncompleteMeasure(e.to_string()))?;
                check(e, v);
            }
        }
        None => {
            for (e, v) in table.iter() {
                if !lattice.contains(e) {
                    return Err(Error::Domain(format!("{e} is not a lattice element")));
                }
                check(e, v);
            }
        }
    }
    if top_value.is_nan() {
        return Err(Error::Domain("NaN measure".into()));
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::lattice::{sublattice_from_graining, CoarseGraining};

    fn lattice(sizes: &[usize]) -> BooleanSublattice {
        sublattice_from_graining(&CoarseGraining::from_block_sizes(sizes).unwrap()).unwrap()
    }

    #[test]
    fn born_tables_are_additive() {
        let l = lattice(&[1, 2, 1]);
        let psi = StateVector::from_real(&[0.3, -1.2, 0.5, 2.0]).unwrap();
        let t = MeasureTable::born(&psi, &l).unwrap();
        assert!(check_additivity(&t, &l).unwrap().is_empty());
    }

    #[test]
    fn constructed_violation_reported_once() {
        let l = lattice(&[1, 1, 1]);
        let mut t = MeasureTable::additive_extension(&l, &[0.5, 0.5, 0.0]).unwrap();
        t.insert(CellSet::new([0, 1]), 0.9).unwrap();
        let v = check_additivity(&t, &l).unwrap();
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], AdditivityViolation::Additivity { element, .. } if *element == CellSet::new([0, 1])));
    }

    #[test]
    fn uniform_generators_pass_only_when_extended() {
        let l = lattice(&[2, 1, 1, 3]);
        let k = l.num_generators();
        let uniform = vec![1.0 / k as f64; k];
        let mut sparse = MeasureTable::new();
        for g in l.generators() {
            sparse.insert(g.clone(), 1.0 / k as f64).unwrap();
        }
        sparse.insert(l.top(), 1.0).unwrap();
        assert!(matches!(check_additivity(&sparse, &l), Err(Error::IncompleteMeasure(_))));

        let extended = MeasureTable::additive_extension(&l, &uniform).unwrap();
        // oracle: every union of j generators must read j/k
        for e in l.elements().unwrap() {
            let j = l.decompose(e).unwrap().len();
            assert!((extended.get(e).unwrap() - j as f64 / k as f64).abs() < 1e-12);
        }
        assert!(check_additivity(&extended, &l).unwrap().is_empty());
    }

    #[test]
    fn normalization_violation() {
        let l = lattice(&[1, 1]);
        let t = MeasureTable::additive_extension(&l, &[0.2, 0.2]).unwrap();
        let v = check_additivity(&t, &l).unwrap();
        assert_eq!(v, vec![AdditivityViolation::Normalization { value: 0.4 }]);
    }

    #[test]
    fn missing_generator_is_incomplete() {
        let l = lattice(&[1, 1]);
        let t = MeasureTable::new();
        assert!(matches!(check_additivity(&t, &l), Err(Error::IncompleteMeasure(_))));
    }
}
