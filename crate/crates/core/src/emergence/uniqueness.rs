//! Assembles the linear constraints invariance, stability and normalization impose on
//! generator values across a family of grainings, and decides whether they pin the
//! measure down.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::lemmas::transposition_residual;
use crate::error::{Error, Result};
use crate::hilbert::{born_weight, CellSet, GrainingFamily, MeasureTable, Projector, StateVector};
use crate::linsys::{LinearSystem, Solution};

/// Relative tolerance for treating two cell masses as equal.
pub const MASS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCounts {
    pub normalization: usize,
    pub stability: usize,
    pub invariance: usize,
    /// Phase unitaries map every generator to itself, so their constraints are identities.
    pub phase_identities: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UniquenessOutcome {
    Unique {
        table: MeasureTable,
        /// Largest deviation from the Born values.
        born_deviation: f64,
    },
    Underdetermined {
        nullity: usize,
        /// Two distinct solutions of every constraint.
        witnesses: [Vec<(CellSet, f64)>; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub unknowns: Vec<CellSet>,
    pub counts: ConstraintCounts,
    pub rank: usize,
    /// Largest residual of the locally built transposition unitaries.
    pub invariance_residual: f64,
    pub outcome: UniquenessOutcome,
}

impl UniquenessReport {
    pub fn is_unique(&self) -> bool {
        matches!(self.outcome, UniquenessOutcome::Unique { .. })
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Solves the constraint system over the values of every block of every graining.
pub fn measure_uniqueness_solve(psi: &StateVector, family: &GrainingFamily) -> Result<UniquenessReport> {
    let dim = family.dim();
    if psi.dim() != dim {
        return Err(Error::Dimension { expected: dim, found: psi.dim() });
    }
    let psi = psi.normalized()?;
    let mut index: BTreeMap<CellSet, usize> = BTreeMap::new();
    for g in family.grainings() {
        for b in g.blocks() {
            let next = index.len();
            index.entry(b).or_insert(next);
        }
    }
    let mut unknowns = vec![CellSet::empty(); index.len()];
    for (cells, &i) in &index {
        unknowns[i] = cells.clone();
    }
    let mass = |c: &CellSet| -> f64 { c.cells().iter().map(|&i| psi.as_slice()[i].norm_sqr()).sum() };
    let one = || BigRational::one();
    let mut sys = LinearSystem::<BigRational>::new(unknowns.len());
    let mut counts = ConstraintCounts::default();

    for g in family.grainings() {
        let coeffs: Vec<(usize, BigRational)> = g.blocks().iter().map(|b| (index[b], one())).collect();
        sys.push(&coeffs, one());
        counts.normalization += 1;
        counts.phase_identities += g.num_blocks();
    }

    let gs = family.grainings();
    for i in 0..gs.len() {
        for j in i + 1..gs.len() {
            let common = gs[i].join(&gs[j])?;
            for shared in common.blocks() {
                let mut coeffs: Vec<(usize, BigRational)> = Vec::new();
                for b in gs[i].blocks().into_iter().filter(|b| b.is_subset(&shared)) {
                    coeffs.push((index[&b], one()));
                }
                for b in gs[j].blocks().into_iter().filter(|b| b.is_subset(&shared)) {
                    coeffs.push((index[&b], -one()));
                }
                // Shared blocks cancel to an identity; skip those rows.
                let mut net: BTreeMap<usize, BigRational> = BTreeMap::new();
                for (k, c) in coeffs {
                    *net.entry(k).or_insert_with(BigRational::zero) += c;
                }
                let row: Vec<(usize, BigRational)> = net.into_iter().filter(|(_, c)| !c.is_zero()).collect();
                if !row.is_empty() {
                    sys.push(&row, BigRational::zero());
                    counts.stability += 1;
                }
            }
        }
    }

    let mut parent: Vec<usize> = (0..unknowns.len()).collect();
    let mut invariance_residual = 0.0f64;
    for g in gs {
        let blocks = g.blocks();
        for a in 0..blocks.len() {
            for b in a + 1..blocks.len() {
                let (x, y) = (&blocks[a], &blocks[b]);
                if x.len() != y.len() || (mass(x) - mass(y)).abs() > MASS_TOL {
                    continue;
                }
                let (ix, iy) = (index[x], index[y]);
                let (rx, ry) = (find(&mut parent, ix), find(&mut parent, iy));
                if rx == ry {
                    continue;
                }
                let r = transposition_residual(&psi, x, y)?.expect("equal ranks");
                invariance_residual = invariance_residual.max(r);
                parent[rx] = ry;
                sys.push(&[(ix, one()), (iy, -one())], BigRational::zero());
                counts.invariance += 1;
            }
        }
    }

    let born: Vec<f64> = unknowns
        .iter()
        .map(|c| born_weight(&psi, &Projector::cells(dim, c.clone())?))
        .collect::<Result<_>>()?;
    let rank;
    let outcome = match sys.solve(0.0) {
        Solution::Inconsistent { constraints } => return Err(Error::Inconsistent { constraints }),
        Solution::Unique(x) => {
            rank = unknowns.len();
            let mut table = MeasureTable::new();
            let mut dev = 0.0f64;
            for ((c, v), b) in unknowns.iter().zip(&x).zip(&born) {
                let v = v.to_f64().unwrap_or(f64::NAN);
                dev = dev.max((v - b).abs());
                table.insert(c.clone(), v)?;
            }
            UniquenessOutcome::Unique {
                table,
                born_deviation: dev,
            }
        }
        Solution::Underdetermined { null_basis, .. } => {
            rank = unknowns.len() - null_basis.len();
            let n: Vec<f64> = null_basis[0].iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
            let t = witness_step(&born, &n);
            let moved: Vec<f64> = born.iter().zip(&n).map(|(b, d)| b + t * d).collect();
            let pair = |v: &[f64]| unknowns.iter().cloned().zip(v.iter().copied()).collect::<Vec<_>>();
            UniquenessOutcome::Underdetermined {
                nullity: null_basis.len(),
                witnesses: [pair(&born), pair(&moved)],
            }
        }
    };
    Ok(UniquenessReport {
        unknowns,
        counts,
        rank,
        invariance_residual,
        outcome,
    })
}

/// Step along `dir` from the Born point that keeps values in `[0, 1]` when possible.
fn witness_step(base: &[f64], dir: &[f64]) -> f64 {
    let reach = |sign: f64| -> f64 {
        base.iter()
            .zip(dir)
            .filter(|(_, d)| d.abs() > 0.0)
            .map(|(b, d)| {
                let d = sign * d;
                if d > 0.0 { (1.0 - b) / d } else { b / -d }
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (up, down) = (reach(1.0), reach(-1.0));
    let scale = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if up >= down && up > 0.0 {
        up / 2.0
    } else if down > 0.0 {
        -down / 2.0
    } else {
        1.0 / (2.0 * scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::CoarseGraining;

    #[test]
    fn two_cells_equal_amplitude() {
        let psi = StateVector::from_real(&[1.0, 1.0]).unwrap();
        let f = GrainingFamily::new(vec![CoarseGraining::unit_cells(2).unwrap()]).unwrap();
        let r = measure_uniqueness_solve(&psi, &f).unwrap();
        let UniquenessOutcome::Unique { table, born_deviation } = &r.outcome else { panic!() };
        assert_eq!(table.get(&CellSet::new([0])), Some(0.5));
        assert!(*born_deviation < 1e-15);
    }

    #[test]
    fn refinement_pins_unequal_masses() {
        let psi = StateVector::from_real(&[1.0; 4]).unwrap();
        let coarse = CoarseGraining::from_block_sizes(&[2, 1, 1]).unwrap();
        let fine = CoarseGraining::unit_cells(4).unwrap();
        let f = GrainingFamily::new(vec![coarse.clone(), fine]).unwrap();
        let r = measure_uniqueness_solve(&psi, &f).unwrap();
        let UniquenessOutcome::Unique { table, born_deviation } = &r.outcome else { panic!("{r:?}") };
        assert_eq!(table.get(&CellSet::new([0, 1])), Some(0.5));
        assert_eq!(table.get(&CellSet::new([2])), Some(0.25));
        assert!(*born_deviation < 1e-12);
        assert!(r.counts.stability >= 1 && r.counts.invariance >= 1);

        let only = GrainingFamily::new(vec![coarse]).unwrap();
        let r = measure_uniqueness_solve(&psi, &only).unwrap();
        let UniquenessOutcome::Underdetermined { nullity, witnesses } = &r.outcome else { panic!() };
        assert!(*nullity >= 1);
        assert_ne!(witnesses[0], witnesses[1]);
        for w in witnesses {
            let total: f64 = w.iter().map(|(_, v)| v).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|(_, v)| (0.0..=1.0).contains(v)));
        }
    }
}
