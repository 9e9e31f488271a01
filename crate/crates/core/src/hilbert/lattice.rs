use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::projector::{CellSet, Projector};
use crate::error::{Error, Result};

/// Sublattices with more generators than this are never materialized eagerly.
pub const MATERIALIZE_LIMIT: usize = 20;

/// Partition of the cell grid `{0..d-1}` into contiguous nonempty blocks.
///
/// Stored as the ascending cut points `0 = c_0 < c_1 < ... < c_k = d`; block `i`
/// covers `c_i..c_{i+1}`. Optional per-cell volumes give the grid its geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseGraining {
    cuts: Vec<usize>,
    volumes: Option<Vec<f64>>,
}

impl CoarseGraining {
    pub fn from_cuts(cuts: Vec<usize>) -> Result<Self> {
        if cuts.len() < 2 || cuts[0] != 0 {
            return Err(Error::InvalidGraining("cuts must start at 0 and contain the end".into()));
        }
        for w in cuts.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidGraining(format!(
                    "empty block between cuts {} and {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { cuts, volumes: None })
    }

    pub fn from_block_sizes(sizes: &[usize]) -> Result<Self> {
        let mut cuts = vec![0];
        for &s in sizes {
            if s == 0 {
                return Err(Error::InvalidGraining("empty block".into()));
            }
            cuts.push(cuts.last().unwrap() + s);
        }
        Self::from_cuts(cuts)
    }

    /// Builds a graining from explicit blocks, checking disjointness, coverage and
    /// contiguity.
    pub fn from_blocks(dim: usize, blocks: &[CellSet]) -> Result<Self> {
        let mut sorted: Vec<&CellSet> = blocks.iter().collect();
        if sorted.iter().any(|b| b.is_empty()) {
            return Err(Error::InvalidGraining("empty block".into()));
        }
        sorted.sort_by_key(|b| b.cells()[0]);
        let mut cuts = vec![0];
        for b in sorted {
            let start = *cuts.last().unwrap();
            let cells = b.cells();
            if cells[0] != start {
                return Err(Error::InvalidGraining(format!(
                    "blocks leave gaps or overlap near cell {start}"
                )));
            }
            if cells.windows(2).any(|w| w[1] != w[0] + 1) {
                return Err(Error::InvalidGraining(format!("block {b} is not contiguous")));
            }
            cuts.push(start + cells.len());
        }
        if *cuts.last().unwrap() != dim {
            return Err(Error::InvalidGraining(format!(
                "blocks cover {} of {dim} cells",
                cuts.last().unwrap()
            )));
        }
        Self::from_cuts(cuts)
    }

    pub fn unit_cells(dim: usize) -> Result<Self> {
        Self::from_cuts((0..=dim).collect())
    }

    pub fn trivial(dim: usize) -> Result<Self> {
        Self::from_cuts(vec![0, dim])
    }

    pub fn with_volumes(mut self, volumes: Vec<f64>) -> Result<Self> {
        if volumes.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: volumes.len(),
            });
        }
        if volumes.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidGraining("cell volumes must be positive".into()));
        }
        self.volumes = Some(volumes);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        *self.cuts.last().unwrap()
    }

    pub fn num_blocks(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn cuts(&self) -> &[usize] {
        &self.cuts
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        self.cuts[i]..self.cuts[i + 1]
    }

    pub fn block(&self, i: usize) -> CellSet {
        CellSet::range(self.cuts[i], self.cuts[i + 1])
    }

    pub fn blocks(&self) -> Vec<CellSet> {
        (0..self.num_blocks()).map(|i| self.block(i)).collect()
    }

    pub fn block_projector(&self, i: usize) -> Projector {
        Projector::Cells {
            dim: self.dim(),
            cells: self.block(i),
        }
    }

    pub fn block_of_cell(&self, cell: usize) -> Option<usize> {
        if cell >= self.dim() {
            return None;
        }
        Some(self.cuts.partition_point(|&c| c <= cell) - 1)
    }

    /// Index of the block equal to `cells`, if any.
    pub fn find_block(&self, cells: &CellSet) -> Option<usize> {
        let first = *cells.cells().first()?;
        let i = self.block_of_cell(first)?;
        (self.block(i) == *cells).then_some(i)
    }

    /// Per-cell volumes; unit volumes when none were supplied.
    pub fn volumes(&self) -> Vec<f64> {
        self.volumes
            .clone()
            .unwrap_or_else(|| vec![1.0; self.dim()])
    }

    pub fn has_volumes(&self) -> bool {
        self.volumes.is_some()
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &CoarseGraining) -> bool {
        self.dim() == coarser.dim() && coarser.cuts.iter().all(|c| self.cuts.binary_search(c).is_ok())
    }

    /// Finest common coarsening: blocks that are unions of blocks of both grainings.
    pub fn join(&self, other: &CoarseGraining) -> Result<CoarseGraining> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let cuts: Vec<usize> = self
            .cuts
            .iter()
            .copied()
            .filter(|c| other.cuts.binary_search(c).is_ok())
            .collect();
        CoarseGraining::from_cuts(cuts)
    }

    /// Coarsest common refinement.
    pub fn meet(&self, other: &CoarseGraining) -> Result<CoarseGraining> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let mut cuts: Vec<usize> = self.cuts.iter().chain(other.cuts.iter()).copied().collect();
        cuts.sort_unstable();
        cuts.dedup();
        CoarseGraining::from_cuts(cuts)
    }
}

/// The finite stand-in for arbitrarily fine grainings: an `n`-dimensional
/// configuration space whose cells may be halved `halvings` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub config_dim: u32,
    pub halvings: u32,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            config_dim: 1,
            halvings: 20,
        }
    }
}

impl Resolution {
    /// Sub-cells available inside one grid cell, saturating at `u64::MAX`.
    pub fn subcells_per_cell(&self) -> u64 {
        let per_level = 1u64.checked_shl(self.config_dim).unwrap_or(u64::MAX);
        let mut total: u64 = 1;
        for _ in 0..self.halvings {
            total = total.saturating_mul(per_level);
        }
        total
    }
}

/// A family of grainings of one grid, ordered by refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrainingFamily {
    grainings: Vec<CoarseGraining>,
    pub resolution: Resolution,
}

impl GrainingFamily {
    pub fn new(grainings: Vec<CoarseGraining>) -> Result<Self> {
        let dim = grainings
            .first()
            .map(|g| g.dim())
            .ok_or_else(|| Error::InvalidGraining("empty family".into()))?;
        if let Some(g) = grainings.iter().find(|g| g.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: g.dim(),
            });
        }
        let mut unique: Vec<CoarseGraining> = Vec::new();
        for g in grainings {
            if !unique.iter().any(|u| u.cuts == g.cuts) {
                unique.push(g);
            }
        }
        Ok(Self {
            grainings: unique,
            resolution: Resolution::default(),
        })
    }

    pub fn with_resolution(mut self, resolution: Resolution) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn dim(&self) -> usize {
        self.grainings[0].dim()
    }

    pub fn grainings(&self) -> &[CoarseGraining] {
        &self.grainings
    }

    pub fn len(&self) -> usize {
        self.grainings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grainings.is_empty()
    }

    /// `order[i][j]` is true when graining `i` refines graining `j`.
    pub fn refinement_order(&self) -> Vec<Vec<bool>> {
        self.grainings
            .iter()
            .map(|a| self.grainings.iter().map(|b| a.refines(b)).collect())
            .collect()
    }

    pub fn contains(&self, g: &CoarseGraining) -> bool {
        self.grainings.iter().any(|x| x.cuts == g.cuts)
    }
}

/// The Boolean algebra generated by the block projectors of a graining.
///
/// Elements are identified with bitmasks over the generators; they are only
/// materialized when there are at most [`MATERIALIZE_LIMIT`] generators.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanSublattice {
    dim: usize,
    generators: Vec<CellSet>,
    materialized: Option<Vec<CellSet>>,
}

impl BooleanSublattice {
    /// The sublattice generated by disjoint, nonempty cell sets covering `0..dim`.
    /// Generators need not be contiguous.
    pub fn from_generators(dim: usize, generators: Vec<CellSet>) -> Result<Self> {
        let mut seen = vec![false; dim];
        for g in &generators {
            if g.is_empty() {
                return Err(Error::InvalidGraining("empty generator".into()));
            }
            for &c in g.cells() {
                if c >= dim || seen[c] {
                    return Err(Error::InvalidGraining(format!(
                        "cell {c} out of range or in two generators"
                    )));
                }
                seen[c] = true;
            }
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidGraining(format!("cell {c} not covered")));
        }
        let mut lattice = BooleanSublattice {
            dim,
            generators,
            materialized: None,
        };
        if lattice.generators.len() <= MATERIALIZE_LIMIT {
            lattice.materialized = Some(lattice.iter_elements().collect());
        }
        Ok(lattice)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[CellSet] {
        &self.generators
    }

    pub fn generator_projectors(&self) -> Vec<Projector> {
        self.generators
            .iter()
            .map(|g| Projector::Cells {
                dim: self.dim,
                cells: g.clone(),
            })
            .collect()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    /// `2^k`, or `None` when that overflows `u128`.
    pub fn element_count(&self) -> Option<u128> {
        1u128.checked_shl(self.generators.len() as u32)
    }

    pub fn elements(&self) -> Option<&[CellSet]> {
        self.materialized.as_deref()
    }

    /// Union of the generators selected by `mask`.
    pub fn element(&self, mask: u128) -> CellSet {
        CellSet::new(
            self.generators
                .iter()
                .enumerate()
                .filter(|(i, _)| *i < 128 && mask >> i & 1 == 1)
                .flat_map(|(_, g)| g.cells().iter().copied()),
        )
    }

    /// Lazily enumerates all elements in mask order (only sensible for small `k`).
    pub fn iter_elements(&self) -> impl Iterator<Item = CellSet> + '_ {
        let count = self.element_count().unwrap_or(u128::MAX);
        (0..count).map(move |m| self.element(m))
    }

    /// Generator indices composing `set`, or `None` if `set` is not in the lattice.
    pub fn decompose(&self, set: &CellSet) -> Option<Vec<usize>> {
        let mut parts = Vec::new();
        let mut covered = 0;
        for (i, g) in self.generators.iter().enumerate() {
            if g.is_subset(set) {
                parts.push(i);
                covered += g.len();
            } else if !g.is_disjoint(set) {
                return None;
            }
        }
        (covered == set.len()).then_some(parts)
    }

    pub fn contains(&self, set: &CellSet) -> bool {
        self.decompose(set).is_some()
    }

    pub fn meet(&self, a: &CellSet, b: &CellSet) -> CellSet {
        CellSet::new(a.cells().iter().copied().filter(|c| b.contains(*c)))
    }

    pub fn join(&self, a: &CellSet, b: &CellSet) -> CellSet {
        a.union(b)
    }

    pub fn complement(&self, a: &CellSet) -> CellSet {
        a.complement(self.dim)
    }

    pub fn top(&self) -> CellSet {
        CellSet::range(0, self.dim)
    }
}

/// The Boolean sublattice generated by the blocks of `graining`.
pub fn sublattice_from_graining(graining: &CoarseGraining) -> Result<BooleanSublattice> {
    let generators = graining.blocks();
    if generators.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidGraining("empty block".into()));
    }
    let mut lattice = BooleanSublattice {
        dim: graining.dim(),
        generators,
        materialized: None,
    };
    if lattice.generators.len() <= MATERIALIZE_LIMIT {
        lattice.materialized = Some(lattice.iter_elements().collect());
    }
    Ok(lattice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::state::{c, CMatrix};

    #[test]
    fn unit_generators() {
        let g = CoarseGraining::unit_cells(2).unwrap();
        let l = sublattice_from_graining(&g).unwrap();
        let gens = l.generator_projectors();
        let mut d0 = CMatrix::zeros(2, 2);
        d0[(0, 0)] = c(1.0, 0.0);
        let mut d1 = CMatrix::zeros(2, 2);
        d1[(1, 1)] = c(1.0, 0.0);
        assert_eq!(gens[0].to_matrix(), d0);
        assert_eq!(gens[1].to_matrix(), d1);
    }

    #[test]
    fn two_block_generators() {
        let g = CoarseGraining::from_blocks(3, &[CellSet::new([0, 1]), CellSet::new([2])]).unwrap();
        let l = sublattice_from_graining(&g).unwrap();
        let m0 = l.generator_projectors()[0].to_matrix();
        assert_eq!(m0[(0, 0)], c(1.0, 0.0));
        assert_eq!(m0[(1, 1)], c(1.0, 0.0));
        assert_eq!(m0[(2, 2)], c(0.0, 0.0));
        let sum = l
            .generator_projectors()
            .iter()
            .fold(CMatrix::zeros(3, 3), |acc, p| acc + p.to_matrix());
        assert_eq!(sum, CMatrix::identity(3, 3));
    }

    #[test]
    fn three_blocks_give_eight_elements() {
        let g = CoarseGraining::from_block_sizes(&[1, 2, 1]).unwrap();
        let l = sublattice_from_graining(&g).unwrap();
        // oracle: enumerate all unions of generators by brute force
        let gens = g.blocks();
        let mut unions = std::collections::BTreeSet::new();
        for mask in 0..8u32 {
            let mut cells = Vec::new();
            for (i, b) in gens.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    cells.extend_from_slice(b.cells());
                }
            }
            unions.insert(CellSet::new(cells));
        }
        assert_eq!(unions.len(), 8);
        let elems: std::collections::BTreeSet<_> = l.elements().unwrap().iter().cloned().collect();
        assert_eq!(elems, unions);
        assert!(elems.contains(&CellSet::empty()));
        assert!(elems.contains(&CellSet::range(0, 4)));
    }

    #[test]
    fn lattice_operations_closed() {
        let g = CoarseGraining::from_block_sizes(&[2, 1, 3]).unwrap();
        let l = sublattice_from_graining(&g).unwrap();
        let elems = l.elements().unwrap().to_vec();
        for a in &elems {
            assert!(l.contains(&l.complement(a)));
            for b in &elems {
                assert!(l.contains(&l.meet(a, b)));
                assert!(l.contains(&l.join(a, b)));
            }
        }
        assert!(!l.contains(&CellSet::new([0])));
    }

    #[test]
    fn large_lattices_stay_lazy() {
        let g = CoarseGraining::unit_cells(24).unwrap();
        let l = sublattice_from_graining(&g).unwrap();
        assert!(l.elements().is_none());
        assert_eq!(l.element_count(), Some(1 << 24));
        assert_eq!(l.element(0b101), CellSet::new([0, 2]));
    }

    #[test]
    fn graining_validation() {
        assert!(CoarseGraining::from_block_sizes(&[1, 0, 2]).is_err());
        assert!(CoarseGraining::from_blocks(3, &[CellSet::new([0, 2]), CellSet::new([1])]).is_err());
        assert!(CoarseGraining::from_blocks(3, &[CellSet::new([0])]).is_err());
        assert!(CoarseGraining::from_blocks(2, &[CellSet::new([0]), CellSet::empty()]).is_err());
    }

    #[test]
    fn refinement_join_meet() {
        let fine = CoarseGraining::unit_cells(4).unwrap();
        let coarse = CoarseGraining::from_block_sizes(&[2, 1, 1]).unwrap();
        let other = CoarseGraining::from_block_sizes(&[1, 3]).unwrap();
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
        assert_eq!(coarse.join(&other).unwrap().cuts(), &[0, 4]);
        assert_eq!(coarse.meet(&other).unwrap().cuts(), &[0, 1, 2, 3, 4]);
        let fam = GrainingFamily::new(vec![coarse, fine]).unwrap();
        let order = fam.refinement_order();
        assert!(order[1][0] && !order[0][1] && order[0][0]);
        assert_eq!(fam.len(), 2);
    }

    #[test]
    fn resolution_counts() {
        let r = Resolution { config_dim: 3, halvings: 2 };
        assert_eq!(r.subcells_per_cell(), 64);
        let huge = Resolution { config_dim: 10, halvings: 10 };
        assert_eq!(huge.subcells_per_cell(), u64::MAX);
    }
}
