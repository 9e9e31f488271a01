//! Equal-mass refinement of coarse-graining blocks on a cell grid.
//!
//! A cell carrying amplitude `a` and volume `v` that is cut at volume fraction `t`
//! becomes two cells with amplitudes `a sqrt(t)`, `a sqrt(1-t)` and volumes `v t`,
//! `v (1-t)`: the state is taken uniform inside a cell, and the split is an
//! isometric embedding of the coarse grid into the fine one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CellSet, CoarseGraining, Resolution, StateVector, C64};

/// Cut positions closer than this fraction of the block mass to a cell boundary snap
/// onto the boundary.
const SNAP: f64 = 1e-12;

/// Masses `|a_i|^2` of the cells of a state, in an orthonormal cell basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassProfile {
    pub masses: Vec<f64>,
    pub total: f64,
}

impl MassProfile {
    pub fn of(psi: &StateVector) -> Result<Self> {
        psi.ensure_nonzero()?;
        let masses: Vec<f64> = psi.as_slice().iter().map(|a| a.norm_sqr()).collect();
        let total = masses.iter().sum();
        Ok(Self { masses, total })
    }

    /// Masses `|f(x_i)|^2 v_i` of a sampled wavefunction on cells of volume `v_i`.
    pub fn from_samples(samples: &[C64], volumes: &[f64]) -> Result<Self> {
        if samples.len() != volumes.len() {
            return Err(Error::Dimension { expected: samples.len(), found: volumes.len() });
        }
        let masses: Vec<f64> = samples.iter().zip(volumes).map(|(a, v)| a.norm_sqr() * v).collect();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidState("profile has no mass".into()));
        }
        Ok(Self { masses, total })
    }

    pub fn block_mass(&self, cells: &CellSet) -> f64 {
        cells.cells().iter().map(|&c| self.masses[c]).sum()
    }
}

/// Amplitudes with the unit-volume square-root weighting of [`MassProfile::from_samples`].
pub fn amplitudes_from_samples(samples: &[C64], volumes: &[f64]) -> Result<StateVector> {
    if samples.len() != volumes.len() {
        return Err(Error::Dimension { expected: samples.len(), found: volumes.len() });
    }
    StateVector::new(samples.iter().zip(volumes).map(|(a, v)| a * v.sqrt()).collect())
}

#[derive(Debug, Clone, Copy)]
struct GridCell {
    origin: usize,
    amp: C64,
    volume: f64,
}

/// A refinable cell grid with a current partition into contiguous pieces.
#[derive(Debug, Clone)]
pub(crate) struct Grid {
    cells: Vec<GridCell>,
    cuts: Vec<usize>,
    coarse: CoarseGraining,
    available: u64,
}

impl Grid {
    pub(crate) fn new(psi: &StateVector, graining: &CoarseGraining, resolution: Resolution) -> Result<Self> {
        if psi.dim() != graining.dim() {
            return Err(Error::Dimension { expected: graining.dim(), found: psi.dim() });
        }
        let volumes = graining.volumes();
        let cells = psi
            .as_slice()
            .iter()
            .zip(&volumes)
            .enumerate()
            .map(|(origin, (&amp, &volume))| GridCell { origin, amp, volume })
            .collect();
        Ok(Self {
            cells,
            cuts: graining.cuts().to_vec(),
            coarse: graining.clone(),
            available: resolution.subcells_per_cell(),
        })
    }

    pub(crate) fn piece_range(&self, i: usize) -> std::ops::Range<usize> {
        self.cuts[i]..self.cuts[i + 1]
    }

    fn mass(&self, r: std::ops::Range<usize>) -> f64 {
        self.cells[r].iter().map(|c| c.amp.norm_sqr()).sum()
    }

    fn split(&mut self, i: usize, t: f64) {
        let c = self.cells[i];
        let first = GridCell {
            origin: c.origin,
            amp: c.amp * t.sqrt(),
            volume: c.volume * t,
        };
        let second = GridCell {
            origin: c.origin,
            amp: c.amp * (1.0 - t).sqrt(),
            volume: c.volume * (1.0 - t),
        };
        self.cells[i] = first;
        self.cells.insert(i + 1, second);
        for cut in self.cuts.iter_mut() {
            if *cut > i {
                *cut += 1;
            }
        }
    }

    /// Cuts piece `p` into `m` pieces of equal mass (equal volume if it has no mass).
    /// Returns the piece indices of the new pieces and the cut positions as block
    /// volume fractions.
    pub(crate) fn refine_piece(&mut self, p: usize, m: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        if m == 0 {
            return Err(Error::Domain("cannot split into zero pieces".into()));
        }
        let range = self.piece_range(p);
        let total_mass = self.mass(range.clone());
        let by_volume = !(total_mass > 0.0);
        let weight = |c: &GridCell| if by_volume { c.volume } else { c.amp.norm_sqr() };
        let total: f64 = self.cells[range.clone()].iter().map(weight).sum();
        let block_volume: f64 = self.cells[range.clone()].iter().map(|c| c.volume).sum();
        let start = range.start;
        let snap = SNAP * total;
        let mut new_cuts = Vec::with_capacity(m - 1);
        let mut fractions = Vec::with_capacity(m - 1);
        let mut i = start;
        let mut acc = 0.0;
        let mut vol_acc = 0.0;
        for k in 1..m {
            let target = total * k as f64 / m as f64;
            loop {
                let c = self.cells[i];
                let w = weight(&c);
                if target - acc <= snap {
                    new_cuts.push(i);
                    break;
                }
                if acc + w < target - snap {
                    acc += w;
                    vol_acc += c.volume;
                    i += 1;
                    continue;
                }
                if (acc + w - target).abs() <= snap {
                    acc += w;
                    vol_acc += c.volume;
                    i += 1;
                    new_cuts.push(i);
                    break;
                }
                let t = (target - acc) / w;
                self.split(i, t);
                acc += w * t;
                vol_acc += c.volume * t;
                i += 1;
                new_cuts.push(i);
                break;
            }
            fractions.push(vol_acc / block_volume);
        }
        let pos = p + 1;
        for (k, c) in new_cuts.into_iter().enumerate() {
            self.cuts.insert(pos + k, c);
        }
        self.check_resolution()?;
        Ok(((p..p + m).collect(), fractions))
    }

    /// Splits cells of the given pieces in half until all have the same cell count.
    pub(crate) fn equalize(&mut self, pieces: &[usize]) -> Result<usize> {
        let target = pieces.iter().map(|&p| self.piece_range(p).len()).max().unwrap_or(0);
        for &p in pieces {
            while self.piece_range(p).len() < target {
                let r = self.piece_range(p);
                let widest = r
                    .clone()
                    .max_by(|&a, &b| self.cells[a].volume.total_cmp(&self.cells[b].volume).then(b.cmp(&a)))
                    .expect("nonempty piece");
                self.split(widest, 0.5);
            }
        }
        self.check_resolution()?;
        Ok(target)
    }

    fn check_resolution(&self) -> Result<()> {
        let mut counts = vec![0u64; self.coarse.dim()];
        for c in &self.cells {
            counts[c.origin] += 1;
        }
        let required = counts.into_iter().max().unwrap_or(0);
        if required > self.available {
            return Err(Error::Resolution { required, available: self.available });
        }
        Ok(())
    }

    pub(crate) fn state(&self) -> Result<StateVector> {
        StateVector::new(self.cells.iter().map(|c| c.amp).collect())
    }

    pub(crate) fn volumes(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.volume).collect()
    }

    pub(crate) fn origin(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.origin).collect()
    }

    pub(crate) fn fine(&self) -> Result<CoarseGraining> {
        CoarseGraining::from_cuts(self.cuts.clone())?.with_volumes(self.volumes())
    }

    /// The original graining expressed on the refined grid.
    pub(crate) fn coarse(&self) -> Result<CoarseGraining> {
        let mut cuts = vec![0];
        for (i, w) in self.cells.windows(2).enumerate() {
            if self.coarse.block_of_cell(w[0].origin) != self.coarse.block_of_cell(w[1].origin) {
                cuts.push(i + 1);
            }
        }
        cuts.push(self.cells.len());
        CoarseGraining::from_cuts(cuts)?.with_volumes(self.volumes())
    }

    pub(crate) fn piece_cells(&self, p: usize) -> CellSet {
        let r = self.piece_range(p);
        CellSet::range(r.start, r.end)
    }
}

/// Result of splitting one block into equal-mass pieces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refinement {
    /// The state on the refined grid.
    pub state: StateVector,
    pub volumes: Vec<f64>,
    /// Original cell of each refined cell.
    pub origin: Vec<usize>,
    /// The input graining on the refined grid.
    pub coarse: CoarseGraining,
    /// The input graining with the chosen block replaced by its pieces.
    pub fine: CoarseGraining,
    pub pieces: Vec<CellSet>,
    /// Unnormalized masses `|P_j psi|^2` of the pieces.
    pub piece_masses: Vec<f64>,
    /// Cut positions as fractions of the block volume.
    pub cut_fractions: Vec<f64>,
}

/// Splits block `block` of `graining` into `m` disjoint pieces of equal mass under `psi`.
pub fn equal_mass_refine(
    psi: &StateVector,
    graining: &CoarseGraining,
    block: usize,
    m: usize,
    resolution: Resolution,
) -> Result<Refinement> {
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    if block >= graining.num_blocks() {
        return Err(Error::Index { index: block, len: graining.num_blocks() });
    }
    let mut grid = Grid::new(psi, graining, resolution)?;
    let (pieces, cut_fractions) = grid.refine_piece(block, m)?;
    let state = grid.state()?;
    let pieces: Vec<CellSet> = pieces.iter().map(|&p| grid.piece_cells(p)).collect();
    let piece_masses = pieces
        .iter()
        .map(|p| p.cells().iter().map(|&c| state.as_slice()[c].norm_sqr()).sum())
        .collect();
    Ok(Refinement {
        coarse: grid.coarse()?,
        fine: grid.fine()?,
        volumes: grid.volumes(),
        origin: grid.origin(),
        state,
        pieces,
        piece_masses,
        cut_fractions,
    })
}

/// Number of half-scale sub-cells of an `n`-cube: `2^n`.
pub fn hypercube_split_count(n: i64) -> Result<u64> {
    if n <= 0 {
        return Err(Error::Domain(format!("configuration dimension must be positive, got {n}")));
    }
    if n >= 64 {
        return Err(Error::Size(format!("2^{n} overflows a 64-bit count")));
    }
    Ok(1u64 << n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{born_weight, Projector};

    #[test]
    fn uniform_block_quarters() {
        let psi = StateVector::from_real(&[1.0; 8]).unwrap();
        let g = CoarseGraining::from_block_sizes(&[8]).unwrap();
        let r = equal_mass_refine(&psi, &g, 0, 4, Resolution::default()).unwrap();
        assert_eq!(r.cut_fractions, vec![0.25, 0.5, 0.75]);
        assert!(r.piece_masses.iter().all(|&m| (m - 2.0).abs() < 1e-12));
        // single uniform cell: cuts fall inside the cell
        let one = StateVector::from_real(&[1.0]).unwrap();
        let r = equal_mass_refine(&one, &CoarseGraining::unit_cells(1).unwrap(), 0, 4, Resolution::default()).unwrap();
        for (f, want) in r.cut_fractions.iter().zip([0.25, 0.5, 0.75]) {
            assert!((f - want).abs() < 1e-15);
        }
        assert_eq!(r.state.dim(), 4);
    }

    #[test]
    fn linear_density_median() {
        let n = 1000;
        let masses: Vec<f64> = (0..n)
            .map(|i| (((i + 1) * (i + 1)) as f64 - (i * i) as f64) / (n * n) as f64)
            .collect();
        let psi = StateVector::from_real(&masses.iter().map(|m| m.sqrt()).collect::<Vec<_>>()).unwrap();
        let g = CoarseGraining::trivial(n).unwrap().with_volumes(vec![1.0 / n as f64; n]).unwrap();
        let r = equal_mass_refine(&psi, &g, 0, 2, Resolution::default()).unwrap();
        // oracle: invert the piecewise-linear grid CDF at half the mass
        let mut acc = 0.0;
        let mut oracle = 0.0;
        for (i, &m) in masses.iter().enumerate() {
            if acc + m >= 0.5 {
                oracle = (i as f64 + (0.5 - acc) / m) / n as f64;
                break;
            }
            acc += m;
        }
        assert!((r.cut_fractions[0] - oracle).abs() < 1e-12);
        assert!((r.cut_fractions[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!((r.piece_masses[0] - r.piece_masses[1]).abs() < 1e-9);
    }

    #[test]
    fn zero_mass_block_splits_by_volume() {
        let psi = StateVector::from_real(&[1.0, 0.0, 0.0]).unwrap();
        let g = CoarseGraining::from_block_sizes(&[1, 2]).unwrap();
        let r = equal_mass_refine(&psi, &g, 1, 3, Resolution::default()).unwrap();
        assert_eq!(r.pieces.len(), 3);
        assert!(r.piece_masses.iter().all(|&m| m == 0.0));
        assert!(r.fine.refines(&r.coarse));
    }

    #[test]
    fn refinement_is_isometric_and_refines() {
        let psi = StateVector::from_real(&[0.3, 1.1, -0.7, 0.2, 0.9]).unwrap();
        let g = CoarseGraining::from_block_sizes(&[2, 3]).unwrap();
        let r = equal_mass_refine(&psi, &g, 1, 3, Resolution::default()).unwrap();
        assert!(r.fine.refines(&r.coarse));
        assert!((r.state.norm_sqr() - psi.norm_sqr()).abs() < 1e-12);
        for k in 0..g.num_blocks() {
            let before = born_weight(&psi, &g.block_projector(k)).unwrap();
            let after = born_weight(&r.state, &Projector::cells(r.state.dim(), r.coarse.block(k)).unwrap()).unwrap();
            assert!((before - after).abs() < 1e-12);
        }
        let mean = r.piece_masses.iter().sum::<f64>() / 3.0;
        assert!(r.piece_masses.iter().all(|m| (m - mean).abs() < 1e-9 * psi.norm_sqr()));
        let union = r.pieces.iter().fold(CellSet::empty(), |a, p| a.union(p));
        assert_eq!(union, r.coarse.block(1));
    }

    #[test]
    fn resolution_limit() {
        let psi = StateVector::from_real(&[1.0]).unwrap();
        let g = CoarseGraining::unit_cells(1).unwrap();
        let res = Resolution { config_dim: 1, halvings: 1 };
        assert_eq!(
            equal_mass_refine(&psi, &g, 0, 5, res),
            Err(Error::Resolution { required: 5, available: 2 })
        );
        assert!(equal_mass_refine(&psi, &g, 0, 2, res).is_ok());
    }

    #[test]
    fn hypercube_counts() {
        assert_eq!(hypercube_split_count(1).unwrap(), 2);
        assert_eq!(hypercube_split_count(3).unwrap(), 8);
        assert_eq!(hypercube_split_count(10).unwrap(), 1u64 << 10);
        assert!(matches!(hypercube_split_count(0), Err(Error::Domain(_))));
    }
}
