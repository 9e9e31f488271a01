use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::state::{
    check_dim, hermiticity_defect, max_abs_diff, CMatrix, DensityMatrix, StateVector, C64,
    STRUCTURAL_TOL,
};
use crate::error::{Error, Result};

/// Sorted set of basis-cell indices; the canonical key of a configuration projector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellSet(Vec<usize>);

impl CellSet {
    pub fn new<I: IntoIterator<Item = usize>>(cells: I) -> Self {
        let set: BTreeSet<usize> = cells.into_iter().collect();
        Self(set.into_iter().collect())
    }

    pub fn range(start: usize, end: usize) -> Self {
        Self((start..end).collect())
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn cells(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.0.binary_search(&cell).is_ok()
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.0.iter().all(|c| other.contains(*c))
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        CellSet::new(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn complement(&self, dim: usize) -> CellSet {
        CellSet((0..dim).filter(|c| !self.contains(*c)).collect())
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

impl fmt::Display for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

/// An orthogonal projector, either diagonal on a set of basis cells or a dense
/// Hermitian idempotent matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    Cells { dim: usize, cells: CellSet },
    Matrix(CMatrix),
}

impl Projector {
    pub fn cells(dim: usize, cells: CellSet) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidProjector("dimension must be at least 1".into()));
        }
        if let Some(m) = cells.last() {
            if m >= dim {
                return Err(Error::InvalidProjector(format!(
                    "cell {m} outside 0..{dim}"
                )));
            }
        }
        Ok(Projector::Cells { dim, cells })
    }

    pub fn from_cells<I: IntoIterator<Item = usize>>(dim: usize, cells: I) -> Result<Self> {
        Self::cells(dim, CellSet::new(cells))
    }

    pub fn identity(dim: usize) -> Self {
        Projector::Cells {
            dim,
            cells: CellSet::range(0, dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Projector::Cells {
            dim,
            cells: CellSet::empty(),
        }
    }

    /// Validates `P^2 = P` and `P^dagger = P` within `tol`.
    pub fn from_matrix_with_tol(matrix: CMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidProjector("matrix must be square and nonempty".into()));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > tol {
            return Err(Error::InvalidProjector(format!("not Hermitian (defect {herm:e})")));
        }
        let idem = max_abs_diff(&(&matrix * &matrix), &matrix);
        if idem > tol {
            return Err(Error::InvalidProjector(format!("not idempotent (defect {idem:e})")));
        }
        Ok(Projector::Matrix(matrix))
    }

    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        Self::from_matrix_with_tol(matrix, STRUCTURAL_TOL)
    }

    /// Rank-one projector onto the ray through `v`.
    pub fn onto(v: &StateVector) -> Result<Self> {
        let n = v.normalized()?;
        let a = n.amplitudes();
        Ok(Projector::Matrix(a * a.adjoint()))
    }

    /// Projector onto the span of the given vectors (Gram-Schmidt with rank detection).
    pub fn onto_span(vectors: &[StateVector]) -> Result<Self> {
        let dim = vectors
            .first()
            .map(|v| v.dim())
            .ok_or_else(|| Error::InvalidProjector("empty span".into()))?;
        let basis = orthonormalize(vectors, 1e-10)?;
        let mut m = CMatrix::zeros(dim, dim);
        for b in &basis {
            let a = b.amplitudes();
            m += a * a.adjoint();
        }
        Ok(Projector::Matrix(m))
    }

    pub fn dim(&self) -> usize {
        match self {
            Projector::Cells { dim, .. } => *dim,
            Projector::Matrix(m) => m.nrows(),
        }
    }

    pub fn cell_set(&self) -> Option<&CellSet> {
        match self {
            Projector::Cells { cells, .. } => Some(cells),
            Projector::Matrix(_) => None,
        }
    }

    pub fn to_matrix(&self) -> CMatrix {
        match self {
            Projector::Cells { dim, cells } => {
                let mut m = CMatrix::zeros(*dim, *dim);
                for &c in cells.cells() {
                    m[(c, c)] = C64::new(1.0, 0.0);
                }
                m
            }
            Projector::Matrix(m) => m.clone(),
        }
    }

    /// Recovers the cell representation of a diagonal 0/1 matrix.
    pub fn to_cells(&self, tol: f64) -> Option<Projector> {
        match self {
            Projector::Cells { .. } => Some(self.clone()),
            Projector::Matrix(m) => {
                let n = m.nrows();
                let mut cells = Vec::new();
                for i in 0..n {
                    for j in 0..n {
                        let z = m[(i, j)];
                        if i == j {
                            if (z - C64::new(1.0, 0.0)).norm() <= tol {
                                cells.push(i);
                            } else if z.norm() > tol {
                                return None;
                            }
                        } else if z.norm() > tol {
                            return None;
                        }
                    }
                }
                Some(Projector::Cells {
                    dim: n,
                    cells: CellSet::new(cells),
                })
            }
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            Projector::Cells { cells, .. } => cells.len(),
            Projector::Matrix(m) => m.trace().re.round() as usize,
        }
    }

    pub fn complement(&self) -> Projector {
        match self {
            Projector::Cells { dim, cells } => Projector::Cells {
                dim: *dim,
                cells: cells.complement(*dim),
            },
            Projector::Matrix(m) => {
                let n = m.nrows();
                Projector::Matrix(CMatrix::identity(n, n) - m)
            }
        }
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), v.dim())?;
        match self {
            Projector::Cells { cells, .. } => {
                let mut out = vec![C64::new(0.0, 0.0); v.dim()];
                for &c in cells.cells() {
                    out[c] = v.as_slice()[c];
                }
                StateVector::new(out)
            }
            Projector::Matrix(m) => v.apply(m),
        }
    }

    /// `<psi, P psi>` without normalization.
    pub fn expectation(&self, v: &StateVector) -> Result<f64> {
        check_dim(self.dim(), v.dim())?;
        match self {
            Projector::Cells { cells, .. } => {
                Ok(cells.cells().iter().map(|&c| v.as_slice()[c].norm_sqr()).sum())
            }
            Projector::Matrix(m) => {
                let pv = m * v.amplitudes();
                Ok(v.amplitudes().dotc(&pv).re)
            }
        }
    }

    /// `U P U^dagger` in matrix form.
    pub fn conjugate(&self, u: &CMatrix) -> Result<Projector> {
        check_dim(self.dim(), u.nrows())?;
        Ok(Projector::Matrix(u * self.to_matrix() * u.adjoint()))
    }

    pub fn approx_eq(&self, other: &Projector, tol: f64) -> bool {
        match (self, other) {
            (Projector::Cells { dim: a, cells: x }, Projector::Cells { dim: b, cells: y }) => {
                a == b && x == y
            }
            _ => {
                self.dim() == other.dim() && max_abs_diff(&self.to_matrix(), &other.to_matrix()) <= tol
            }
        }
    }

    /// Orthonormal basis of the range.
    pub fn range_basis(&self) -> Result<Vec<StateVector>> {
        let dim = self.dim();
        match self {
            Projector::Cells { cells, .. } => cells
                .cells()
                .iter()
                .map(|&c| StateVector::basis(dim, c))
                .collect(),
            Projector::Matrix(m) => {
                let cols: Vec<StateVector> = (0..dim)
                    .map(|j| StateVector::from_vector(m.column(j).into_owned()))
                    .collect::<Result<_>>()?;
                orthonormalize(&cols, 1e-9)
            }
        }
    }
}

/// Born rule: `<psi, P psi> / <psi, psi>`, clamped to `[0, 1]`.
pub fn born_weight(psi: &StateVector, p: &Projector) -> Result<f64> {
    psi.ensure_nonzero()?;
    check_dim(psi.dim(), p.dim())?;
    let w = p.expectation(psi)? / psi.norm_sqr();
    Ok(w.clamp(0.0, 1.0))
}

/// Trace rule `Tr(rho P)`, clamped to `[0, 1]`.
pub fn trace_weight(rho: &DensityMatrix, p: &Projector) -> Result<f64> {
    check_dim(rho.dim(), p.dim())?;
    let tr = rho.matrix().trace();
    if (tr.re - 1.0).abs() > STRUCTURAL_TOL || tr.im.abs() > STRUCTURAL_TOL {
        return Err(Error::InvalidDensity(format!("trace {} is not 1", tr.re)));
    }
    let w = match p {
        Projector::Cells { cells, .. } => cells
            .cells()
            .iter()
            .map(|&c| rho.matrix()[(c, c)].re)
            .sum::<f64>(),
        Projector::Matrix(m) => (rho.matrix() * m).trace().re,
    };
    Ok(w.clamp(0.0, 1.0))
}

/// Modified Gram-Schmidt; vectors whose residual norm falls below `tol` are dropped.
pub fn orthonormalize(vectors: &[StateVector], tol: f64) -> Result<Vec<StateVector>> {
    let mut basis: Vec<StateVector> = Vec::new();
    for v in vectors {
        let mut w = v.amplitudes().clone();
        for b in &basis {
            let proj = b.amplitudes().dotc(&w);
            w -= b.amplitudes() * proj;
        }
        // second pass for numerical stability
        for b in &basis {
            let proj = b.amplitudes().dotc(&w);
            w -= b.amplitudes() * proj;
        }
        let n = w.norm();
        if n > tol {
            basis.push(StateVector::from_vector(w / C64::new(n, 0.0))?);
        }
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::state::c;

    #[test]
    fn born_weight_examples() {
        let p = Projector::from_cells(2, [0]).unwrap();
        let e1 = StateVector::from_real(&[1.0, 0.0]).unwrap();
        assert_eq!(born_weight(&e1, &p).unwrap(), 1.0);
        let plus = StateVector::from_real(&[1.0, 1.0]).unwrap();
        assert!((born_weight(&plus, &p).unwrap() - 0.5).abs() < 1e-15);
        let psi = StateVector::from_real(&[2f64.sqrt(), 1.0, 0.0]).unwrap();
        let p3 = Projector::from_cells(3, [0]).unwrap();
        assert!((born_weight(&psi, &p3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn born_weight_errors() {
        let zero = StateVector::from_real(&[0.0, 0.0]).unwrap();
        let p = Projector::from_cells(2, [0]).unwrap();
        assert!(matches!(born_weight(&zero, &p), Err(Error::InvalidState(_))));
        let psi = StateVector::from_real(&[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(born_weight(&psi, &p), Err(Error::Dimension { .. })));
    }

    #[test]
    fn trace_weight_examples() {
        let p0 = Projector::from_cells(2, [0]).unwrap();
        let p1 = Projector::from_cells(2, [1]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((trace_weight(&mixed, &p0).unwrap() - 0.5).abs() < 1e-15);

        let e1 = StateVector::basis(2, 0).unwrap().density().unwrap();
        assert_eq!(trace_weight(&e1, &p1).unwrap(), 0.0);

        let rho = DensityMatrix::mixture(&[
            (0.3, StateVector::basis(2, 0).unwrap()),
            (0.7, StateVector::basis(2, 1).unwrap()),
        ])
        .unwrap();
        // direct trace: Tr(rho P) = sum_i (rho P)_ii
        let direct: f64 = (rho.matrix() * p0.to_matrix()).trace().re;
        assert!((direct - 0.3).abs() < 1e-15);
        assert!((trace_weight(&rho, &Projector::Matrix(p0.to_matrix())).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn density_rejects_bad_trace() {
        let m = CMatrix::identity(2, 2);
        assert!(matches!(DensityMatrix::new(m), Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn projector_validation() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.5, 0.0);
        assert!(Projector::from_matrix(m).is_err());
        assert!(Projector::from_cells(2, [2]).is_err());
        let pm = Projector::onto(&StateVector::from_real(&[1.0, -1.0]).unwrap()).unwrap();
        assert!(Projector::from_matrix(pm.to_matrix()).is_ok());
        assert_eq!(pm.rank(), 1);
    }

    #[test]
    fn cells_matrix_roundtrip() {
        let p = Projector::from_cells(4, [1, 3]).unwrap();
        let back = Projector::Matrix(p.to_matrix()).to_cells(1e-12).unwrap();
        assert_eq!(back, p);
        let pm = Projector::onto(&StateVector::from_real(&[1.0, 1.0]).unwrap()).unwrap();
        assert!(pm.to_cells(1e-12).is_none());
    }
}
