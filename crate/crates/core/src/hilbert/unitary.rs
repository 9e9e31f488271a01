use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::projector::{orthonormalize, Projector};
use super::state::{check_dim, unitarity_defect, CMatrix, CVector, StateVector, C64, NUMERIC_TOL, STRUCTURAL_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitaryKind {
    Phase,
    Permutation,
    General,
}

/// A unitary operator together with a tag recording how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryUnitary {
    matrix: CMatrix,
    kind: UnitaryKind,
}

impl SymmetryUnitary {
    pub fn new(matrix: CMatrix, kind: UnitaryKind) -> Result<Self> {
        Self::with_tolerance(matrix, kind, STRUCTURAL_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, kind: UnitaryKind, tol: f64) -> Result<Self> {
        let defect = unitarity_defect(&matrix);
        if defect > tol {
            return Err(Error::Unitarity(defect));
        }
        Ok(Self { matrix, kind })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
            kind: UnitaryKind::General,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn kind(&self) -> UnitaryKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        v.apply(&self.matrix)
    }

    /// `U P U^{-1}`.
    pub fn conjugate(&self, p: &Projector) -> Result<Projector> {
        p.conjugate(&self.matrix)
    }

    pub fn compose(&self, after: &SymmetryUnitary) -> Result<SymmetryUnitary> {
        check_dim(self.dim(), after.dim())?;
        Ok(SymmetryUnitary {
            matrix: &after.matrix * &self.matrix,
            kind: if self.kind == after.kind { self.kind } else { UnitaryKind::General },
        })
    }
}

/// Orthonormal vectors `phi_k` paired with disjoint projectors `P_k` such that
/// `P_j phi_k = delta_jk phi_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatingSet {
    vectors: Vec<StateVector>,
    projectors: Vec<Projector>,
}

impl SeparatingSet {
    pub fn new(vectors: Vec<StateVector>, projectors: Vec<Projector>) -> Result<Self> {
        if vectors.is_empty() || vectors.len() != projectors.len() {
            return Err(Error::Precondition(format!(
                "need equally many vectors and projectors, got {} and {}",
                vectors.len(),
                projectors.len()
            )));
        }
        let dim = vectors[0].dim();
        for v in &vectors {
            check_dim(dim, v.dim())?;
        }
        for p in &projectors {
            check_dim(dim, p.dim())?;
        }
        for (i, a) in vectors.iter().enumerate() {
            for (j, b) in vectors.iter().enumerate() {
                let ip = a.inner(b)?;
                let want = if i == j { 1.0 } else { 0.0 };
                if (ip - C64::new(want, 0.0)).norm() > NUMERIC_TOL {
                    return Err(Error::Precondition(format!(
                        "vectors {i},{j} not orthonormal (<.,.> = {ip})"
                    )));
                }
            }
        }
        for (j, p) in projectors.iter().enumerate() {
            for (k, v) in vectors.iter().enumerate() {
                let pv = p.apply(v)?;
                let want = if j == k { v.clone() } else { v.scaled(C64::new(0.0, 0.0)) };
                if pv.distance(&want)? > NUMERIC_TOL {
                    return Err(Error::Precondition(format!(
                        "P_{j} phi_{k} != delta_jk phi_k"
                    )));
                }
            }
        }
        Ok(Self { vectors, projectors })
    }

    /// `phi_k = P_k psi / |P_k psi|`; components where `psi` vanishes fall back to the
    /// first basis vector of the projector's range.
    pub fn from_state(psi: &StateVector, projectors: Vec<Projector>) -> Result<Self> {
        let mut vectors = Vec::with_capacity(projectors.len());
        for p in &projectors {
            let comp = p.apply(psi)?;
            if comp.norm() > 1e-300 {
                vectors.push(comp.normalized()?);
            } else {
                let basis = p.range_basis()?;
                let first = basis
                    .into_iter()
                    .next()
                    .ok_or_else(|| Error::Precondition("projector with empty range".into()))?;
                vectors.push(first);
            }
        }
        Self::new(vectors, projectors)
    }

    pub fn standard(dim: usize) -> Result<Self> {
        let vectors = (0..dim).map(|k| StateVector::basis(dim, k)).collect::<Result<_>>()?;
        let projectors = (0..dim)
            .map(|k| Projector::from_cells(dim, [k]))
            .collect::<Result<_>>()?;
        Self::new(vectors, projectors)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    /// `c_k = <phi_k, psi>`.
    pub fn coefficients(&self, psi: &StateVector) -> Result<Vec<C64>> {
        self.vectors.iter().map(|v| v.inner(psi)).collect()
    }

    fn adapted_basis(&self, k: usize) -> Result<Vec<StateVector>> {
        let mut seed = vec![self.vectors[k].clone()];
        seed.extend(self.projectors[k].range_basis()?);
        orthonormalize(&seed, 1e-9)
    }

    fn complement_matrix(&self) -> CMatrix {
        let d = self.dim();
        let mut m = CMatrix::identity(d, d);
        for p in &self.projectors {
            m -= p.to_matrix();
        }
        m
    }
}

/// The unitary with `U phi_k = phi_{pi(k)}` and `U P_k U^{-1} = P_{pi(k)}`, acting as the
/// identity on the complement of `sum_k P_k`.
///
/// `perm[k]` is the image of `k` (zero-based).
pub fn permutation_unitary(perm: &[usize], set: &SeparatingSet) -> Result<SymmetryUnitary> {
    let n = set.len();
    if perm.len() != n {
        return Err(Error::Dimension { expected: n, found: perm.len() });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::Precondition(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    let bases: Vec<Vec<StateVector>> = (0..n).map(|k| set.adapted_basis(k)).collect::<Result<_>>()?;
    for k in 0..n {
        let (from, to) = (bases[k].len(), bases[perm[k]].len());
        if from != to {
            return Err(Error::DegeneracyViolation(format!(
                "P_{k} has rank {from} but its image P_{} has rank {to}",
                perm[k]
            )));
        }
    }
    let mut u = set.complement_matrix();
    for k in 0..n {
        for (src, dst) in bases[k].iter().zip(&bases[perm[k]]) {
            u += dst.amplitudes() * src.amplitudes().adjoint();
        }
    }
    SymmetryUnitary::with_tolerance(u, UnitaryKind::Permutation, 1e-10)
}

/// The unitary with `U phi_k = exp(-i theta_k) phi_k` that commutes with every `P_k`.
pub fn phase_unitary(theta: &[f64], set: &SeparatingSet) -> Result<SymmetryUnitary> {
    if theta.len() != set.len() {
        return Err(Error::Dimension { expected: set.len(), found: theta.len() });
    }
    let mut u = set.complement_matrix();
    for (k, t) in theta.iter().enumerate() {
        let phi = set.vectors[k].amplitudes();
        let outer = phi * phi.adjoint();
        u += set.projectors[k].to_matrix() - &outer;
        u += outer * C64::from_polar(1.0, -t);
    }
    SymmetryUnitary::with_tolerance(u, UnitaryKind::Phase, 1e-10)
}

/// A unitary `U` with `U a = b` and `U A_i U^{-1} = B_i` for paired resolutions of the
/// identity, if one exists (equal ranks and equal component norms pairwise).
pub fn intertwiner(
    a: &StateVector,
    a_parts: &[Projector],
    b: &StateVector,
    b_parts: &[Projector],
    tol: f64,
) -> Result<Option<SymmetryUnitary>> {
    check_dim(a.dim(), b.dim())?;
    if a_parts.len() != b_parts.len() {
        return Ok(None);
    }
    let dim = a.dim();
    let mut u = CMatrix::zeros(dim, dim);
    let mut total_rank = 0;
    for (pa, pb) in a_parts.iter().zip(b_parts) {
        let ca = pa.apply(a)?;
        let cb = pb.apply(b)?;
        if (ca.norm() - cb.norm()).abs() > tol {
            return Ok(None);
        }
        let seed = |comp: &StateVector, p: &Projector| -> Result<Vec<StateVector>> {
            let mut s = Vec::new();
            if comp.norm() > tol {
                s.push(comp.normalized()?);
            }
            s.extend(p.range_basis()?);
            orthonormalize(&s, 1e-9)
        };
        let ba = seed(&ca, pa)?;
        let bb = seed(&cb, pb)?;
        if ba.len() != bb.len() {
            return Ok(None);
        }
        total_rank += ba.len();
        for (x, y) in ba.iter().zip(&bb) {
            u += y.amplitudes() * x.amplitudes().adjoint();
        }
    }
    if total_rank != dim {
        return Err(Error::Precondition(
            "spectral projectors do not resolve the identity".into(),
        ));
    }
    SymmetryUnitary::with_tolerance(u, UnitaryKind::General, 1e-9).map(Some)
}

/// Haar-distributed unitary via Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SymmetryUnitary {
    loop {
        let cols: Vec<StateVector> = (0..dim)
            .map(|_| random_state(dim, rng))
            .collect();
        let basis = orthonormalize(&cols, 1e-8).expect("nonempty");
        if basis.len() == dim {
            let mut m = CMatrix::zeros(dim, dim);
            for (j, b) in basis.iter().enumerate() {
                m.set_column(j, b.amplitudes());
            }
            return SymmetryUnitary {
                matrix: m,
                kind: UnitaryKind::General,
            };
        }
    }
}

/// Complex Gaussian vector (not normalized).
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    let v: CVector = CVector::from_fn(dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    StateVector::from_vector(v).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::projector::born_weight;
    use crate::hilbert::state::{c, max_abs_diff};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_permutation_is_identity() {
        let s = SeparatingSet::standard(3).unwrap();
        let u = permutation_unitary(&[0, 1, 2], &s).unwrap();
        assert!(max_abs_diff(u.matrix(), &CMatrix::identity(3, 3)) < 1e-12);
    }

    #[test]
    fn swap_is_antidiagonal() {
        let s = SeparatingSet::standard(2).unwrap();
        let u = permutation_unitary(&[1, 0], &s).unwrap();
        let mut want = CMatrix::zeros(2, 2);
        want[(0, 1)] = c(1.0, 0.0);
        want[(1, 0)] = c(1.0, 0.0);
        assert!(max_abs_diff(u.matrix(), &want) < 1e-12);
    }

    #[test]
    fn three_cycle_conjugates_projectors() {
        let s = SeparatingSet::standard(3).unwrap();
        let perm = [1, 2, 0];
        let u = permutation_unitary(&perm, &s).unwrap();
        // direct matrix check: U e_k = e_{pi(k)}, U P_k U^dagger = P_{pi(k)}
        for k in 0..3 {
            let img = u.apply(&s.vectors()[k]).unwrap();
            assert!(img.distance(&s.vectors()[perm[k]]).unwrap() < 1e-12);
            let conj = u.conjugate(&s.projectors()[k]).unwrap();
            assert!(max_abs_diff(&conj.to_matrix(), &s.projectors()[perm[k]].to_matrix()) < 1e-12);
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == perm[j] { 1.0 } else { 0.0 };
                assert!((u.matrix()[(i, j)] - c(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn unequal_ranks_violate_degeneracy() {
        let psi = StateVector::from_real(&[1.0, 1.0, 1.0]).unwrap();
        let p0 = Projector::from_cells(3, [0, 1]).unwrap();
        let p1 = Projector::from_cells(3, [2]).unwrap();
        let s = SeparatingSet::from_state(&psi, vec![p0, p1]).unwrap();
        assert!(matches!(
            permutation_unitary(&[1, 0], &s),
            Err(Error::DegeneracyViolation(_))
        ));
    }

    #[test]
    fn block_permutation_maps_adapted_vectors() {
        let psi = StateVector::new(vec![c(0.3, 0.4), c(-0.5, 0.0), c(0.1, 0.2), c(0.0, -0.7)]).unwrap();
        let p0 = Projector::from_cells(4, [0, 1]).unwrap();
        let p1 = Projector::from_cells(4, [2, 3]).unwrap();
        let s = SeparatingSet::from_state(&psi, vec![p0.clone(), p1.clone()]).unwrap();
        let u = permutation_unitary(&[1, 0], &s).unwrap();
        assert!(u.apply(&s.vectors()[0]).unwrap().distance(&s.vectors()[1]).unwrap() < 1e-10);
        assert!(u.conjugate(&p0).unwrap().approx_eq(&p1, 1e-10));
    }

    #[test]
    fn phase_examples() {
        let s = SeparatingSet::standard(2).unwrap();
        let u = phase_unitary(&[0.0, 0.0], &s).unwrap();
        assert!(max_abs_diff(u.matrix(), &CMatrix::identity(2, 2)) < 1e-15);
        let u = phase_unitary(&[std::f64::consts::PI, 0.0], &s).unwrap();
        let mut want = CMatrix::identity(2, 2);
        want[(0, 0)] = c(-1.0, 0.0);
        assert!(max_abs_diff(u.matrix(), &want) < 1e-15);
        assert!(matches!(phase_unitary(&[0.0], &s), Err(Error::Dimension { .. })));
    }

    #[test]
    fn random_phases_preserve_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let psi = random_state(4, &mut rng);
        let projs: Vec<Projector> = vec![
            Projector::from_cells(4, [0]).unwrap(),
            Projector::from_cells(4, [1, 2]).unwrap(),
            Projector::from_cells(4, [3]).unwrap(),
        ];
        let s = SeparatingSet::from_state(&psi, projs.clone()).unwrap();
        let theta: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let u = phase_unitary(&theta, &s).unwrap();
        let moved = u.apply(&psi).unwrap();
        for p in &projs {
            let conj = u.conjugate(p).unwrap();
            assert!(conj.approx_eq(p, 1e-10));
            let before = born_weight(&psi, p).unwrap();
            let after = born_weight(&moved, p).unwrap();
            assert!((before - after).abs() < 1e-10);
        }
    }

    #[test]
    fn intertwiner_exists_iff_norms_match() {
        let psi = StateVector::from_real(&[1.0, 1.0, 0.5]).unwrap();
        let p = |c: &[usize]| Projector::from_cells(3, c.iter().copied()).unwrap();
        let a = [p(&[0]), p(&[1, 2])];
        let b = [p(&[1]), p(&[0, 2])];
        let u = intertwiner(&psi, &a, &psi, &b, 1e-12).unwrap().unwrap();
        assert!(u.apply(&psi).unwrap().distance(&psi).unwrap() < 1e-12);
        assert!(u.conjugate(&a[0]).unwrap().approx_eq(&b[0], 1e-12));
        let b_bad = [p(&[2]), p(&[0, 1])];
        assert!(intertwiner(&psi, &a, &psi, &b_bad, 1e-12).unwrap().is_none());
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..6 {
            let u = random_unitary(d, &mut rng);
            assert!(unitarity_defect(u.matrix()) < 1e-12);
        }
    }
}
