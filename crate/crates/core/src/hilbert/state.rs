use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance for structural identities (hermiticity, idempotence, trace).
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Tolerance for derived numerical identities.
pub const NUMERIC_TOL: f64 = 1e-10;

/// Configurable tolerance pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub structural: f64,
    pub numeric: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: STRUCTURAL_TOL,
            numeric: NUMERIC_TOL,
        }
    }
}

/// A vector in a `d`-dimensional complex Hilbert space.
///
/// States are not required to be normalized: every probability rule divides by
/// `<psi, psi>`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("dimension must be at least 1".into()));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        Ok(Self {
            amplitudes: CVector::from_vec(amplitudes),
        })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_vector(amplitudes: CVector) -> Result<Self> {
        Self::new(amplitudes.iter().copied().collect())
    }

    /// The `k`-th standard basis vector of dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Index { index: k, len: dim });
        }
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[k] = C64::new(1.0, 0.0);
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn as_slice(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|a| a.norm_sqr() == 0.0)
    }

    /// Fails with [`Error::InvalidState`] on the zero vector.
    pub fn ensure_nonzero(&self) -> Result<()> {
        if self.is_zero() {
            Err(Error::InvalidState("zero vector cannot serve as a state".into()))
        } else {
            Ok(())
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        self.ensure_nonzero()?;
        let n = self.norm();
        Ok(Self {
            amplitudes: self.amplitudes.map(|a| a / n),
        })
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            amplitudes: self.amplitudes.map(|a| a * c),
        }
    }

    /// `<self, other>`, antilinear in the first slot.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn apply(&self, op: &CMatrix) -> Result<StateVector> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: op.nrows(),
            });
        }
        Ok(Self {
            amplitudes: op * &self.amplitudes,
        })
    }

    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok((&self.amplitudes - &other.amplitudes).norm())
    }

    /// `|psi><psi| / <psi,psi>`.
    pub fn density(&self) -> Result<DensityMatrix> {
        let n = self.normalized()?;
        let m = &n.amplitudes * n.amplitudes.adjoint();
        DensityMatrix::new(m)
    }
}

/// A positive, self-adjoint, trace-one operator.
/// Serialized as a list of `[re, im]` pairs.
impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.dim()))?;
        for a in self.as_slice() {
            seq.serialize_element(&[a.re, a.im])?;
        }
        seq.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, STRUCTURAL_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidDensity("matrix must be square and nonempty".into()));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > tol {
            return Err(Error::InvalidDensity(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidDensity(format!(
                "trace is {} + {}i, expected 1",
                tr.re, tr.im
            )));
        }
        let eig = nalgebra::SymmetricEigen::new(matrix.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix })
    }

    /// Convex combination `sum_i w_i |psi_i><psi_i|` of normalized pure states.
    pub fn mixture(components: &[(f64, StateVector)]) -> Result<Self> {
        let dim = components
            .first()
            .map(|(_, s)| s.dim())
            .ok_or_else(|| Error::InvalidDensity("empty mixture".into()))?;
        let mut m = CMatrix::zeros(dim, dim);
        for (w, s) in components {
            check_dim(dim, s.dim())?;
            if *w < 0.0 {
                return Err(Error::InvalidDensity("negative mixture weight".into()));
            }
            let n = s.normalized()?;
            m += (&n.amplitudes * n.amplitudes.adjoint()) * C64::new(*w, 0.0);
        }
        Self::new(m)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// Largest entry of `|M - M^dagger|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of `|U^dagger U - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    let d = u.adjoint() * u - CMatrix::identity(n, n);
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-norm of the entrywise difference.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
