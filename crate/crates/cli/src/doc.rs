//! JSON shapes for states, matrices, projectors and grainings inside scenario parameters.

use bornlab_core::{CMatrix, CoarseGraining, Projector, StateVector, SymmetryUnitary, UnitaryKind, C64};
use num_complex::Complex64;
use num_rational::BigRational;
use serde::Deserialize;

use crate::error::CliError;

/// A real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Real(f64),
    Complex([f64; 2]),
}

impl Num {
    pub fn value(self) -> C64 {
        match self {
            Num::Real(x) => Complex64::new(x, 0.0),
            Num::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

pub type VecDoc = Vec<Num>;
pub type MatDoc = Vec<Vec<Num>>;

pub fn schema<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Schema(format!("{what}: {e}"))
}

pub fn state(doc: &VecDoc, what: &str) -> Result<StateVector, CliError> {
    StateVector::new(doc.iter().map(|n| n.value()).collect()).map_err(schema(what))
}

pub fn matrix(doc: &MatDoc, what: &str) -> Result<CMatrix, CliError> {
    let n = doc.len();
    if n == 0 || doc.iter().any(|row| row.len() != n) {
        return Err(CliError::Schema(format!("{what}: expected a nonempty square matrix")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| doc[i][j].value()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum UnitaryDoc {
    /// `identity` or `hadamard`.
    Named(String),
    Matrix(MatDoc),
}

impl UnitaryDoc {
    pub fn build(&self, dim: usize, what: &str) -> Result<SymmetryUnitary, CliError> {
        let u = match self {
            UnitaryDoc::Named(name) => match name.as_str() {
                "identity" => return Ok(SymmetryUnitary::identity(dim)),
                "hadamard" if dim == 2 => hadamard(),
                _ => {
                    return Err(CliError::Schema(format!(
                        "{what}: unknown unitary {name:?} for dimension {dim} (expected identity, hadamard, or a matrix)"
                    )))
                }
            },
            UnitaryDoc::Matrix(m) => matrix(m, what)?,
        };
        if u.nrows() != dim {
            return Err(CliError::Schema(format!("{what}: dimension {} does not match {dim}", u.nrows())));
        }
        SymmetryUnitary::with_tolerance(u, UnitaryKind::General, 1e-10).map_err(schema(what))
    }
}

pub fn hadamard() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(2, 2, |i, j| Complex64::new(if i == 1 && j == 1 { -s } else { s }, 0.0))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ProjectorDoc {
    Cells { cells: Vec<usize> },
    /// Rank-one projector onto the vector.
    Vector { vector: VecDoc },
    Matrix { matrix: MatDoc },
}

impl ProjectorDoc {
    pub fn build(&self, dim: usize, what: &str) -> Result<Projector, CliError> {
        let p = match self {
            ProjectorDoc::Cells { cells } => Projector::from_cells(dim, cells.iter().copied()),
            ProjectorDoc::Vector { vector } => Projector::onto(&state(vector, what)?),
            ProjectorDoc::Matrix { matrix: m } => Projector::from_matrix(matrix(m, what)?),
        }
        .map_err(schema(what))?;
        if p.dim() != dim {
            return Err(CliError::Schema(format!("{what}: dimension {} does not match {dim}", p.dim())));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GrainingDoc {
    BlockSizes { block_sizes: Vec<usize> },
    Cuts { cuts: Vec<usize> },
    UnitCells { unit_cells: usize },
}

impl GrainingDoc {
    pub fn build(&self, what: &str) -> Result<CoarseGraining, CliError> {
        match self {
            GrainingDoc::BlockSizes { block_sizes } => CoarseGraining::from_block_sizes(block_sizes),
            GrainingDoc::Cuts { cuts } => CoarseGraining::from_cuts(cuts.clone()),
            GrainingDoc::UnitCells { unit_cells } => CoarseGraining::unit_cells(*unit_cells),
        }
        .map_err(schema(what))
    }
}

/// A rational written as a JSON number, `"a/b"`, or a decimal string. Numbers are read
/// through their shortest decimal form, so `0.2` is exactly `1/5`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RationalDoc {
    Number(f64),
    Text(String),
}

impl RationalDoc {
    pub fn to_f64(&self) -> Result<f64, CliError> {
        match self {
            RationalDoc::Number(x) => Ok(*x),
            RationalDoc::Text(_) => {
                use num_traits::ToPrimitive;
                self.exact()?
                    .to_f64()
                    .ok_or_else(|| CliError::Schema("rational out of range".into()))
            }
        }
    }

    pub fn exact(&self) -> Result<BigRational, CliError> {
        match self {
            RationalDoc::Number(x) if x.is_finite() => parse_rational(&format!("{x}")),
            RationalDoc::Number(x) => Err(CliError::Schema(format!("{x} is not finite"))),
            RationalDoc::Text(s) => parse_rational(s),
        }
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational, CliError> {
    use num_bigint::BigInt;
    let bad = || CliError::Schema(format!("cannot read {s:?} as a rational"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d == BigInt::from(0) {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if frac.chars().any(|c| !c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let power = BigInt::from(10).pow(scale.unsigned_abs());
    Ok(if scale >= 0 {
        BigRational::from_integer(digits * power)
    } else {
        BigRational::new(digits, power)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_exact() {
        let r = |s: &str| parse_rational(s).unwrap().to_string();
        assert_eq!(r("0.2"), "1/5");
        assert_eq!(r("-1.25e1"), "-25/2");
        assert_eq!(r("3/6"), "1/2");
        assert_eq!(RationalDoc::Number(0.1).exact().unwrap().to_string(), "1/10");
        assert!(parse_rational("1/0").is_err());
    }
}
