//! Row reduction over exact rationals or tolerant floats, tracking which input
//! constraints each reduced row was built from.

use std::collections::BTreeSet;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub trait Field:
    Clone
    + Debug
    + Zero
    + One
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Whether pivoting should look for the largest entry.
    const PARTIAL_PIVOT: bool;
    fn negligible(&self, tol: f64) -> bool;
    fn magnitude(&self) -> f64;
}

impl Field for f64 {
    const PARTIAL_PIVOT: bool = true;
    fn negligible(&self, tol: f64) -> bool {
        self.abs() <= tol
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Field for BigRational {
    const PARTIAL_PIVOT: bool = false;
    fn negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }
    fn magnitude(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone)]
struct Row<T> {
    coeffs: Vec<T>,
    rhs: T,
    sources: BTreeSet<usize>,
}

/// A system `A x = b`, one row per labelled constraint.
#[derive(Debug, Clone)]
pub struct LinearSystem<T> {
    unknowns: usize,
    rows: Vec<Row<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Solution<T> {
    Unique(Vec<T>),
    Underdetermined {
        particular: Vec<T>,
        null_basis: Vec<Vec<T>>,
    },
    Inconsistent {
        constraints: Vec<usize>,
    },
}

/// Reduced row echelon form of a consistent system.
#[derive(Debug, Clone)]
pub struct Rref<T> {
    unknowns: usize,
    /// `(pivot column, row)` in increasing column order.
    pivots: Vec<(usize, Row<T>)>,
    tol: f64,
}

impl<T: Field> LinearSystem<T> {
    pub fn new(unknowns: usize) -> Self {
        Self { unknowns, rows: Vec::new() }
    }

    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Adds `sum coeffs[i].1 * x[coeffs[i].0] = rhs`; returns the constraint id.
    pub fn push(&mut self, coeffs: &[(usize, T)], rhs: T) -> usize {
        let mut row = vec![T::zero(); self.unknowns];
        for (i, c) in coeffs {
            row[*i] = row[*i].clone() + c.clone();
        }
        let id = self.rows.len();
        self.rows.push(Row {
            coeffs: row,
            rhs,
            sources: BTreeSet::from([id]),
        });
        id
    }

    /// Evaluates every row at `x`, returning the largest residual magnitude.
    pub fn max_residual(&self, x: &[T]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let lhs = r
                    .coeffs
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
                (lhs - r.rhs.clone()).magnitude()
            })
            .fold(0.0, f64::max)
    }

    pub fn residuals(&self, x: &[T]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                let lhs = r
                    .coeffs
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
                (lhs - r.rhs.clone()).magnitude()
            })
            .collect()
    }

    pub fn reduce(&self, tol: f64) -> std::result::Result<Rref<T>, Vec<usize>> {
        let mut rows = self.rows.clone();
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut next = 0;
        for col in 0..self.unknowns {
            if next == rows.len() {
                break;
            }
            let candidate = if T::PARTIAL_PIVOT {
                (next..rows.len())
                    .filter(|&r| !rows[r].coeffs[col].negligible(tol))
                    .max_by(|&a, &b| {
                        rows[a].coeffs[col]
                            .magnitude()
                            .total_cmp(&rows[b].coeffs[col].magnitude())
                    })
            } else {
                (next..rows.len()).find(|&r| !rows[r].coeffs[col].negligible(tol))
            };
            let Some(p) = candidate else { continue };
            rows.swap(next, p);
            let inv = T::one() / rows[next].coeffs[col].clone();
            scale(&mut rows[next], &inv);
            rows[next].coeffs[col] = T::one();
            let pivot_row = rows[next].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r == next || row.coeffs[col].negligible(0.0) {
                    continue;
                }
                let factor = row.coeffs[col].clone();
                eliminate(row, &pivot_row, &factor);
                row.coeffs[col] = T::zero();
            }
            pivots.push((col, next));
            next += 1;
        }
        for row in &rows[next..] {
            let rhs_scale = 1.0_f64.max(row.coeffs.iter().map(|c| c.magnitude()).fold(0.0, f64::max));
            if !row.rhs.negligible(tol * rhs_scale) {
                return Err(row.sources.iter().copied().collect());
            }
        }
        let pivots = pivots
            .into_iter()
            .map(|(c, r)| (c, rows[r].clone()))
            .collect();
        Ok(Rref {
            unknowns: self.unknowns,
            pivots,
            tol,
        })
    }

    pub fn solve(&self, tol: f64) -> Solution<T> {
        match self.reduce(tol) {
            Err(constraints) => Solution::Inconsistent { constraints },
            Ok(rref) => {
                let particular = rref.particular();
                if rref.rank() == self.unknowns {
                    Solution::Unique(particular)
                } else {
                    Solution::Underdetermined {
                        particular,
                        null_basis: rref.null_basis(),
                    }
                }
            }
        }
    }
}

fn scale<T: Field>(row: &mut Row<T>, s: &T) {
    for c in row.coeffs.iter_mut() {
        *c = c.clone() * s.clone();
    }
    row.rhs = row.rhs.clone() * s.clone();
}

fn eliminate<T: Field>(row: &mut Row<T>, pivot: &Row<T>, factor: &T) {
    for (c, p) in row.coeffs.iter_mut().zip(&pivot.coeffs) {
        if !p.negligible(0.0) {
            *c = c.clone() - factor.clone() * p.clone();
        }
    }
    row.rhs = row.rhs.clone() - factor.clone() * pivot.rhs.clone();
    row.sources.extend(pivot.sources.iter().copied());
}

impl<T: Field> Rref<T> {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    pub fn nullity(&self) -> usize {
        self.unknowns - self.rank()
    }

    pub fn pivot_columns(&self) -> Vec<usize> {
        self.pivots.iter().map(|(c, _)| *c).collect()
    }

    pub fn free_columns(&self) -> Vec<usize> {
        let pivots: BTreeSet<usize> = self.pivots.iter().map(|(c, _)| *c).collect();
        (0..self.unknowns).filter(|c| !pivots.contains(c)).collect()
    }

    /// The solution with every free variable set to zero.
    pub fn particular(&self) -> Vec<T> {
        let mut x = vec![T::zero(); self.unknowns];
        for (c, row) in &self.pivots {
            x[*c] = row.rhs.clone();
        }
        x
    }

    pub fn null_basis(&self) -> Vec<Vec<T>> {
        self.free_columns()
            .into_iter()
            .map(|f| {
                let mut v = vec![T::zero(); self.unknowns];
                v[f] = T::one();
                for (c, row) in &self.pivots {
                    v[*c] = -row.coeffs[f].clone();
                }
                v
            })
            .collect()
    }

    /// Value of `sum w_i x_i` if the system pins it down, otherwise `None`.
    pub fn determined(&self, functional: &[T]) -> Option<T> {
        let mut w = functional.to_vec();
        let mut value = T::zero();
        for (c, row) in &self.pivots {
            let f = w[*c].clone();
            if f.negligible(0.0) {
                continue;
            }
            for (wi, ri) in w.iter_mut().zip(&row.coeffs) {
                *wi = wi.clone() - f.clone() * ri.clone();
            }
            value = value + f * row.rhs.clone();
        }
        if w.iter().all(|x| x.negligible(self.tol)) {
            Some(value)
        } else {
            None
        }
    }
}
