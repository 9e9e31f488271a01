use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    born_weight, hermiticity_defect, max_abs_diff, CMatrix, Projector, StateVector, SymmetryUnitary, NUMERIC_TOL,
};

/// Two spectrum labels closer than this are the same label.
pub const LABEL_TOL: f64 = 1e-10;

fn same_label(a: f64, b: f64) -> bool {
    (a - b).abs() <= LABEL_TOL * 1f64.max(a.abs()).max(b.abs())
}

/// Utility assigned to spectrum labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffFn {
    /// `x -> scale * x + offset`, defined on all reals.
    Affine { scale: f64, offset: f64 },
    /// Defined only at the listed labels.
    Table { points: Vec<(f64, f64)> },
}

impl PayoffFn {
    pub fn linear(scale: f64) -> Self {
        PayoffFn::Affine { scale, offset: 0.0 }
    }

    pub fn identity() -> Self {
        Self::linear(1.0)
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        for (i, a) in points.iter().enumerate() {
            if points[..i].iter().any(|b| same_label(a.0, b.0)) {
                return Err(Error::Domain(format!("payoff table lists label {} twice", a.0)));
            }
        }
        Ok(PayoffFn::Table { points })
    }

    /// Whether `P(x + y) = P(x) + P(y)` holds for all reals.
    pub fn is_linear(&self) -> bool {
        matches!(self, PayoffFn::Affine { offset, .. } if *offset == 0.0)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            PayoffFn::Affine { scale, offset } => Ok(scale * x + offset),
            PayoffFn::Table { points } => points
                .iter()
                .find(|(k, _)| same_label(*k, x))
                .map(|p| p.1)
                .ok_or_else(|| Error::Domain(format!("payoff undefined at {x}"))),
        }
    }

    /// Largest `|P(x + y) - P(x) - P(y)|` over the sample pairs.
    pub fn additivity_defect(&self, samples: &[(f64, f64)]) -> Result<f64> {
        samples.iter().try_fold(0.0f64, |m, &(x, y)| {
            Ok(m.max((self.eval(x + y)? - self.eval(x)? - self.eval(y)?).abs()))
        })
    }

    /// `P o f_s`.
    pub fn shifted(&self, s: f64) -> Result<Self> {
        match self {
            PayoffFn::Affine { scale, offset } => Ok(PayoffFn::Affine {
                scale: *scale,
                offset: offset + scale * s,
            }),
            PayoffFn::Table { .. } => Err(Error::Linearity("shifted payoff needs values off the table".into())),
        }
    }

    /// `P o -I`.
    pub fn negated(&self) -> Result<Self> {
        match self {
            PayoffFn::Affine { scale, offset } => Ok(PayoffFn::Affine {
                scale: -scale,
                offset: *offset,
            }),
            PayoffFn::Table { .. } => Err(Error::Linearity("negated payoff needs values off the table".into())),
        }
    }
}

/// An invertible map on a spectrum. Finite maps fix every label they do not list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Relabeling {
    Shift { s: f64 },
    Negate,
    /// Must map the listed labels onto themselves.
    Permutation { pairs: Vec<(f64, f64)> },
    General { pairs: Vec<(f64, f64)> },
}

impl Relabeling {
    pub fn identity() -> Self {
        Relabeling::Shift { s: 0.0 }
    }

    pub fn swap(a: f64, b: f64) -> Self {
        Relabeling::Permutation {
            pairs: vec![(a, b), (b, a)],
        }
    }

    pub fn forward(&self, x: f64) -> f64 {
        match self {
            Relabeling::Shift { s } => x + s,
            Relabeling::Negate => -x,
            Relabeling::Permutation { pairs } | Relabeling::General { pairs } => {
                pairs.iter().find(|(a, _)| same_label(*a, x)).map_or(x, |p| p.1)
            }
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match self {
            Relabeling::Shift { s } => y - s,
            Relabeling::Negate => -y,
            Relabeling::Permutation { pairs } | Relabeling::General { pairs } => {
                // Listed images take precedence over fixed points.
                pairs.iter().find(|(_, b)| same_label(*b, y)).map_or(y, |p| p.0)
            }
        }
    }

    /// Checks that the map is injective on `spectrum` and inverts there.
    pub fn check_on(&self, spectrum: &[f64]) -> Result<()> {
        if let Relabeling::Permutation { pairs } = self {
            for (_, b) in pairs {
                if !pairs.iter().any(|(a, _)| same_label(*a, *b)) {
                    return Err(Error::Relabeling(format!("permutation image {b} is not among its labels")));
                }
            }
        }
        let images: Vec<f64> = spectrum.iter().map(|&x| self.forward(x)).collect();
        for (i, a) in images.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::Relabeling(format!("label {} maps to {a}", spectrum[i])));
            }
            if images[..i].iter().any(|b| same_label(*a, *b)) {
                return Err(Error::Relabeling(format!("two labels map to {a}")));
            }
        }
        for (&x, &y) in spectrum.iter().zip(&images) {
            if !same_label(self.inverse(y), x) {
                return Err(Error::Relabeling(format!("inverse does not undo the map at {x}")));
            }
        }
        Ok(())
    }
}

/// One spectral component of an observable.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub label: f64,
    pub projector: Projector,
}

/// A quantum game: a state, an observable given by its spectral data, and a payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    state: StateVector,
    outcomes: Vec<Outcome>,
    payoff: PayoffFn,
}

impl Game {
    /// Outcomes are sorted by label; labels must be distinct and the projectors must
    /// resolve the identity.
    pub fn new(state: StateVector, outcomes: Vec<(f64, Projector)>, payoff: PayoffFn) -> Result<Self> {
        let d = state.dim();
        let mut outcomes: Vec<Outcome> = outcomes
            .into_iter()
            .map(|(label, projector)| Outcome { label, projector })
            .collect();
        outcomes.sort_by(|a, b| a.label.total_cmp(&b.label));
        if outcomes.is_empty() {
            return Err(Error::Precondition("a game needs at least one outcome".into()));
        }
        let mut sum = CMatrix::zeros(d, d);
        for (i, o) in outcomes.iter().enumerate() {
            if o.projector.dim() != d {
                return Err(Error::Dimension { expected: d, found: o.projector.dim() });
            }
            if !o.label.is_finite() || (i > 0 && same_label(o.label, outcomes[i - 1].label)) {
                return Err(Error::Precondition(format!("spectrum label {} repeated or not finite", o.label)));
            }
            sum += o.projector.to_matrix();
        }
        let defect = max_abs_diff(&sum, &CMatrix::identity(d, d));
        if defect > NUMERIC_TOL {
            return Err(Error::InvalidProjector(format!(
                "spectral projectors do not resolve the identity (defect {defect:e})"
            )));
        }
        state.ensure_nonzero()?;
        Ok(Self { state, outcomes, payoff })
    }

    /// Spectral decomposition of a Hermitian observable; eigenvalues within `1e-8` merge.
    pub fn from_observable(state: StateVector, observable: &CMatrix, payoff: PayoffFn) -> Result<Self> {
        let d = state.dim();
        if observable.nrows() != d || observable.ncols() != d {
            return Err(Error::Dimension { expected: d, found: observable.nrows() });
        }
        let h = hermiticity_defect(observable);
        if h > NUMERIC_TOL {
            return Err(Error::Precondition(format!("observable is not Hermitian (defect {h:e})")));
        }
        let eig = SymmetricEigen::new(observable.clone());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for i in order {
            let v = eig.eigenvalues[i];
            match groups.last_mut() {
                Some((mean, idx)) if (v - *mean).abs() <= 1e-8 => {
                    idx.push(i);
                    *mean += (v - *mean) / idx.len() as f64;
                }
                _ => groups.push((v, vec![i])),
            }
        }
        let outcomes = groups
            .into_iter()
            .map(|(label, idx)| {
                let mut p = CMatrix::zeros(d, d);
                for i in idx {
                    let col = eig.eigenvectors.column(i);
                    p += col * col.adjoint();
                }
                Ok((label, Projector::from_matrix_with_tol(p, 1e-9)?))
            })
            .collect::<Result<_>>()?;
        let g = Self::new(state, outcomes, payoff)?;
        let rebuilt = max_abs_diff(&g.observable(), observable);
        if rebuilt > NUMERIC_TOL * 1f64.max(observable.iter().map(|z| z.norm()).fold(0.0, f64::max)) {
            return Err(Error::Precondition(format!("spectral data reproduces the observable only to {rebuilt:e}")));
        }
        Ok(g)
    }

    /// `<phi, x1 P_1 + x2 P_2, payoff>` on two basis states with equal amplitudes.
    pub fn two_outcome(x1: f64, x2: f64, payoff: PayoffFn) -> Result<Self> {
        let phi = StateVector::from_real(&[1.0, 1.0])?.normalized()?;
        if same_label(x1, x2) {
            return Self::new(phi, vec![(x1, Projector::identity(2))], payoff);
        }
        Self::new(
            phi,
            vec![(x1, Projector::from_cells(2, [0])?), (x2, Projector::from_cells(2, [1])?)],
            payoff,
        )
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn payoff(&self) -> &PayoffFn {
        &self.payoff
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn spectrum(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.label).collect()
    }

    pub fn observable(&self) -> CMatrix {
        let d = self.dim();
        self.outcomes
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, o| acc + o.projector.to_matrix() * crate::hilbert::c(o.label, 0.0))
    }

    pub fn utilities(&self) -> Result<Vec<f64>> {
        self.outcomes.iter().map(|o| self.payoff.eval(o.label)).collect()
    }

    pub fn weights(&self) -> Result<Vec<f64>> {
        self.outcomes.iter().map(|o| born_weight(&self.state, &o.projector)).collect()
    }

    /// `sum_k born_weight(phi, P_k) * payoff(lambda_k)`.
    pub fn born_value(&self) -> Result<f64> {
        Ok(self.weights()?.iter().zip(self.utilities()?).map(|(w, u)| w * u).sum())
    }

    /// Same state, labels, projectors, and utilities on the spectrum.
    pub fn same_game(&self, other: &Game, tol: f64) -> bool {
        if self.dim() != other.dim() || self.outcomes.len() != other.outcomes.len() {
            return false;
        }
        let state_ok = self.state.distance(&other.state).is_ok_and(|d| d <= tol);
        state_ok
            && self.outcomes.iter().zip(&other.outcomes).all(|(a, b)| {
                same_label(a.label, b.label)
                    && a.projector.approx_eq(&b.projector, tol)
                    && match (self.payoff.eval(a.label), other.payoff.eval(b.label)) {
                        (Ok(x), Ok(y)) => (x - y).abs() <= tol * 1f64.max(x.abs()),
                        _ => false,
                    }
            })
    }

    pub fn with_payoff(&self, payoff: PayoffFn) -> Self {
        Self {
            payoff,
            ..self.clone()
        }
    }
}

/// `<phi, f(X), P o f^-1>`.
pub fn relabel_game(g: &Game, f: &Relabeling) -> Result<Game> {
    f.check_on(&g.spectrum())?;
    let payoff = match (&g.payoff, f) {
        (PayoffFn::Affine { .. }, Relabeling::Shift { s }) => g.payoff.shifted(-s)?,
        (PayoffFn::Affine { .. }, Relabeling::Negate) => g.payoff.negated()?,
        _ => PayoffFn::table(
            g.outcomes
                .iter()
                .map(|o| Ok((f.forward(o.label), g.payoff.eval(o.label)?)))
                .collect::<Result<_>>()?,
        )?,
    };
    let outcomes = g
        .outcomes
        .iter()
        .map(|o| (f.forward(o.label), o.projector.clone()))
        .collect();
    Game::new(g.state.clone(), outcomes, payoff)
}

/// `<U phi, U X U^-1, P>`.
pub fn transform_game(g: &Game, u: &SymmetryUnitary) -> Result<Game> {
    if u.dim() != g.dim() {
        return Err(Error::Dimension { expected: g.dim(), found: u.dim() });
    }
    let outcomes = g
        .outcomes
        .iter()
        .map(|o| Ok((o.label, u.conjugate(&o.projector)?)))
        .collect::<Result<_>>()?;
    Game::new(u.apply(&g.state)?, outcomes, g.payoff.clone())
}

/// `<phi, X, P o f_s>`; the sure-thing principle prices it at `V(g) + P(s)`.
pub fn sure_thing_game(g: &Game, s: f64) -> Result<Game> {
    if !g.payoff.is_linear() {
        return Err(Error::Linearity("the sure-thing principle is applied to linear payoffs only".into()));
    }
    Ok(g.with_payoff(g.payoff.shifted(s)?))
}

/// `<phi, X, P o -I>`; the zero-sum rule prices it at `-V(g)`.
pub fn zero_sum_game(g: &Game) -> Result<Game> {
    if !g.payoff.is_linear() {
        return Err(Error::Linearity("the zero-sum rule is applied to linear payoffs only".into()));
    }
    Ok(g.with_payoff(g.payoff.negated()?))
}
