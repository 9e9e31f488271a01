//! The equiprobable case and its extension to integer weights, replayed on finite
//! instances with every constructed unitary checked numerically.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use super::refine::Grid;
use super::trace::{Axiom, Check, DerivationTrace, Premise, Rule};
use crate::error::{Error, Result};
use crate::hilbert::{
    born_weight, max_abs_diff, permutation_unitary, phase_unitary, BooleanSublattice, CellSet, CoarseGraining,
    GrainingFamily, MeasureTable, Projector, SeparatingSet, StateVector, C64,
};

/// Tolerance for span membership and for "`|c_k|^2` is constant".
pub const EQUIPROBABLE_TOL: f64 = 1e-10;

/// The refined grid a rational-weight derivation ran on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinedInstance {
    pub state: StateVector,
    /// The input graining on the refined grid.
    pub coarse: CoarseGraining,
    pub fine: CoarseGraining,
    /// Equal-mass pieces of each support projector (empty for zero weight).
    pub pieces: Vec<Vec<CellSet>>,
}

/// Values forced on a lattice, with the argument that forced them.
#[derive(Debug, Clone, Serialize)]
pub struct Derived {
    pub table: MeasureTable,
    #[serde(skip)]
    pub lattice: BooleanSublattice,
    /// Generator values in exact arithmetic.
    #[serde(serialize_with = "exact_as_strings")]
    pub exact: Vec<(CellSet, BigRational)>,
    pub trace: DerivationTrace,
    pub refined: Option<RefinedInstance>,
}

fn exact_as_strings<S: Serializer>(v: &[(CellSet, BigRational)], s: S) -> std::result::Result<S::Ok, S::Error> {
    let list: Vec<(&CellSet, String)> = v.iter().map(|(c, q)| (c, q.to_string())).collect();
    list.serialize(s)
}

fn ratio(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn restrict(v: &StateVector, cells: &CellSet) -> Result<StateVector> {
    StateVector::new(cells.cells().iter().map(|&i| v.as_slice()[i]).collect())
}

/// Residual of the transposition unitary exchanging the ranges of `a` and `b` and the
/// components of `psi` on them, built on `span(a ∪ b)` and extended by the identity.
/// `None` when the ranks differ and no such unitary exists in finite dimension.
pub(crate) fn transposition_residual(psi: &StateVector, a: &CellSet, b: &CellSet) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Ok(None);
    }
    let c = a.len();
    let joined = CellSet::new(a.cells().iter().chain(b.cells()).copied());
    let order: Vec<usize> = a.cells().iter().chain(b.cells()).copied().collect();
    debug_assert_eq!(joined.len(), 2 * c);
    let local = StateVector::new(order.iter().map(|&i| psi.as_slice()[i]).collect())?;
    let pa = Projector::cells(2 * c, CellSet::range(0, c))?;
    let pb = Projector::cells(2 * c, CellSet::range(c, 2 * c))?;
    let set = SeparatingSet::from_state(&local, vec![pa.clone(), pb.clone()])?;
    let u = permutation_unitary(&[1, 0], &set)?;
    let fixed = u.apply(&local)?.distance(&local)?;
    let swapped = max_abs_diff(&u.conjugate(&pa)?.to_matrix(), &pb.to_matrix());
    Ok(Some(fixed.max(swapped)))
}

/// Cell sets of the separating projectors, which must be disjoint unions of blocks.
fn lattice_parts(set: &SeparatingSet, graining: &CoarseGraining) -> Result<Vec<CellSet>> {
    let mut parts: Vec<CellSet> = Vec::with_capacity(set.len());
    for (k, p) in set.projectors().iter().enumerate() {
        let cells = p
            .to_cells(EQUIPROBABLE_TOL)
            .and_then(|q| q.cell_set().cloned())
            .ok_or_else(|| Error::Precondition(format!("P_{} is not a configuration projector", k + 1)))?;
        if cells.is_empty() {
            return Err(Error::Precondition(format!("P_{} is zero", k + 1)));
        }
        if graining.blocks().iter().any(|b| !b.is_subset(&cells) && !b.is_disjoint(&cells)) {
            return Err(Error::Precondition(format!(
                "P_{} is not in the lattice generated by the graining",
                k + 1
            )));
        }
        if let Some(j) = parts.iter().position(|q| !q.is_disjoint(&cells)) {
            return Err(Error::Precondition(format!("P_{} and P_{} overlap", j + 1, k + 1)));
        }
        parts.push(cells);
    }
    Ok(parts)
}

fn spare_blocks(graining: &CoarseGraining, parts: &[CellSet]) -> Vec<CellSet> {
    graining
        .blocks()
        .into_iter()
        .filter(|b| parts.iter().all(|p| b.is_disjoint(p)))
        .collect()
}

fn finish(
    dim: usize,
    parts: &[CellSet],
    values: Vec<BigRational>,
    spares: Vec<CellSet>,
    trace: DerivationTrace,
    refined: Option<RefinedInstance>,
) -> Result<Derived> {
    let mut exact: Vec<(CellSet, BigRational)> = parts.iter().cloned().zip(values).collect();
    exact.extend(spares.into_iter().map(|s| (s, BigRational::zero())));
    let lattice = BooleanSublattice::from_generators(dim, exact.iter().map(|(c, _)| c.clone()).collect())?;
    let floats: Vec<f64> = exact.iter().map(|(_, q)| q.to_f64().unwrap_or(f64::NAN)).collect();
    let table = if lattice.elements().is_some() {
        MeasureTable::additive_extension(&lattice, &floats)?
    } else {
        let mut t = MeasureTable::new();
        for ((cells, _), v) in exact.iter().zip(&floats) {
            t.insert(cells.clone(), *v)?;
        }
        t.insert(lattice.top(), 1.0)?;
        t
    };
    Ok(Derived {
        table,
        lattice,
        exact,
        trace,
        refined,
    })
}

/// Replaces each coefficient `c_k` by `|c_k|` with a phase unitary commuting with
/// every `P_k`; returns the rotated state and the trace step.
fn eliminate_phases(
    psi: &StateVector,
    set: &SeparatingSet,
    parts: &[CellSet],
    coeffs: &[C64],
    trace: &mut DerivationTrace,
) -> Result<(StateVector, usize)> {
    let mut primed = vec![C64::zero(); psi.dim()];
    let mut residual = 0.0f64;
    for (k, cells) in parts.iter().enumerate() {
        let phi = restrict(&set.vectors()[k], cells)?;
        let local = SeparatingSet::new(vec![phi.clone()], vec![Projector::identity(cells.len())])?;
        let u = phase_unitary(&[coeffs[k].arg()], &local)?;
        let target = phi.scaled(C64::from(coeffs[k].norm()));
        residual = residual.max(u.apply(&restrict(psi, cells)?)?.distance(&target)?);
        for (i, &cell) in cells.cells().iter().enumerate() {
            primed[cell] = target.as_slice()[i];
        }
    }
    let step = trace.push(
        Rule::PhaseElim,
        vec![Premise::Axiom(Axiom::Invariance)],
        format!(
            "U_theta: phi_k -> exp(-i theta_k) phi_k commutes with each of the {} projectors P_k, \
             so mu(psi, P_k) = mu(psi', P_k) with psi' = sum_k |c_k| phi_k",
            parts.len()
        ),
        Check::Numeric { residual },
    );
    Ok((StateVector::new(primed)?, step))
}

/// A permutation step between `pairs`, verified where ranks agree and cited otherwise.
fn permutation_step(
    trace: &mut DerivationTrace,
    rule: Rule,
    psi: &StateVector,
    pairs: &[(&CellSet, &CellSet)],
    mut premises: Vec<Premise>,
    conclusion: String,
) -> Result<usize> {
    let mut residual = 0.0f64;
    let mut cited = false;
    for (a, b) in pairs {
        match transposition_residual(psi, a, b)? {
            Some(r) => residual = residual.max(r),
            None => cited = true,
        }
    }
    premises.push(Premise::Axiom(Axiom::Invariance));
    let check = if cited {
        premises.push(Premise::Axiom(Axiom::Degeneracy));
        Check::Cited
    } else {
        Check::Numeric { residual }
    };
    Ok(trace.push(rule, premises, conclusion, check))
}

/// Values forced on `P_1..P_d` (`1/d` each) and on every lattice projector orthogonal
/// to their sum (zero) when `psi` has equal-modulus coefficients on a separating set.
pub fn equiprobable_values(psi: &StateVector, set: &SeparatingSet, graining: &CoarseGraining) -> Result<Derived> {
    let dim = graining.dim();
    for found in [psi.dim(), set.dim()] {
        if found != dim {
            return Err(Error::Dimension { expected: dim, found });
        }
    }
    let d = set.len();
    if d == 0 {
        return Err(Error::Precondition("empty separating set".into()));
    }
    let parts = lattice_parts(set, graining)?;
    let psi = psi.normalized()?;
    let coeffs = set.coefficients(&psi)?;
    let mut recon = vec![C64::zero(); dim];
    for (c, phi) in coeffs.iter().zip(set.vectors()) {
        for (r, a) in recon.iter_mut().zip(phi.as_slice()) {
            *r += c * a;
        }
    }
    let off_span = psi.distance(&StateVector::new(recon)?)?;
    if off_span > EQUIPROBABLE_TOL {
        return Err(Error::Precondition(format!(
            "state lies off the span of the separating vectors by {off_span:e}"
        )));
    }
    let w0 = coeffs[0].norm_sqr();
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        if (c.norm_sqr() - w0).abs() > EQUIPROBABLE_TOL {
            return Err(Error::Precondition(format!(
                "|c_1|^2 = {w0} but |c_{}|^2 = {}",
                k + 1,
                c.norm_sqr()
            )));
        }
    }
    let mut trace = DerivationTrace::new();
    let (primed, phase) = eliminate_phases(&psi, set, &parts, &coeffs, &mut trace)?;
    let spares = spare_blocks(graining, &parts);
    if d == 1 {
        single_outcome(dim, &parts, spares, &primed, phase, trace)
    } else {
        equal_split(dim, &parts, spares, &primed, phase, trace)
    }
}

fn equal_split(
    dim: usize,
    parts: &[CellSet],
    spares: Vec<CellSet>,
    primed: &StateVector,
    phase: usize,
    mut trace: DerivationTrace,
) -> Result<Derived> {
    use Premise::{Axiom as Ax, Step};
    let d = parts.len();
    let mut perms = Vec::with_capacity(d - 1);
    for k in 1..d {
        perms.push(permutation_step(
            &mut trace,
            Rule::Permutation,
            primed,
            &[(&parts[0], &parts[k])],
            vec![Step(phase)],
            format!(
                "U_pi exchanging phi_1, phi_{0} and P_1, P_{0} fixes psi', so mu(psi', P_1) = mu(psi', P_{0})",
                k + 1
            ),
        )?);
    }
    let covered = parts.iter().fold(CellSet::empty(), |acc, p| acc.union(p));
    let rest = covered.complement(dim);
    let complement = if rest.is_empty() {
        trace.push(
            Rule::Complement,
            vec![],
            "sum_k P_k = I, so P_1' = P_1 + (I - sum_k P_k) = P_1",
            Check::Exact,
        )
    } else {
        let widened = parts[0].union(&rest);
        let pairs: Vec<(&CellSet, &CellSet)> = parts[1..].iter().map(|p| (&widened, p)).collect();
        permutation_step(
            &mut trace,
            Rule::Complement,
            primed,
            &pairs,
            vec![Step(phase)],
            format!(
                "P_1' = P_1 + (I - sum_k P_k) adds {} cells; {{phi_k}} still separates P_1', P_2, ..., P_{d}, \
                 so mu(psi', .) is constant on them",
                rest.len()
            ),
        )?
    };
    let mut premises = vec![Step(complement)];
    premises.extend(perms.iter().map(|&s| Step(s)));
    premises.push(Ax(Axiom::ProbabilityMeasure));
    let split = trace.push(
        Rule::Additivity,
        premises,
        format!("P_1' + P_2 + ... + P_{d} = I, so mu(psi', P_k) = 1/{d} for k = 2..{d}"),
        Check::Exact,
    );
    let first = trace.push(
        Rule::Permutation,
        vec![Step(perms[0]), Step(split)],
        format!("mu(psi', P_1) = mu(psi', P_2) = 1/{d}"),
        Check::Exact,
    );
    let orth = trace.push(
        Rule::Additivity,
        vec![Step(split), Step(first), Ax(Axiom::ProbabilityMeasure)],
        "the P_k carry total value 1, so every lattice projector orthogonal to sum_k P_k has value 0",
        Check::Exact,
    );
    trace.push(
        Rule::PhaseElim,
        vec![Step(phase), Step(split), Step(first), Step(orth)],
        "the same values hold for psi",
        Check::Exact,
    );
    finish(dim, parts, vec![ratio(1, d as u64); d], spares, trace, None)
}

fn single_outcome(
    dim: usize,
    parts: &[CellSet],
    spares: Vec<CellSet>,
    primed: &StateVector,
    phase: usize,
    mut trace: DerivationTrace,
) -> Result<Derived> {
    use Premise::{Axiom as Ax, Step};
    if parts[0].len() == dim {
        let one = trace.push(
            Rule::Additivity,
            vec![Step(phase), Ax(Axiom::ProbabilityMeasure)],
            "P_1 = I, so mu(psi', P_1) = 1 by normalization",
            Check::Exact,
        );
        trace.push(
            Rule::PhaseElim,
            vec![Step(phase), Step(one)],
            "the same value holds for psi",
            Check::Exact,
        );
        return finish(dim, parts, vec![ratio(1, 1)], spares, trace, None);
    }
    if spares.len() < 3 {
        return Err(Error::Precondition(format!(
            "a single-outcome derivation needs 3 lattice blocks disjoint from P_1, found {}",
            spares.len()
        )));
    }
    let p1 = &parts[0];
    let (p2, p3) = (&spares[0], &spares[1]);
    let p4 = p1.union(p2).union(p3).complement(dim);
    let p2w = p2.union(p3);
    let equal = permutation_step(
        &mut trace,
        Rule::Permutation,
        primed,
        &[(p2, p3), (p3, &p4)],
        vec![Step(phase)],
        "P_2, P_3 and P_4' = I - P_1 - P_2 - P_3 annihilate psi'; permutations fixing P_1 give \
         mu(P_2) = mu(P_3) = mu(P_4')"
            .into(),
    )?;
    let widened = permutation_step(
        &mut trace,
        Rule::Permutation,
        primed,
        &[(&p2w, &p4)],
        vec![Step(phase)],
        "P_2' = P_2 + P_3 and P_4' both annihilate psi', so mu(P_2') = mu(P_4')".into(),
    )?;
    let zero2 = trace.push(
        Rule::Additivity,
        vec![Step(equal), Step(widened), Ax(Axiom::ProbabilityMeasure)],
        "mu(P_2') = mu(P_2) + mu(P_3) = 2 mu(P_2) and mu(P_2') = mu(P_4') = mu(P_2), so mu(P_2) = 0",
        Check::Exact,
    );
    let zeros = trace.push(
        Rule::Additivity,
        vec![Step(equal), Step(zero2)],
        "mu(P_3) = mu(P_4') = mu(P_2) = 0",
        Check::Exact,
    );
    let one = trace.push(
        Rule::Additivity,
        vec![Step(zero2), Step(zeros), Ax(Axiom::ProbabilityMeasure)],
        "P_1 + P_2 + P_3 + P_4' = I, so mu(psi', P_1) = 1",
        Check::Exact,
    );
    let orth = trace.push(
        Rule::Additivity,
        vec![Step(one), Ax(Axiom::ProbabilityMeasure)],
        "every lattice projector orthogonal to P_1 lies under I - P_1 and has value 0",
        Check::Exact,
    );
    trace.push(
        Rule::PhaseElim,
        vec![Step(phase), Step(one), Step(orth)],
        "the same values hold for psi",
        Check::Exact,
    );
    finish(dim, parts, vec![ratio(1, 1)], spares, trace, None)
}

/// `const * sum_k sqrt(m_k) phi_k` for a separating set `{phi_k}, {P_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalState {
    weights: Vec<u64>,
    support: SeparatingSet,
}

impl RationalState {
    pub fn new(weights: Vec<u64>, support: SeparatingSet) -> Result<Self> {
        if weights.len() != support.len() {
            return Err(Error::Dimension {
                expected: support.len(),
                found: weights.len(),
            });
        }
        if weights.iter().all(|&m| m == 0) {
            return Err(Error::Domain("at least one weight must be positive".into()));
        }
        if weights.iter().try_fold(0u64, |a, &m| a.checked_add(m)).is_none() {
            return Err(Error::Size("weights overflow".into()));
        }
        Ok(Self { weights, support })
    }

    /// Weights on the blocks of `graining`, each `phi_k` uniform over its block.
    pub fn on_blocks(graining: &CoarseGraining, weights: Vec<u64>) -> Result<Self> {
        let dim = graining.dim();
        let mut vectors = Vec::with_capacity(graining.num_blocks());
        let mut projectors = Vec::with_capacity(graining.num_blocks());
        for b in graining.blocks() {
            let amp = C64::from(1.0 / (b.len() as f64).sqrt());
            let mut v = vec![C64::zero(); dim];
            for &c in b.cells() {
                v[c] = amp;
            }
            vectors.push(StateVector::new(v)?);
            projectors.push(Projector::cells(dim, b)?);
        }
        Self::new(weights, SeparatingSet::new(vectors, projectors)?)
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn support(&self) -> &SeparatingSet {
        &self.support
    }

    pub fn total(&self) -> u64 {
        self.weights.iter().sum()
    }

    /// The normalized state.
    pub fn state(&self) -> Result<StateVector> {
        let mut v = vec![C64::zero(); self.support.dim()];
        for (m, phi) in self.weights.iter().zip(self.support.vectors()) {
            let s = (*m as f64).sqrt();
            for (x, a) in v.iter_mut().zip(phi.as_slice()) {
                *x += a * s;
            }
        }
        StateVector::new(v)?.normalized()
    }

    /// Exact Born weights `m_k / sum m`.
    pub fn born_exact(&self) -> Vec<BigRational> {
        let total = self.total();
        self.weights.iter().map(|&m| ratio(m, total)).collect()
    }
}

/// Values `m_j / sum_k m_k` forced on the support projectors of a rational state, by
/// refining each `P_k` into `m_k` equal-mass pieces and applying the equiprobable case.
///
/// Each support projector must be a single block of `graining`, and `family` must
/// contain `graining`; its resolution bounds how finely cells may be split.
pub fn rational_born_values(r: &RationalState, graining: &CoarseGraining, family: &GrainingFamily) -> Result<Derived> {
    use Premise::{Axiom as Ax, Step};
    let dim = graining.dim();
    if r.support.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: r.support.dim(),
        });
    }
    if !family.contains(graining) {
        return Err(Error::Precondition("the graining is not a member of the family".into()));
    }
    let parts = lattice_parts(&r.support, graining)?;
    let blocks: Vec<usize> = parts
        .iter()
        .enumerate()
        .map(|(k, p)| {
            graining
                .find_block(p)
                .ok_or_else(|| Error::Precondition(format!("P_{} is not a single block of the graining", k + 1)))
        })
        .collect::<Result<_>>()?;
    let psi = r.state()?;
    let total = r.total();

    let mut grid = Grid::new(&psi, graining, family.resolution)?;
    let mut order: Vec<usize> = (0..parts.len()).filter(|&k| r.weights[k] > 0).collect();
    order.sort_by(|&a, &b| blocks[b].cmp(&blocks[a]));
    for &k in &order {
        grid.refine_piece(blocks[k], r.weights[k] as usize)?;
    }
    let extra_before = |block: usize| -> usize {
        (0..parts.len())
            .filter(|&j| blocks[j] < block && r.weights[j] > 0)
            .map(|j| r.weights[j] as usize - 1)
            .sum()
    };
    let piece_ids: Vec<Vec<usize>> = (0..parts.len())
        .map(|k| {
            let start = blocks[k] + extra_before(blocks[k]);
            (start..start + r.weights[k] as usize).collect()
        })
        .collect();
    let all: Vec<usize> = piece_ids.iter().flatten().copied().collect();
    grid.equalize(&all)?;
    let state = grid.state()?;
    let coarse = grid.coarse()?;
    let fine = grid.fine()?;
    let pieces: Vec<Vec<CellSet>> = piece_ids
        .iter()
        .map(|ids| ids.iter().map(|&p| grid.piece_cells(p)).collect())
        .collect();

    let mut trace = DerivationTrace::new();
    let share = 1.0 / total as f64;
    let mut spread = 0.0f64;
    for p in pieces.iter().flatten() {
        let mass: f64 = p.cells().iter().map(|&c| state.as_slice()[c].norm_sqr()).sum();
        spread = spread.max((mass - share).abs());
    }
    let refine = trace.push(
        Rule::Refinement,
        vec![],
        format!(
            "split each P_k into m_k pieces of equal mass, m = {:?}; {} pieces in all",
            r.weights, total
        ),
        Check::Numeric { residual: spread },
    );
    let mut embed = 0.0f64;
    for (k, p) in parts.iter().enumerate() {
        let before = born_weight(&psi, &Projector::cells(dim, p.clone())?)?;
        let after = born_weight(&state, &Projector::cells(state.dim(), coarse.block(blocks[k]))?)?;
        embed = embed.max((before - after).abs());
    }
    let stable = trace.push(
        Rule::Refinement,
        vec![Step(refine), Ax(Axiom::Stability)],
        "each P_k lies in both the coarse and the refined lattice, so its value does not depend on which is used",
        Check::Numeric { residual: embed },
    );
    let flat: Vec<Projector> = pieces
        .iter()
        .flatten()
        .map(|p| Projector::cells(state.dim(), p.clone()))
        .collect::<Result<_>>()?;
    let inner = equiprobable_values(&state, &SeparatingSet::from_state(&state, flat)?, &fine)?;
    let lemma = trace.append(&inner.trace).expect("equiprobable trace is never empty");
    let summed = trace.push(
        Rule::Additivity,
        vec![Step(lemma), Step(stable), Ax(Axiom::ProbabilityMeasure)],
        format!(
            "equiprobable case with m = {total}: every piece has value 1/{total}, so mu(psi, P_k) = m_k/{total}"
        ),
        Check::Exact,
    );
    trace.push(
        Rule::Additivity,
        vec![Step(summed), Ax(Axiom::ProbabilityMeasure)],
        "lattice projectors orthogonal to sum_k P_k have value 0",
        Check::Exact,
    );
    let spares = spare_blocks(graining, &parts);
    let refined = RefinedInstance {
        state,
        coarse,
        fine,
        pieces,
    };
    finish(dim, &parts, r.born_exact(), spares, trace, Some(refined))
}
