use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{hermiticity_defect, max_abs_diff, CMatrix, CVector, CellSet, Projector, StateVector, C64};

/// Observables must commute to within this.
pub const COMMUTATOR_TOL: f64 = 1e-10;
/// Hamiltonian hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues closer than this belong to the same outcome.
const EIGEN_GROUP_TOL: f64 = 1e-8;

/// Constant in front of `R.R` in the drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormConvention {
    /// `gamma / 2`: the squared norm is preserved in mean for every `gamma`.
    #[default]
    MeanNormPreserving,
    /// `1`, the drift exactly as written; mean-norm-preserving only at `gamma = 2`.
    Literal,
}

/// `d psi = (Q dt + R . dB) psi` with `R_k = A_k - <A_k>` and `Q = -iH - c R.R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseModel {
    hamiltonian: CMatrix,
    observables: Vec<CMatrix>,
    gamma: f64,
    convention: NormConvention,
    /// Joint eigenbasis as columns; `None` when every observable is already diagonal.
    basis: Option<CMatrix>,
    /// Hamiltonian in the joint eigenbasis.
    h_eig: CMatrix,
    h_zero: bool,
    /// `diag[k * dim + i]`: eigenvalue of observable `k` on eigenbasis vector `i`.
    diag: Vec<f64>,
    /// Outcome label of each eigenbasis vector.
    outcome_of: Vec<usize>,
    /// `eigenvalues[outcome][k]`.
    eigenvalues: Vec<Vec<f64>>,
    projectors: Vec<Projector>,
}

fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == C64::new(0.0, 0.0)))
}

impl CollapseModel {
    pub fn new(hamiltonian: CMatrix, observables: Vec<CMatrix>, gamma: f64) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if dim == 0 || !hamiltonian.is_square() {
            return Err(Error::Precondition("hamiltonian must be a nonempty square matrix".into()));
        }
        let h_defect = hermiticity_defect(&hamiltonian);
        if h_defect > HERMITIAN_TOL {
            return Err(Error::Precondition(format!("hamiltonian not hermitian (defect {h_defect:e})")));
        }
        if observables.is_empty() {
            return Err(Error::Precondition("at least one observable is required".into()));
        }
        for (k, a) in observables.iter().enumerate() {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::Dimension { expected: dim, found: a.nrows() });
            }
            let d = hermiticity_defect(a);
            if d > HERMITIAN_TOL {
                return Err(Error::Precondition(format!("observable {k} not hermitian (defect {d:e})")));
            }
        }
        for i in 0..observables.len() {
            for j in i + 1..observables.len() {
                let (a, b) = (&observables[i], &observables[j]);
                let c = max_abs_diff(&(a * b), &(b * a));
                if c > COMMUTATOR_TOL {
                    return Err(Error::Precondition(format!(
                        "observables {i} and {j} do not commute (defect {c:e})"
                    )));
                }
            }
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be nonnegative, got {gamma}")));
        }

        let basis = if observables.iter().all(is_diagonal) {
            None
        } else {
            let mut mix = CMatrix::zeros(dim, dim);
            for (k, a) in observables.iter().enumerate() {
                mix += a * C64::from(1.0 + 0.618_033_988_749_895 * k as f64);
            }
            let eig = SymmetricEigen::new(mix);
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            Some(CMatrix::from_columns(
                &order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
            ))
        };
        let mut diag = vec![0.0; observables.len() * dim];
        for (k, a) in observables.iter().enumerate() {
            let rotated = match &basis {
                Some(v) => v.adjoint() * a * v,
                None => a.clone(),
            };
            for i in 0..dim {
                for j in 0..dim {
                    if i != j && rotated[(i, j)].norm() > EIGEN_GROUP_TOL {
                        return Err(Error::Precondition(format!(
                            "could not diagonalize observable {k} jointly with the others"
                        )));
                    }
                }
                diag[k * dim + i] = rotated[(i, i)].re;
            }
        }
        let h_eig = match &basis {
            Some(v) => v.adjoint() * &hamiltonian * v,
            None => hamiltonian.clone(),
        };
        let h_zero = h_eig.iter().all(|z| *z == C64::new(0.0, 0.0));

        // Group eigenbasis vectors by their eigenvalue tuple.
        let kk = observables.len();
        let tuple = |i: usize| -> Vec<f64> { (0..kk).map(|k| diag[k * dim + i]).collect() };
        let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
        for i in 0..dim {
            let t = tuple(i);
            match groups
                .iter_mut()
                .find(|(g, _)| g.iter().zip(&t).all(|(x, y)| (x - y).abs() <= EIGEN_GROUP_TOL))
            {
                Some((_, members)) => members.push(i),
                None => groups.push((t, vec![i])),
            }
        }
        let projector_of = |members: &[usize]| -> Result<Projector> {
            match &basis {
                None => Projector::cells(dim, CellSet::new(members.iter().copied())),
                Some(v) => {
                    let mut m = CMatrix::zeros(dim, dim);
                    for &i in members {
                        let col = v.column(i);
                        m += col * col.adjoint();
                    }
                    Projector::from_matrix_with_tol(m, 1e-9)
                }
            }
        };
        let mut labelled: Vec<(usize, Vec<f64>, Vec<usize>, Projector)> = Vec::new();
        for (t, members) in groups {
            let p = projector_of(&members)?;
            let m = p.to_matrix();
            let top = (0..dim).map(|i| m[(i, i)].re).fold(f64::MIN, f64::max);
            let key = (0..dim).find(|&i| m[(i, i)].re >= top - 1e-9).unwrap_or(0);
            labelled.push((key, t, members, p));
        }
        labelled.sort_by_key(|(key, ..)| *key);
        let mut outcome_of = vec![0; dim];
        let mut eigenvalues = Vec::new();
        let mut projectors = Vec::new();
        for (o, (_, t, members, p)) in labelled.into_iter().enumerate() {
            for i in members {
                outcome_of[i] = o;
            }
            eigenvalues.push(t);
            projectors.push(p);
        }
        Ok(Self {
            hamiltonian,
            observables,
            gamma,
            convention: NormConvention::default(),
            basis,
            h_eig,
            h_zero,
            diag,
            outcome_of,
            eigenvalues,
            projectors,
        })
    }

    /// Two-level toy model with `A = diag(1, -1)`.
    pub fn qubit(hamiltonian: CMatrix, gamma: f64) -> Result<Self> {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]));
        Self::new(hamiltonian, vec![a], gamma)
    }

    pub fn with_convention(mut self, convention: NormConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn convention(&self) -> NormConvention {
        self.convention
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn observables(&self) -> &[CMatrix] {
        &self.observables
    }

    pub fn num_observables(&self) -> usize {
        self.observables.len()
    }

    /// Joint eigenprojectors, one per outcome.
    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn num_outcomes(&self) -> usize {
        self.projectors.len()
    }

    /// `eigenvalues()[outcome][k]` is the value of observable `k` on that outcome.
    pub fn eigenvalues(&self) -> &[Vec<f64>] {
        &self.eigenvalues
    }

    pub fn c_norm(&self) -> f64 {
        match self.convention {
            NormConvention::MeanNormPreserving => self.gamma / 2.0,
            NormConvention::Literal => 1.0,
        }
    }

    pub(crate) fn to_eigenbasis(&self, psi: &StateVector) -> Vec<C64> {
        match &self.basis {
            None => psi.as_slice().to_vec(),
            Some(v) => (v.adjoint() * psi.amplitudes()).iter().copied().collect(),
        }
    }

    pub(crate) fn out_of_eigenbasis(&self, psi: &[C64]) -> Result<StateVector> {
        match &self.basis {
            None => StateVector::new(psi.to_vec()),
            Some(v) => StateVector::from_vector(v * CVector::from_column_slice(psi)),
        }
    }

    /// Outcome weights `<P_k>` of a normalized eigenbasis vector.
    pub(crate) fn weights_eig(&self, psi: &[C64], out: &mut [f64]) {
        out.iter_mut().for_each(|w| *w = 0.0);
        for (a, &o) in psi.iter().zip(&self.outcome_of) {
            out[o] += a.norm_sqr();
        }
    }

    /// One Euler-Maruyama step on eigenbasis amplitudes, in place. Returns `false`
    /// when the increment vanished identically and `psi` was left untouched.
    pub(crate) fn step_eig(&self, psi: &mut [C64], dt: f64, db: &[f64], scratch: &mut Vec<C64>) -> bool {
        let dim = psi.len();
        let c = self.c_norm();
        scratch.clear();
        scratch.resize(dim, C64::new(0.0, 0.0));
        if !self.h_zero {
            for i in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..dim {
                    acc += self.h_eig[(i, j)] * psi[j];
                }
                // -i H psi dt
                scratch[i] = C64::new(acc.im, -acc.re) * dt;
            }
        }
        for (k, &dbk) in db.iter().enumerate() {
            let a = &self.diag[k * dim..(k + 1) * dim];
            let mean = exact_mean(a, psi);
            for i in 0..dim {
                let r = a[i] - mean;
                if r != 0.0 {
                    scratch[i] += psi[i] * (r * dbk - c * r * r * dt);
                }
            }
        }
        if scratch.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            return false;
        }
        let mut norm = 0.0;
        for (p, s) in psi.iter_mut().zip(scratch.iter()) {
            *p += s;
            norm += p.norm_sqr();
        }
        let inv = 1.0 / norm.sqrt();
        psi.iter_mut().for_each(|p| *p *= inv);
        true
    }
}

/// `sum_i |psi_i|^2 a_i`, returning the common eigenvalue exactly when `psi` is
/// supported on a single eigenvalue.
fn exact_mean(a: &[f64], psi: &[C64]) -> f64 {
    let mut common: Option<f64> = None;
    let mut single = true;
    let mut mean = 0.0;
    let mut norm = 0.0;
    for (x, p) in a.iter().zip(psi) {
        let w = p.norm_sqr();
        if w == 0.0 {
            continue;
        }
        match common {
            None => common = Some(*x),
            Some(v) if v != *x => single = false,
            _ => {}
        }
        mean += w * x;
        norm += w;
    }
    match common {
        Some(v) if single => v,
        _ => mean / norm,
    }
}

/// Gaussian increments `dB_k ~ N(0, gamma dt)`, one per observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseIncrement {
    pub db: Vec<f64>,
}

impl NoiseIncrement {
    pub fn zero(k: usize) -> Self {
        Self { db: vec![0.0; k] }
    }

    pub fn sample<R: rand::Rng + ?Sized>(k: usize, gamma: f64, dt: f64, rng: &mut R) -> Self {
        let mut db = vec![0.0; k];
        fill_noise(&mut db, (gamma * dt).sqrt(), rng);
        Self { db }
    }
}

pub(crate) fn fill_noise<R: rand::Rng + ?Sized>(db: &mut [f64], sd: f64, rng: &mut R) {
    use rand_distr::{Distribution, StandardNormal};
    for x in db.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *x = z * sd;
    }
}

fn check_normalized(psi: &StateVector) -> Result<()> {
    let n = psi.norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!("state must be normalized, |psi|^2 = {n}")));
    }
    Ok(())
}

/// `Q psi` and `R_k psi` in the original basis.
pub fn drift_diffusion(model: &CollapseModel, psi: &StateVector) -> Result<(CVector, Vec<CVector>)> {
    if psi.dim() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), found: psi.dim() });
    }
    check_normalized(psi)?;
    let v = psi.amplitudes();
    let mut q = (&model.hamiltonian * v) * C64::new(0.0, -1.0);
    let mut rs = Vec::with_capacity(model.observables.len());
    for a in &model.observables {
        let av = a * v;
        let mean = v.dotc(&av).re;
        let r = &av - v * C64::from(mean);
        let rr = a * &r - &r * C64::from(mean);
        q -= rr * C64::from(model.c_norm());
        rs.push(r);
    }
    Ok((q, rs))
}

/// `psi + Q psi dt + sum_k R_k psi dB_k`, renormalized. Returns the input unchanged
/// when the increment vanishes identically.
pub fn em_step(model: &CollapseModel, psi: &StateVector, dt: f64, noise: &NoiseIncrement) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if noise.db.len() != model.num_observables() {
        return Err(Error::Dimension {
            expected: model.num_observables(),
            found: noise.db.len(),
        });
    }
    let (q, rs) = drift_diffusion(model, psi)?;
    let mut inc = q * C64::from(dt);
    for (r, db) in rs.iter().zip(&noise.db) {
        inc += r * C64::from(*db);
    }
    if inc.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok(psi.clone());
    }
    let next = psi.amplitudes() + inc;
    let norm = next.norm();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::Integration {
            step: 0,
            time: dt,
            reason: format!("state norm became {norm}"),
        });
    }
    StateVector::from_vector(next / C64::from(norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::c;

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_vec(v.iter().map(|&x| c(x, 0.0)).collect()))
    }

    #[test]
    fn diffusion_of_superposition() {
        let m = CollapseModel::qubit(CMatrix::zeros(2, 2), 1.0).unwrap();
        let psi = StateVector::from_real(&[1.0, 1.0]).unwrap().normalized().unwrap();
        let (q, rs) = drift_diffusion(&m, &psi).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((rs[0][0] - c(s, 0.0)).norm() < 1e-15);
        assert!((rs[0][1] - c(-s, 0.0)).norm() < 1e-15);
        // R.R psi = A^2 psi = psi, so Q psi = -(gamma/2) psi
        assert!((q[0] - c(-0.5 * s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn eigenstates_are_stationary() {
        let m = CollapseModel::qubit(CMatrix::zeros(2, 2), 1.0).unwrap();
        let e = StateVector::basis(2, 1).unwrap();
        let (q, rs) = drift_diffusion(&m, &e).unwrap();
        assert!(q.iter().all(|z| *z == c(0.0, 0.0)));
        assert!(rs[0].iter().all(|z| *z == c(0.0, 0.0)));
        let out = em_step(&m, &e, 1e-3, &NoiseIncrement { db: vec![0.37] }).unwrap();
        assert_eq!(out, e);
    }

    #[test]
    fn zero_noise_step_by_hand() {
        let m = CollapseModel::qubit(CMatrix::zeros(2, 2), 1.0).unwrap();
        let psi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let dt = 1e-2;
        let out = em_step(&m, &psi, dt, &NoiseIncrement::zero(1)).unwrap();
        // <A> = 0.36 - 0.64 = -0.28; r = (1.28, -0.72)
        let a = 0.6 * (1.0 - 0.5 * 1.28 * 1.28 * dt);
        let b = 0.8 * (1.0 - 0.5 * 0.72 * 0.72 * dt);
        let n = (a * a + b * b).sqrt();
        assert!((out.as_slice()[0].re - a / n).abs() < 1e-15);
        assert!((out.as_slice()[1].re - b / n).abs() < 1e-15);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_step_is_euler_unitary() {
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let m = CollapseModel::qubit(h.clone(), 1e-12).unwrap();
        let psi = StateVector::from_real(&[1.0, 0.0]).unwrap();
        let dt = 1e-4;
        let out = em_step(&m, &psi, dt, &NoiseIncrement::zero(1)).unwrap();
        // exp(-i H dt) e_0 = (cos dt, -i sin dt)
        let exact = [c(dt.cos(), 0.0), c(0.0, -dt.sin())];
        for (x, y) in out.as_slice().iter().zip(exact) {
            assert!((x - y).norm() < dt * dt);
        }
    }

    #[test]
    fn fast_step_matches_dense_step() {
        let h = CMatrix::from_row_slice(
            3,
            3,
            &[c(0.2, 0.0), c(0.1, 0.3), c(0.0, 0.0), c(0.1, -0.3), c(-0.4, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
        );
        // A non-diagonal observable forces the eigenbasis path.
        let u = crate::hilbert::random_unitary(3, &mut rand_chacha::ChaCha8Rng::seed_from_u64(4));
        let a = u.matrix() * diag(&[1.0, -1.0, 2.0]) * u.matrix().adjoint();
        let a = (&a + a.adjoint()) * c(0.5, 0.0);
        let m = CollapseModel::new(h, vec![a], 0.7).unwrap();
        assert!(m.basis.is_some());
        let psi = StateVector::from_real(&[0.3, -0.5, 0.81]).unwrap().normalized().unwrap();
        let noise = NoiseIncrement { db: vec![0.013] };
        let dense = em_step(&m, &psi, 1e-3, &noise).unwrap();
        let mut eig = m.to_eigenbasis(&psi);
        let mut scratch = Vec::new();
        assert!(m.step_eig(&mut eig, 1e-3, &noise.db, &mut scratch));
        let back = m.out_of_eigenbasis(&eig).unwrap();
        assert!(back.distance(&dense).unwrap() < 1e-12);
    }

    #[test]
    fn joint_outcomes_of_commuting_observables() {
        let m = CollapseModel::new(CMatrix::zeros(4, 4), vec![diag(&[1.0, 1.0, 0.0, 0.0]), diag(&[0.0, 1.0, 0.0, 1.0])], 1.0)
            .unwrap();
        assert_eq!(m.num_outcomes(), 4);
        assert_eq!(m.eigenvalues()[1], vec![1.0, 1.0]);
        let degenerate = CollapseModel::new(CMatrix::zeros(3, 3), vec![diag(&[1.0, 1.0, -1.0])], 1.0).unwrap();
        assert_eq!(degenerate.projectors()[0].rank(), 2);
        let bad = CollapseModel::new(
            CMatrix::zeros(2, 2),
            vec![diag(&[1.0, -1.0]), CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])],
            1.0,
        );
        assert!(matches!(bad, Err(Error::Precondition(_))));
    }

    use rand::SeedableRng;
}
