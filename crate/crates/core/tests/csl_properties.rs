use bornlab_core::csl::{em_step, simulate, CollapseModel, NoiseIncrement, SimParams};
use bornlab_core::{random_state, CMatrix, CVector, StateVector, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn diag(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(d.len(), d.iter().map(|&x| C64::new(x, 0.0))))
}

fn model(kind: u8) -> CollapseModel {
    match kind % 3 {
        0 => CollapseModel::qubit(CMatrix::zeros(2, 2), 1.0).unwrap(),
        1 => CollapseModel::new(CMatrix::zeros(3, 3), vec![diag(&[2.0, -1.0, 0.5])], 0.7).unwrap(),
        _ => CollapseModel::new(CMatrix::zeros(4, 4), vec![diag(&[1.0, 1.0, 0.0, 0.0]), diag(&[0.0, 1.0, 0.0, 1.0])], 1.3)
            .unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenstates_ignore_any_noise(kind: u8, k in 0usize..4, db in prop::collection::vec(-10.0..10.0f64, 2), dt in 1e-5..1e-1f64) {
        let m = model(kind);
        let e = StateVector::basis(m.dim(), k % m.dim()).unwrap();
        let noise = NoiseIncrement { db: db[..m.num_observables()].to_vec() };
        let out = em_step(&m, &e, dt, &noise).unwrap();
        prop_assert_eq!(out.as_slice(), e.as_slice());
    }

    #[test]
    fn stored_states_are_normalized(kind: u8, seed: u64) {
        let m = model(kind);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_state(m.dim(), &mut rng);
        let params = SimParams { t_max: 0.5, dt: 1e-3, epsilon: 1e-6, record_every: 7 };
        let t = simulate(&m, &psi, &params, seed).unwrap();
        for s in &t.states {
            prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn trajectories_are_seed_determined(kind: u8, seed: u64) {
        let m = model(kind);
        let psi = random_state(m.dim(), &mut ChaCha20Rng::seed_from_u64(seed ^ 0x5eed));
        let params = SimParams { t_max: 0.3, dt: 1e-3, epsilon: 1e-6, record_every: 10 };
        let a = serde_json::to_string(&simulate(&m, &psi, &params, seed).unwrap()).unwrap();
        let b = serde_json::to_string(&simulate(&m, &psi, &params, seed).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn noise_moments_match_the_wiener_increment() {
    let (gamma, dt, n, k) = (0.8, 2e-3, 40_000usize, 3usize);
    let var = gamma * dt;
    for seed in [1u64, 2, 3] {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let draws: Vec<Vec<f64>> = (0..n).map(|_| NoiseIncrement::sample(k, gamma, dt, &mut rng).db).collect();
        for i in 0..k {
            let mean = draws.iter().map(|d| d[i]).sum::<f64>() / n as f64;
            assert!(mean.abs() <= 4.0 * (var / n as f64).sqrt(), "mean {mean}");
            for j in 0..k {
                let cov = draws.iter().map(|d| d[i] * d[j]).sum::<f64>() / n as f64;
                let want = if i == j { var } else { 0.0 };
                // Var(x^2) = 2 var^2 and Var(x y) = var^2 for independent normals.
                let sd = if i == j { (2.0f64).sqrt() * var } else { var } / (n as f64).sqrt();
                assert!((cov - want).abs() <= 4.0 * sd, "cov[{i}][{j}] = {cov}");
            }
        }
    }
}
