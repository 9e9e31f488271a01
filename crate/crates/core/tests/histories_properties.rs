use bornlab_core::histories::{collapsed_probability, uncollapsed_probability, History, HistorySet, IdentityResolution};
use bornlab_core::{born_weight, random_state, random_unitary, CMatrix, CVector, StateVector, SymmetryUnitary, UnitaryKind, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_resolution(dim: usize, rng: &mut ChaCha20Rng) -> IdentityResolution {
    let u = random_unitary(dim, rng);
    let basis: Vec<StateVector> = (0..dim)
        .map(|j| StateVector::from_vector(u.matrix().column(j).into_owned()).unwrap())
        .collect();
    IdentityResolution::from_basis("random", &basis).unwrap()
}

fn random_phases(dim: usize, rng: &mut ChaCha20Rng) -> SymmetryUnitary {
    let d = CVector::from_iterator(dim, (0..dim).map(|_| C64::from_polar(1.0, rng.random_range(-3.2..3.2))));
    SymmetryUnitary::new(CMatrix::from_diagonal(&d), UnitaryKind::Phase).unwrap()
}

fn all_histories(set: &HistorySet) -> Vec<History> {
    (0..set.count().unwrap()).map(|i| set.history(&set.labels(i)).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn collapsed_probabilities_sum_to_one(dim in 2usize..=3, steps in 1usize..=3, seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let res = (0..steps).map(|_| random_resolution(dim, &mut rng)).collect();
        let us = (0..steps).map(|_| random_unitary(dim, &mut rng)).collect();
        let set = HistorySet::new(res, us, 1e-8).unwrap();
        let psi = random_state(dim, &mut rng);
        let total: f64 = all_histories(&set).iter().map(|h| collapsed_probability(h, &psi).unwrap()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10, "sum {}", total);
    }

    #[test]
    fn diagonal_chains_do_not_interfere(dim in 2usize..=4, steps in 1usize..=3, seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let res = (0..steps).map(|_| IdentityResolution::standard("z", dim).unwrap()).collect();
        let us = (0..steps).map(|_| random_phases(dim, &mut rng)).collect();
        let set = HistorySet::new(res, us, 1e-8).unwrap();
        let psi = random_state(dim, &mut rng);
        for h in all_histories(&set) {
            let a = collapsed_probability(&h, &psi).unwrap();
            let b = uncollapsed_probability(&h, &psi).unwrap();
            prop_assert!((a - b).abs() <= 1e-10, "collapsed {} uncollapsed {}", a, b);
        }
    }

    #[test]
    fn one_step_is_the_born_weight(dim in 2usize..=4, seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let res = random_resolution(dim, &mut rng);
        let u = random_unitary(dim, &mut rng);
        let psi = random_state(dim, &mut rng);
        let evolved = u.apply(&psi).unwrap();
        for p in res.projectors() {
            let h = History::new(vec![p.clone()], vec![u.clone()]).unwrap();
            let w = born_weight(&evolved, p).unwrap();
            prop_assert!((uncollapsed_probability(&h, &psi).unwrap() - w).abs() <= 1e-10);
            prop_assert!((collapsed_probability(&h, &psi).unwrap() - w).abs() <= 1e-10);
        }
    }
}
