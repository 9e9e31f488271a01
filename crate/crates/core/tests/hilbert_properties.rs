use bornlab_core::{
    born_weight, max_abs_diff, permutation_unitary, random_state, random_unitary, trace_weight, CMatrix, CellSet,
    Projector, SeparatingSet, StateVector, C64,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// A rank-`rank` projector onto the span of random vectors.
fn random_projector(dim: usize, rank: usize, rng: &mut ChaCha20Rng) -> Projector {
    if rank == 0 {
        return Projector::zero(dim);
    }
    let vs: Vec<StateVector> = (0..rank).map(|_| random_state(dim, rng)).collect();
    Projector::onto_span(&vs).unwrap()
}

fn case() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=6).prop_flat_map(|d| (Just(d), 0..=d, any::<u64>()))
}

proptest! {
    #[test]
    fn weights_of_complements_sum_to_one((dim, rank, seed) in case()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_state(dim, &mut rng);
        let p = random_projector(dim, rank, &mut rng);
        let total = born_weight(&psi, &p).unwrap() + born_weight(&psi, &p.complement()).unwrap();
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn scaling_the_state_changes_nothing((dim, rank, seed) in case(), re in -5.0..5.0f64, im in -5.0..5.0f64) {
        prop_assume!(re.hypot(im) > 1e-3);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_state(dim, &mut rng);
        let p = random_projector(dim, rank, &mut rng);
        let a = born_weight(&psi, &p).unwrap();
        let b = born_weight(&psi.scaled(C64::new(re, im)), &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn unitary_covariance((dim, rank, seed) in case()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_state(dim, &mut rng);
        let p = random_projector(dim, rank, &mut rng);
        let u = random_unitary(dim, &mut rng);
        let moved = born_weight(&u.apply(&psi).unwrap(), &u.conjugate(&p).unwrap()).unwrap();
        prop_assert!((moved - born_weight(&psi, &p).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn density_matrix_weight_agrees((dim, rank, seed) in case()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_state(dim, &mut rng);
        let p = random_projector(dim, rank, &mut rng);
        let rho = psi.density().unwrap();
        prop_assert!((trace_weight(&rho, &p).unwrap() - born_weight(&psi, &p).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn permutation_unitary_permutes_projectors(dim in 2usize..=6, seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..dim).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);

        // Cell projectors: the conjugates are exactly the permuted cells.
        let standard = SeparatingSet::standard(dim).unwrap();
        let u = permutation_unitary(&perm, &standard).unwrap();
        for k in 0..dim {
            let image = u.conjugate(&standard.projectors()[k]).unwrap();
            let want = Projector::cells(dim, CellSet::new([perm[k]])).unwrap();
            prop_assert_eq!(max_abs_diff(&image.to_matrix(), &want.to_matrix()), 0.0);
        }

        // A random frame: equal within tolerance.
        let f = random_unitary(dim, &mut rng);
        let vs: Vec<StateVector> =
            (0..dim).map(|k| StateVector::from_vector(f.matrix().column(k).into_owned()).unwrap()).collect();
        let ps: Vec<Projector> = vs.iter().map(|v| Projector::onto(v).unwrap()).collect();
        let set = SeparatingSet::new(vs, ps.clone()).unwrap();
        let u = permutation_unitary(&perm, &set).unwrap();
        for k in 0..dim {
            let image: CMatrix = u.conjugate(&ps[k]).unwrap().to_matrix();
            prop_assert!(max_abs_diff(&image, &ps[perm[k]].to_matrix()) <= 1e-10);
        }
    }
}
