use bornlab_core::emergence::{
    born_limit, equal_mass_refine, equiprobable_values, measure_uniqueness_solve, rational_born_values, RationalState,
    UniquenessOutcome,
};
use bornlab_core::{
    born_weight, check_additivity, phase_unitary, random_state, CellSet, CoarseGraining, GrainingFamily, Projector,
    Resolution, SeparatingSet, StateVector, C64,
};
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Block sizes, with an equal-modulus state whose component on block `k` has norm `1/sqrt(d)`.
fn equiprobable_state(sizes: &[usize], rng: &mut ChaCha20Rng) -> StateVector {
    let d = sizes.len() as f64;
    let mut amps = Vec::new();
    for &n in sizes {
        let local = random_state(n, rng).normalized().unwrap();
        let phase = C64::from_polar(1.0 / d.sqrt(), rng.random_range(0.0..6.3));
        amps.extend(local.as_slice().iter().map(|a| a * phase));
    }
    StateVector::new(amps).unwrap()
}

fn block_projectors(g: &CoarseGraining) -> Vec<Projector> {
    g.blocks().into_iter().map(|b| Projector::cells(g.dim(), b).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equiprobable_tables_are_additive_and_phase_blind(sizes in prop::collection::vec(1usize..=3, 2..=6), seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let g = CoarseGraining::from_block_sizes(&sizes).unwrap();
        let psi = equiprobable_state(&sizes, &mut rng);
        let set = SeparatingSet::from_state(&psi, block_projectors(&g)).unwrap();
        let d = equiprobable_values(&psi, &set, &g).unwrap();
        prop_assert!(check_additivity(&d.table, &d.lattice).unwrap().is_empty());
        d.trace.validate(1e-10).unwrap();

        let theta: Vec<f64> = (0..sizes.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let turned = phase_unitary(&theta, &set).unwrap().apply(&psi).unwrap();
        let set2 = SeparatingSet::from_state(&turned, block_projectors(&g)).unwrap();
        let d2 = equiprobable_values(&turned, &set2, &g).unwrap();
        prop_assert!(d.table.max_abs_diff(&d2.table) <= 1e-10);
    }

    #[test]
    fn rational_values_match_born(weights in prop::collection::vec(0u64..=12, 1..=8), seed: u64) {
        prop_assume!(weights.iter().sum::<u64>() > 0);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = weights.iter().map(|_| rng.random_range(1..=3)).collect();
        let g = CoarseGraining::from_block_sizes(&sizes).unwrap();
        let r = RationalState::on_blocks(&g, weights.clone()).unwrap();
        let d = rational_born_values(&r, &g, &GrainingFamily::new(vec![g.clone()]).unwrap()).unwrap();
        let psi = r.state().unwrap();
        for (k, b) in g.blocks().into_iter().enumerate() {
            prop_assert_eq!(&d.exact[k].1, &r.born_exact()[k]);
            let float = born_weight(&psi, &Projector::cells(g.dim(), b).unwrap()).unwrap();
            prop_assert!((float - d.exact[k].1.to_f64().unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn refined_pieces_have_equal_mass(dim in 1usize..=5, m in 1usize..=9, seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_state(dim, &mut rng);
        let g = CoarseGraining::trivial(dim).unwrap();
        let r = equal_mass_refine(&psi, &g, 0, m, Resolution::default()).unwrap();
        let total: f64 = r.piece_masses.iter().sum();
        let mean = total / m as f64;
        let worst = r.piece_masses.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
        prop_assert_eq!(r.pieces.len(), m);
        prop_assert!(worst < 1e-9 * total, "deviation {} of total {}", worst, total);
    }

    #[test]
    fn unique_measure_is_the_born_table(weights in prop::collection::vec(1u64..=8, 1..=8)) {
        prop_assume!(weights.iter().sum::<u64>() <= 64);
        let g = CoarseGraining::unit_cells(weights.len()).unwrap();
        let r = RationalState::on_blocks(&g, weights).unwrap();
        let d = rational_born_values(&r, &g, &GrainingFamily::new(vec![g.clone()]).unwrap()).unwrap();
        let refined = d.refined.unwrap();
        let family = GrainingFamily::new(vec![refined.coarse.clone(), refined.fine.clone()]).unwrap();
        let u = measure_uniqueness_solve(&refined.state, &family).unwrap();
        match u.outcome {
            UniquenessOutcome::Unique { table, born_deviation } => {
                prop_assert!(born_deviation <= 1e-9);
                for (cells, v) in table.iter() {
                    let w = born_weight(&refined.state, &Projector::cells(refined.state.dim(), cells.clone()).unwrap()).unwrap();
                    prop_assert!((v - w).abs() <= 1e-9);
                }
            }
            other => prop_assert!(false, "not unique: {:?}", other),
        }
    }

    #[test]
    fn approximant_errors_never_grow(dim in 2usize..=5, seed: u64, tol_exp in 3i32..=10) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_state(dim, &mut rng);
        let split = rng.random_range(1..dim);
        let p = Projector::cells(dim, CellSet::range(0, split)).unwrap();
        let tol = 10f64.powi(-tol_exp);
        let lim = born_limit(&psi, &p, tol).unwrap();
        prop_assert!((lim.value - born_weight(&psi, &p).unwrap()).abs() <= tol);
        let errs: Vec<f64> = lim.record.iter().map(|a| a.norm_error).collect();
        prop_assert!(errs.windows(2).skip(1).all(|w| w[1] <= w[0]), "{:?}", errs);
    }
}
