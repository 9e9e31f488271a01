use bornlab_core::nogo::{
    dispersion_free_search, propagate_pm_constraint, separation_check, PmGeometry, PmOutcome, PmValues, RaySet,
    SearchOptions, SearchOutcome,
};
use bornlab_core::{born_weight, random_state, random_unitary, Projector, StateVector, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn frame(u: &bornlab_core::SymmetryUnitary) -> Vec<StateVector> {
    (0..u.dim()).map(|k| StateVector::from_vector(u.matrix().column(k).into_owned()).unwrap()).collect()
}

fn value() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), Just(Some(0.0)), Just(Some(1.0)), (0.0..=1.0f64).prop_map(Some)]
}

proptest! {
    #[test]
    fn propagation_only_grows_and_is_idempotent(p1 in value(), p2 in value(), plus in value(), minus in value(), seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let basis = frame(&random_unitary(3, &mut rng));
        let geom = PmGeometry::from_pair(&basis[0], &basis[1]).unwrap();
        let given = PmValues { p1, p2, plus, minus };
        if let PmOutcome::Extended { values, .. } = propagate_pm_constraint(&geom, &given).unwrap() {
            prop_assert!(values.defined() >= given.defined());
            for (a, b) in [(given.p1, values.p1), (given.p2, values.p2), (given.plus, values.plus), (given.minus, values.minus)] {
                if let Some(x) = a {
                    prop_assert!((b.unwrap() - x).abs() <= 1e-12);
                }
            }
            match propagate_pm_constraint(&geom, &values).unwrap() {
                PmOutcome::Extended { values: again, .. } => prop_assert_eq!(again, values),
                other => prop_assert!(false, "second pass changed the outcome: {:?}", other),
            }
        }
    }

    #[test]
    fn separation_ignores_global_phase(dim in 2usize..=4, seed: u64, a in 0.0..6.3f64, b in 0.0..6.3f64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let chi = random_state(dim, &mut rng);
        let phi = random_state(dim, &mut rng);
        let base = separation_check(&chi, &phi).unwrap();
        let turned = separation_check(&chi.scaled(C64::from_polar(1.0, a)), &phi.scaled(C64::from_polar(1.0, b))).unwrap();
        prop_assert_eq!(base.verdict, turned.verdict);
        prop_assert!((base.distance - turned.distance).abs() <= 1e-12);
    }

    #[test]
    fn satisfying_assignments_are_additive_on_contexts(frames in 1usize..=3, seed: u64) {
        // Frames sharing their first ray with the previous one.
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut rays = frame(&random_unitary(3, &mut rng));
        for _ in 1..frames {
            let shared = rays[rays.len() - 3].clone();
            let other = random_state(3, &mut rng);
            let a = shared.amplitudes();
            let w = other.amplitudes() - a * a.dotc(other.amplitudes());
            let v = StateVector::from_vector(w).unwrap().normalized().unwrap();
            let r = random_state(3, &mut rng);
            let r = r.amplitudes();
            let b = v.amplitudes();
            let rest = r - a * a.dotc(r) - b * b.dotc(r);
            let third = StateVector::from_vector(rest).unwrap().normalized().unwrap();
            rays.push(shared);
            rays.push(v);
            rays.push(third);
        }
        let set = RaySet::new(rays).unwrap();
        let rep = dispersion_free_search(&set, &[], SearchOptions::default()).unwrap();
        match rep.outcome {
            SearchOutcome::Satisfiable { assignment } => {
                for ctx in set.contexts() {
                    let ones = ctx.iter().filter(|&&i| assignment[i]).count();
                    prop_assert_eq!(ones, 1, "context {:?}", ctx);
                }
                for i in 0..set.len() {
                    for j in i + 1..set.len() {
                        prop_assert!(!(set.orthogonal(i, j) && assignment[i] && assignment[j]));
                    }
                }
            }
            other => prop_assert!(false, "frames sharing rays are colorable: {:?}", other),
        }
    }

    #[test]
    fn born_tables_are_not_dispersion_free(dim in 2usize..=5, seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_state(dim, &mut rng);
        let basis = frame(&random_unitary(dim, &mut rng));
        let inside = basis
            .iter()
            .map(|v| born_weight(&psi, &Projector::onto(v).unwrap()).unwrap())
            .any(|w| w > 1e-12 && w < 1.0 - 1e-12);
        prop_assert!(inside);
    }
}
