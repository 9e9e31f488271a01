use bornlab_core::games::{
    derive_pivotal, pivotal_generators, relabel_game, transform_game, value_solve, Game, PayoffFn, Relabeling,
};
use bornlab_core::{random_state, random_unitary, Projector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_game(dim: usize, rng: &mut ChaCha20Rng) -> Game {
    let outcomes = (0..dim)
        .map(|k| (rng.random_range(-5.0..5.0), Projector::from_cells(dim, [k]).unwrap()))
        .collect();
    Game::new(random_state(dim, rng), outcomes, PayoffFn::linear(rng.random_range(-2.0..2.0))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pivotal_closures_are_sound_and_determined(x1 in -10.0..10.0f64, x2 in -10.0..10.0f64, a in -3.0..3.0f64) {
        let g = Game::two_outcome(x1, x2, PayoffFn::linear(a)).unwrap();
        let gens = pivotal_generators(&g).unwrap();
        let r = value_solve(&[g], &gens, 4).unwrap();
        let scale = r.games.iter().fold(1f64, |m, g| m.max(g.value.born.abs()));
        prop_assert!(r.soundness_residual <= 1e-10 * scale);
        prop_assert!(r.unique);
        let v = r.games[0].value.value.unwrap();
        prop_assert!((v - 0.5 * a * (x1 + x2)).abs() <= 1e-9 * scale);
    }

    #[test]
    fn pivotal_traces_validate(x1 in -10.0..10.0f64, x2 in -10.0..10.0f64, a in -3.0..3.0f64) {
        let p = derive_pivotal(x1, x2, PayoffFn::linear(a)).unwrap();
        p.trace.validate(1e-10).unwrap();
        prop_assert!((p.value.value.unwrap() - 0.5 * a * (x1 + x2)).abs() <= 1e-9);
    }

    #[test]
    fn equivalences_keep_the_born_value(dim in 2usize..=4, seed: u64, s in -4.0..4.0f64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let g = random_game(dim, &mut rng);
        let v = g.born_value().unwrap();
        for f in [Relabeling::Shift { s }, Relabeling::Negate] {
            prop_assert!((relabel_game(&g, &f).unwrap().born_value().unwrap() - v).abs() <= 1e-10);
        }
        let labels = g.spectrum();
        let perm = Relabeling::General { pairs: labels.iter().map(|&x| (x, 2.0 * x + 1.0)).collect() };
        prop_assert!((relabel_game(&g, &perm).unwrap().born_value().unwrap() - v).abs() <= 1e-10);
        let u = random_unitary(dim, &mut rng);
        prop_assert!((transform_game(&g, &u).unwrap().born_value().unwrap() - v).abs() <= 1e-10);
    }
}
