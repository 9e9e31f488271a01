//! Decision-theoretic valuation of quantum games: equivalence principles, the
//! sure-thing and zero-sum axioms, and the linear system they generate.

mod game;
mod pivotal;
mod solve;

pub use game::{
    relabel_game, sure_thing_game, transform_game, zero_sum_game, Game, Outcome, PayoffFn, Relabeling, LABEL_TOL,
};
pub use pivotal::{derive_pivotal, derive_pivotal_game, Pivotal};
pub use solve::{
    axiom_constraints, pivotal_generators, value_solve, CheckStatus, Constraint, ConstraintRecord, EquivalenceCheck,
    EquivalenceKind, GameRecord, GameValue, Generator, Origin, ValueReport, CLOSURE_CAP, IDENTIFY_TOL,
};
