//! Finite-instance replays of the argument that invariance, stability and
//! continuity force the Born rule on configuration-space lattices.

mod lemmas;
mod limit;
mod refine;
mod trace;
mod uniqueness;

pub use lemmas::{equiprobable_values, rational_born_values, Derived, RationalState, RefinedInstance, EQUIPROBABLE_TOL};
pub use limit::{born_limit, Approximant, BornLimit, DENOMINATOR_CAP};
pub use refine::{amplitudes_from_samples, equal_mass_refine, hypercube_split_count, MassProfile, Refinement};
pub use trace::{Axiom, Check, DerivationTrace, Premise, Rule, TraceStep};
pub use uniqueness::{measure_uniqueness_solve, ConstraintCounts, UniquenessOutcome, UniquenessReport, MASS_TOL};
