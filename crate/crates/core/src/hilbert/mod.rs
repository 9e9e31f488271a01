//! Finite-dimensional Hilbert-space kernel: states, projectors, coarse grainings,
//! symmetry unitaries and candidate measures.

pub mod lattice;
pub mod measure;
pub mod projector;
pub mod state;
pub mod unitary;

pub use lattice::{
    sublattice_from_graining, BooleanSublattice, CoarseGraining, GrainingFamily, Resolution,
    MATERIALIZE_LIMIT,
};
pub use measure::{check_additivity, check_additivity_with_tol, AdditivityViolation, MeasureEntry, MeasureTable};
pub use projector::{born_weight, orthonormalize, trace_weight, CellSet, Projector};
pub use state::{
    c, hermiticity_defect, max_abs_diff, unitarity_defect, CMatrix, CVector, DensityMatrix,
    StateVector, Tolerances, C64, NUMERIC_TOL, STRUCTURAL_TOL,
};
pub use unitary::{
    intertwiner, permutation_unitary, phase_unitary, random_state, random_unitary,
    SeparatingSet, SymmetryUnitary, UnitaryKind,
};
