// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csl;
pub mod emergence;
pub mod error;
pub mod games;
pub mod hilbert;
pub mod histories;
pub mod linsys;
pub mod lln;
pub mod nogo;

pub use error::{Error, Result};
pub use hilbert::*;
