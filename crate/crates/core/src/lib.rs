// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod damping;
pub mod error;
pub mod field;
pub mod harness;
pub mod linalg;
pub mod oned;
pub mod pseudodiff;
pub mod spectral2d;
pub mod timedomain;
