//! Numerical Hille-Phillips functional calculus for matrix generators of
//! semigroups.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod error;
pub mod eta;
pub mod experiments;
pub mod linalg;
pub mod measure;
pub mod operator;
pub mod quad;
pub mod special;
pub mod symbol;
pub mod transference;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;
