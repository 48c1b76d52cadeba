//! Numerical laboratory for quasi-(2,β)-normed spaces: concrete norms and
//! their axioms, the p-norm envelope, a fixed-point engine with a-priori
//! error bounds, the radical functional equation and its hyperstability.
//!
//! Everything is generic over [`Scalar`] (`f32`, `f64`); identities that
//! need exact arithmetic are also generic over [`scalar::Ring`] and run in
//! [`Exact`].

// `!(a < b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
pub mod error;
pub mod fixedpoint;
pub mod function;
pub mod hyperstab;
pub mod radical;
pub mod sampling;
pub mod scalar;
pub mod spaces;
pub mod vector;

pub use error::{Error, Result};
pub use function::{AbsMode, Evaluate, PowerTerm, VectorFunction};
pub use scalar::Scalar;
pub use spaces::{NormFamily, SpaceDescriptor};
pub use vector::Vector;

/// Exact rationals.
pub type Exact = num_rational::BigRational;

pub type Vector64 = Vector<f64>;
pub type Space64 = SpaceDescriptor<f64>;
pub type Function64 = VectorFunction<f64>;
pub type Equation64 = radical::EquationParams<f64>;
pub type Spec64 = fixedpoint::IterationSpec<f64>;
pub type ErrorModel64 = hyperstab::ErrorModel<f64>;
