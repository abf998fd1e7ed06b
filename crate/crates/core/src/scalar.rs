//! Scalar abstraction for the allocation mathematics.
//!
//! The solvers in [`crate::allocation`] are generic over the floating-point
//! type; `f64` is the default everywhere else in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + Sum<Self> + Debug + Display + 'static {}

impl<T> Real for T where T: Float + FromPrimitive + Sum<Self> + Debug + Display + 'static {}

/// Casts an `f64` constant into the scalar type.
pub(crate) fn cast<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("constant representable in scalar type")
}

/// Tolerance for validating that input weights sum to one.
///
/// `1e-12` for `f64` per the input contract; widened for narrower types
/// where that bound is below the rounding floor.
pub(crate) fn simplex_input_tol<F: Real>() -> F {
    cast::<F>(1e-12).max(F::epsilon() * cast(64.0))
}

/// Tolerance for validating computed allocations (looser than the input one).
pub(crate) fn allocation_tol<F: Real>() -> F {
    cast::<F>(1e-10).max(F::epsilon() * cast(64.0))
}

/// Target residual for the budget threshold root-find.
pub(crate) fn root_tol<F: Real>() -> F {
    cast::<F>(1e-12).max(F::epsilon() * cast(16.0))
}
