//! Numerical geometric measure theory on sampled metric measure spaces.
//!
//! A [`SampledSpace`] is a finite atomic approximation `m = Σ w_i δ_{x_i}` of a
//! metric measure space together with a declared resolution `h`. On top of it the
//! crate builds distance fields and enlargements, Minkowski contents and their
//! relaxation, the sup-semigroup and slopes, perimeter via Lipschitz recovery
//! families, coarea checks, the gauge measure built from `m(B̄_r)/(2r)` and Cheeger
//! constants.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ball;
pub mod cheeger;
pub mod coarea;
pub mod descent;
pub mod distance;
pub mod error;
pub mod fit;
pub mod gauge;
pub mod minkowski;
pub mod par;
pub mod perimeter;
pub mod report;
pub mod slope;
pub mod space;
pub mod table;

pub use error::{GeoError, Result};
pub use space::{Density, Metric, SampledSpace, ScalarField, SetIndicator};
