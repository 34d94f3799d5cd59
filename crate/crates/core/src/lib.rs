//! Directional slice energies for displacement fields with cracks.
//!
//! The crate measures a field `u : Ω → R^d` through its one-dimensional
//! slices `s ↦ ξ·u(z + sξ)` along a finite set of directions, builds
//! piecewise-multilinear approximants on anchored `ε`-lattices with bad-cube
//! excision, and estimates the discrete Korn constant that links the two.
//!
//! Start with [`generators`] to build a test field, [`slicing::lambda_v`] to
//! measure it and [`approximant::build`] to approximate it.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod anchor;
pub mod approximant;
pub mod cli;
pub mod error;
pub mod field_model;
pub mod generators;
pub mod geometry;
pub mod interpolation;
pub mod linalg;
pub mod reduce;
pub mod report;
pub mod slicing;

pub use error::{Error, Result};
pub use field_model::{
    make_direction_set, transform_basis, BoxDomain, Direction, DirectionKind, DirectionSet,
    Displacement, PiecewiseAffine, VectorField,
};
