//! Intrinsic Hopf-Lax evolutions for sections of quotient maps.
//!
//! The base space `Y` is a finite sample of a bounded subset of `R^k`, the
//! quotient map is given as one fiber per base point, and a section assigns to
//! each base point a point of its fiber. On top of that data the crate computes
//! fiber distances, intrinsic Lipschitz constants, the symmetrized Hopf-Lax
//! evolution under a convex Lagrangian, constrained Fenchel-Legendre transforms,
//! the associated curve problem, and checks the inequalities relating them.

// NaN must fail the `!(x > 0.0)` style guards used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod lagrangian;
pub mod par;
pub mod report;
pub mod scenario;
pub mod section;
pub mod semigroup;
pub mod suite;
pub mod variational;

pub use error::{Error, Result};
pub use geometry::{FiberGeometry, FiberedSpace, Point};
pub use lagrangian::Lagrangian;
pub use section::Section;
