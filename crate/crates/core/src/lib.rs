//! Density-based topology optimization of multi-material structures under
//! design-dependent fluidic pressure loads.
//!
//! The pressure field comes from a Darcy flow problem with a drainage sink,
//! solved on the same honeycomb (hexagonal Wachspress) mesh as the plane-stress
//! elasticity problem, and is turned into consistent nodal forces `F = -T p`.
//! Materials are selected through the extended SIMP interpolation and the
//! compliance is minimized under linear volume constraints with the Method of
//! Moving Asymptotes.

// `!(a > b)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjoint;
pub mod darcy;
pub mod driver;
pub mod elasticity;
pub mod error;
pub mod fields;
pub mod mesh;
pub mod mma;
pub mod sparse;

pub use error::{Error, Result};
