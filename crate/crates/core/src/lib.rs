//! Two-scale damage simulation for periodic fiber/particle composites.
//!
//! The crate is split along the two scales of the method:
//!
//! * the microscale ([`homogenize`]) solves the first-order periodic cell
//!   problem on a unit cell and evaluates the homogenized elastic tensor of a
//!   composite whose matrix is degraded by a phase-field damage level;
//! * [`lookup`] samples that tensor over the damage range once, off-line, and
//!   fits a C² interpolant so the macroscale can evaluate `C(d)`, `C'(d)` and
//!   `C''(d)` in closed form;
//! * the macroscale ([`phase_field`]) solves the coupled displacement /
//!   phase-field problem by monolithic Newton–Raphson under prescribed
//!   displacement load steps;
//! * [`downscale`] reconstructs the micro displacement field at any macro
//!   point from the converged solution.
//!
//! Everything here is `no_std` with `alloc`; file formats, configuration and
//! the command line live in the `microfrac` crate.
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

pub mod downscale;
pub mod error;
pub mod fem;
pub mod homogenize;
pub mod lookup;
pub mod mesh;
pub mod phase_field;
pub mod tensor;

pub use error::{Error, NullMode, Result};
pub use mesh::{InclusionShape, InclusionSpec, Material, NodeSet, NotchSpec, Point2, Quad4Mesh};
pub use tensor::ElasticTensor;
