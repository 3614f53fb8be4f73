//! Finite-element machinery shared by the cell and macro solvers.

pub mod assembly;
pub mod dofmap;
pub mod element;
pub mod shape;
pub mod solve;
pub mod sparse;

pub use assembly::{assemble, element_dofs, Assembler, ElementContribution};
pub use dofmap::{DofMap, DofTarget};
pub use element::{b_matrices, element_quadrature, QuadPoint};
pub use shape::{q4_shape, Shape, GAUSS_2X2};
pub use solve::{best_ordering, classify_null_mode, rcm_ordering, relative_residual, solve_constrained, Factorization, Method};
pub use sparse::{CsrMatrix, SparseSystem};
