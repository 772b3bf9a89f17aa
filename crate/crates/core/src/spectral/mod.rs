//! Grids, fields, transforms, the Hartree kernel and the free-flow operators.

pub mod far_field;
pub mod field;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod ops;

pub use field::{ComplexField, Direction, Representation};
pub use grid::Grid;
pub use kernel::{HartreeKernel, ZeroModePolicy};
pub use ops::{apply_j, apply_j_factored, apply_m, free_propagate, gradient, hartree_potential, trilinear_t};
