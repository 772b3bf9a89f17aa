//! Benchmark fixtures shared by the criterion targets.

use hnls_core::{ComplexField, Grid, HartreeKernel};

/// Gaussian datum and `γ = 1.5` kernel on an `n × n` box of half-width 16.
pub fn fixture(n: usize) -> (ComplexField, HartreeKernel) {
    let grid = Grid::new(2, n, 16.0).expect("valid grid");
    let kernel = HartreeKernel::new(&grid, 1.5).expect("valid exponent");
    (ComplexField::gaussian(&grid, 0.5, 1.5, [0.5, 0.0], [0.3, 0.0]), kernel)
}
