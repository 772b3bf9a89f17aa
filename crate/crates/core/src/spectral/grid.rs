use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct GridData {
    dim: usize,
    n: usize,
    half_width: f64,
    dx: f64,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
    k2: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Periodic Cartesian grid on `[-L, L)^d` with `n` points per axis.
///
/// Point `j` on an axis sits at `x_j = -L + j dx`; frequencies are stored in
/// FFT order, `xi_k = pi k / L` for `k = 0, 1, .., n/2-1, -n/2, .., -1`.
/// Multi-dimensional arrays are row-major with the last axis contiguous.
///
/// Cloning is cheap: the FFT plans and lookup tables are shared.
#[derive(Clone)]
pub struct Grid(Arc<GridData>);

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 16, got {n}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!("half-width must be positive, got {half_width}")));
        }
        let dx = 2.0 * half_width / n as f64;
        let coords: Vec<f64> = (0..n).map(|j| -half_width + j as f64 * dx).collect();
        let wavenumbers: Vec<f64> = (0..n)
            .map(|k| {
                let signed = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
                std::f64::consts::PI * signed as f64 / half_width
            })
            .collect();
        let k2 = match dim {
            1 => wavenumbers.iter().map(|k| k * k).collect(),
            _ => {
                let mut out = Vec::with_capacity(n * n);
                for a in &wavenumbers {
                    for b in &wavenumbers {
                        out.push(a * a + b * b);
                    }
                }
                out
            }
        };
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Grid(Arc::new(GridData {
            dim,
            n,
            half_width,
            dx,
            coords,
            wavenumbers,
            k2,
            forward,
            inverse,
        })))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn half_width(&self) -> f64 {
        self.0.half_width
    }

    pub fn dx(&self) -> f64 {
        self.0.dx
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.0.n.pow(self.0.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.0.dx.powi(self.0.dim as i32)
    }

    /// Frequency spacing `pi / L`.
    pub fn dxi(&self) -> f64 {
        std::f64::consts::PI / self.0.half_width
    }

    /// Largest resolved wavenumber magnitude, `pi / dx`.
    pub fn xi_max(&self) -> f64 {
        std::f64::consts::PI / self.0.dx
    }

    pub fn coords(&self) -> &[f64] {
        &self.0.coords
    }

    /// Per-axis wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.0.wavenumbers
    }

    /// `|xi|^2` for every frequency-space index.
    pub fn k2(&self) -> &[f64] {
        &self.0.k2
    }

    /// Signed integer frequency index on one axis.
    pub fn signed_index(&self, k: usize) -> i64 {
        let n = self.0.n;
        if k < n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    /// Per-axis index of flat index `idx`.
    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        match (self.0.dim, axis) {
            (1, _) => idx,
            (_, 0) => idx / self.0.n,
            _ => idx % self.0.n,
        }
    }

    /// Position of flat index `idx`, one coordinate per axis.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let n = self.0.n;
        match self.0.dim {
            1 => [self.0.coords[idx], 0.0],
            _ => [self.0.coords[idx / n], self.0.coords[idx % n]],
        }
    }

    /// `|x|^2` at flat index `idx`.
    pub fn radius2(&self, idx: usize) -> f64 {
        let p = self.point(idx);
        p[0] * p[0] + p[1] * p[1]
    }

    /// Wavenumber vector at flat frequency index `idx`.
    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        let n = self.0.n;
        match self.0.dim {
            1 => [self.0.wavenumbers[idx], 0.0],
            _ => [self.0.wavenumbers[idx / n], self.0.wavenumbers[idx % n]],
        }
    }

    /// True when the frequency at `idx` survives the 2/3 dealiasing rule.
    pub fn dealias_keep(&self, idx: usize) -> bool {
        let n = self.0.n;
        let cut = (n / 3) as i64;
        let keep = |k: usize| self.signed_index(k).abs() < cut;
        match self.0.dim {
            1 => keep(idx),
            _ => keep(idx / n) && keep(idx % n),
        }
    }

    /// Grid conjugate to this one: its points are this grid's frequencies
    /// (in centered order) and vice versa. Same `n`, half-width `pi / dx`.
    pub fn dual(&self) -> Grid {
        Grid::new(self.0.dim, self.0.n, self.xi_max()).expect("dual of a valid grid is valid")
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.dim == other.0.dim
                && self.0.n == other.0.n
                && self.0.half_width.to_bits() == other.0.half_width.to_bits())
    }

    /// Unitary in-place DFT. `inverse = false` maps position samples to the
    /// frequency representation.
    pub fn fft_in_place(&self, data: &mut [Complex64], inverse: bool) {
        let g = &*self.0;
        debug_assert_eq!(data.len(), self.len());
        let plan = if inverse { &g.inverse } else { &g.forward };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        match g.dim {
            1 => plan.process_with_scratch(data, &mut scratch),
            _ => {
                let n = g.n;
                plan.process_with_scratch(data, &mut scratch);
                transpose_square(data, n);
                plan.process_with_scratch(data, &mut scratch);
                transpose_square(data, n);
            }
        }
        let scale = 1.0 / (self.len() as f64).sqrt();
        data.iter_mut().for_each(|z| *z *= scale);
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (ib..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                let j0 = if ib == jb { i + 1 } else { jb };
                for j in j0..(jb + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.0.dim)
            .field("n", &self.0.n)
            .field("half_width", &self.0.half_width)
            .field("dx", &self.0.dx)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_spacing_grid() {
        let g = Grid::new(1, 16, 8.0).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert_eq!(g.dx() * g.n() as f64, 2.0 * g.half_width());
        let dxi = std::f64::consts::PI / 8.0;
        assert!((g.wavenumbers()[1] - dxi).abs() < 1e-15);
        assert!((g.wavenumbers()[8] + std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_grid_size() {
        let g = Grid::new(2, 256, 64.0).unwrap();
        assert_eq!(g.len(), 65536);
        assert_eq!(g.dx(), 0.5);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid::new(3, 64, 8.0).is_err());
        assert!(Grid::new(1, 48, 8.0).is_err());
        assert!(Grid::new(1, 8, 8.0).is_err());
        assert!(Grid::new(2, 64, 0.0).is_err());
    }

    #[test]
    fn frequency_lattice_is_conjugate_symmetric() {
        let g = Grid::new(1, 32, 5.0).unwrap();
        let ks = g.wavenumbers();
        for (k, xi) in ks.iter().enumerate() {
            if g.signed_index(k) == -(g.n() as i64) / 2 {
                continue;
            }
            assert!(ks.iter().any(|other| (other + xi).abs() < 1e-12));
        }
    }

    #[test]
    fn dual_of_dual_is_original() {
        let g = Grid::new(2, 64, 12.0).unwrap();
        let dd = g.dual().dual();
        assert!((dd.half_width() - 12.0).abs() < 1e-12);
        assert!((g.dual().dx() - g.dxi()).abs() < 1e-14);
    }
}
